#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

#include "mergelab/optim.hpp"

using namespace mergelab;

namespace {

ParamVector scalar_param(double v) {
    ParamVector p;
    p.values = {v};
    return p;
}

} // namespace

TEST_CASE("zero gradient leaves params unchanged and increments t") {
    ParamVector p;
    p.values = {1.0, -2.0, 3.5};
    AdamState s = AdamState::fresh(3, {});
    auto [ns, np] = adam_step(s, p, {0.0, 0.0, 0.0});
    CHECK(np.values == p.values);
    CHECK(ns.t == 1);
}

TEST_CASE("single step matches the hand-computed Adam formula") {
    AdamHyper hyper;
    hyper.lr = 0.1;
    AdamState s = AdamState::fresh(1, hyper);
    auto [ns, np] = adam_step(s, scalar_param(0.0), {1.0});
    // m_hat = 1, v_hat = 1 -> p' = -lr / (1 + eps)
    double expected = -0.1 / (1.0 + hyper.eps);
    CHECK(np.values[0] == doctest::Approx(expected).epsilon(1e-15));
    CHECK(np.values[0] == doctest::Approx(-0.0999999999).epsilon(1e-9));
}

TEST_CASE("non-finite gradient is rejected with its index") {
    AdamState s = AdamState::fresh(2, {});
    ParamVector p;
    p.values = {0.0, 0.0};
    try {
        adam_step(s, p, {0.0, std::nan("")});
        FAIL("expected an exception");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("index 1") != std::string::npos);
    }
}

TEST_CASE("state round-trips through serialization bit-exactly") {
    AdamHyper hyper;
    hyper.lr = 0.01;
    AdamState s = AdamState::fresh(4, hyper);
    ParamVector p;
    p.values = {0.1, -0.2, 0.3, -0.4};
    std::vector<double> g1{1.0, -0.5, 0.25, 2.0};
    std::vector<double> g2{-0.3, 0.7, -1.0, 0.1};

    auto [s1, p1] = adam_step(s, p, g1);

    std::string path = "test_adam_state.bin";
    write_adam_state(s1, path);
    AdamState s1b = read_adam_state(path);
    std::remove(path.c_str());
    CHECK(s1b.t == s1.t);
    CHECK(s1b.m == s1.m);
    CHECK(s1b.v == s1.v);

    auto [s2, p2] = adam_step(s1, p1, g2);
    auto [s2b, p2b] = adam_step(s1b, p1, g2);
    CHECK(p2.values == p2b.values);
    CHECK(s2.m == s2b.m);
    CHECK(s2.v == s2b.v);
}
