#include "doctest.h"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mergelab/ctc.hpp"
#include "mergelab/rng.hpp"

using namespace mergelab;

namespace {

// Independent oracle: enumerate every length-F path over all classes,
// collapse (merge repeats, drop blanks), and sum path probabilities of
// the ones matching the label. Exponential, fine for F <= 4.
double brute_force_nll(const LogitsSequence& logits, const std::vector<int>& label) {
    const int F = logits.frames;
    const int C = logits.num_classes;
    std::vector<std::vector<double>> probs(F, std::vector<double>(C));
    for (int f = 0; f < F; ++f) {
        double mx = logits.at(f, 0);
        for (int c = 1; c < C; ++c) mx = std::max(mx, logits.at(f, c));
        double z = 0.0;
        for (int c = 0; c < C; ++c) z += std::exp(logits.at(f, c) - mx);
        for (int c = 0; c < C; ++c) probs[f][c] = std::exp(logits.at(f, c) - mx) / z;
    }
    double total = 0.0;
    std::vector<int> path(F, 0);
    long n_paths = 1;
    for (int f = 0; f < F; ++f) n_paths *= C;
    for (long p = 0; p < n_paths; ++p) {
        long rem = p;
        for (int f = 0; f < F; ++f) {
            path[f] = static_cast<int>(rem % C);
            rem /= C;
        }
        std::vector<int> collapsed;
        int prev = -1;
        for (int c : path) {
            if (c != prev && c != kCtcBlank) collapsed.push_back(c);
            prev = c;
        }
        if (collapsed == label) {
            double pr = 1.0;
            for (int f = 0; f < F; ++f) pr *= probs[f][path[f]];
            total += pr;
        }
    }
    return -std::log(total);
}

LogitsSequence random_logits(int frames, int classes, uint64_t seed, double scale = 3.0) {
    LogitsSequence l;
    l.frames = frames;
    l.num_classes = classes;
    l.data.resize(static_cast<size_t>(frames) * classes);
    RngStream s(seed);
    for (size_t i = 0; i < l.data.size(); ++i) l.data[i] = scale * (2.0 * s.uniform(i) - 1.0);
    return l;
}

} // namespace

TEST_CASE("ctc matches brute-force alignment enumeration") {
    for (int C = 2; C <= 3; ++C) {
        for (int F = 1; F <= 4; ++F) {
            for (int L = 1; L <= 2; ++L) {
                // all label sequences of length L over classes 1..C-1
                std::vector<std::vector<int>> labels;
                if (L == 1) {
                    for (int a = 1; a < C; ++a) labels.push_back({a});
                } else {
                    for (int a = 1; a < C; ++a)
                        for (int b = 1; b < C; ++b) labels.push_back({a, b});
                }
                for (const auto& label : labels) {
                    if (F < ctc_min_frames(label)) continue;
                    for (uint64_t draw = 0; draw < 20; ++draw) {
                        LogitsSequence l = random_logits(F, C, 1000 * C + 100 * F + 10 * L + draw);
                        CtcResult r = ctc_loss(l, label);
                        double oracle = brute_force_nll(l, label);
                        CHECK(std::abs(r.loss - oracle) < 1e-8);
                    }
                }
            }
        }
    }
}

TEST_CASE("single frame, single label reduces to -log softmax") {
    LogitsSequence l = random_logits(1, 3, 5);
    CtcResult r = ctc_loss(l, {2});
    double mx = std::max({l.at(0, 0), l.at(0, 1), l.at(0, 2)});
    double z = std::exp(l.at(0, 0) - mx) + std::exp(l.at(0, 1) - mx) + std::exp(l.at(0, 2) - mx);
    double expected = -(l.at(0, 2) - mx - std::log(z));
    CHECK(r.loss == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("uniform logits F=2 L=1 C=3 gives -log(1/3)") {
    LogitsSequence l;
    l.frames = 2;
    l.num_classes = 3;
    l.data.assign(6, 0.0);
    CtcResult r = ctc_loss(l, {1});
    // paths (c,c), (c,blank), (blank,c): 3 * (1/3)^2 = 1/3
    CHECK(r.loss == doctest::Approx(-std::log(1.0 / 3.0)).epsilon(1e-12));
}

TEST_CASE("infeasible labels raise instead of returning -inf") {
    LogitsSequence l = random_logits(1, 3, 9);
    CHECK_THROWS_AS(ctc_loss(l, std::vector<int>{1, 2}), std::invalid_argument);
    LogitsSequence l2 = random_logits(2, 3, 9);
    CHECK_THROWS_AS(ctc_loss(l2, std::vector<int>{1, 1}), std::invalid_argument);  // repeat needs a separator
    CHECK_THROWS_AS(ctc_loss(l2, std::vector<int>{}), std::invalid_argument);
    CHECK_THROWS_AS(ctc_loss(l2, {0}), std::invalid_argument);  // blank is not a label class
}

TEST_CASE("ctc gradient matches finite differences of the loss") {
    for (uint64_t seed : {11ULL, 12ULL, 13ULL}) {
        LogitsSequence l = random_logits(4, 3, seed);
        std::vector<int> label{1, 2};
        CtcResult r = ctc_loss(l, label);
        const double h = 1e-6;
        for (size_t i = 0; i < l.data.size(); ++i) {
            LogitsSequence lp = l, lm = l;
            lp.data[i] += h;
            lm.data[i] -= h;
            double num = (ctc_loss(lp, label).loss - ctc_loss(lm, label).loss) / (2 * h);
            CHECK(std::abs(num - r.grad_logits[i]) < 1e-5);
        }
    }
}

TEST_CASE("log-space stability for extreme logits") {
    RngStream s(77);
    for (uint64_t trial = 0; trial < 50; ++trial) {
        LogitsSequence l;
        l.frames = 4;
        l.num_classes = 3;
        l.data.resize(12);
        for (size_t i = 0; i < 12; ++i) l.data[i] = 100.0 * s.uniform(trial * 100 + i) - 50.0;
        CtcResult r = ctc_loss(l, {1, 2});
        CHECK(std::isfinite(r.loss));
        CHECK(r.loss >= -1e-12);
        for (double g : r.grad_logits) CHECK(std::isfinite(g));
    }
}

TEST_CASE("greedy decode collapse rules") {
    auto make = [](std::vector<std::vector<double>> rows) {
        LogitsSequence l;
        l.frames = static_cast<int>(rows.size());
        l.num_classes = static_cast<int>(rows[0].size());
        for (auto& r : rows) l.data.insert(l.data.end(), r.begin(), r.end());
        return l;
    };
    // argmax path [a, a, blank, b] -> "ab"
    CHECK(greedy_decode(make({{0, 5, 0}, {0, 5, 0}, {5, 0, 0}, {0, 0, 5}})) == std::vector<int>{1, 2});
    // all blanks -> empty
    CHECK(greedy_decode(make({{5, 0, 0}, {5, 0, 0}})).empty());
    // [a, blank, a] -> "aa"
    CHECK(greedy_decode(make({{0, 5, 0}, {5, 0, 0}, {0, 5, 0}})) == std::vector<int>{1, 1});
    // tie-break: equal logits -> lowest index (blank) wins everywhere
    CHECK(greedy_decode(make({{1, 1, 1}, {1, 1, 1}})).empty());
}
