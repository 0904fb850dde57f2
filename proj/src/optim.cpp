#include "mergelab/optim.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mergelab {

std::pair<AdamState, ParamVector> adam_step(const AdamState& state, const ParamVector& params,
                                            const std::vector<double>& grad) {
    if (state.m.size() != params.values.size() || grad.size() != params.values.size())
        throw std::invalid_argument("adam_step: length mismatch");
    for (size_t i = 0; i < grad.size(); ++i)
        if (!std::isfinite(grad[i]))
            throw std::invalid_argument("adam_step: non-finite gradient at index " + std::to_string(i));

    AdamState next = state;
    ParamVector out = params;
    next.t = state.t + 1;
    const double b1 = state.hyper.beta1, b2 = state.hyper.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(next.t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(next.t));
    for (size_t i = 0; i < grad.size(); ++i) {
        next.m[i] = b1 * state.m[i] + (1.0 - b1) * grad[i];
        next.v[i] = b2 * state.v[i] + (1.0 - b2) * grad[i] * grad[i];
        double mhat = next.m[i] / bc1;
        double vhat = next.v[i] / bc2;
        out.values[i] = params.values[i] - state.hyper.lr * mhat / (std::sqrt(vhat) + state.hyper.eps);
    }
    check_finite(out, "adam_step");
    return {std::move(next), std::move(out)};
}

namespace {

void write_doubles(std::ostream& os, const std::vector<double>& v) {
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * 8));
}

void read_doubles(std::istream& is, std::vector<double>& v, size_t n) {
    v.resize(n);
    is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * 8));
}

} // namespace

void write_adam_state(const AdamState& state, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_adam_state: cannot open " + path);
    os.write("MMAS", 4);
    uint16_t version = 1;
    os.write(reinterpret_cast<const char*>(&version), 2);
    uint64_t n = state.m.size();
    os.write(reinterpret_cast<const char*>(&n), 8);
    os.write(reinterpret_cast<const char*>(&state.t), 8);
    os.write(reinterpret_cast<const char*>(&state.hyper), sizeof(AdamHyper));
    write_doubles(os, state.m);
    write_doubles(os, state.v);
    if (!os) throw std::runtime_error("write_adam_state: write failed");
}

AdamState read_adam_state(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_adam_state: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "MMAS", 4) != 0) throw std::runtime_error("read_adam_state: bad magic");
    uint16_t version;
    is.read(reinterpret_cast<char*>(&version), 2);
    if (version != 1) throw std::runtime_error("read_adam_state: unsupported version");
    uint64_t n;
    AdamState s;
    is.read(reinterpret_cast<char*>(&n), 8);
    is.read(reinterpret_cast<char*>(&s.t), 8);
    is.read(reinterpret_cast<char*>(&s.hyper), sizeof(AdamHyper));
    read_doubles(is, s.m, n);
    read_doubles(is, s.v, n);
    if (!is) throw std::runtime_error("read_adam_state: truncated file");
    return s;
}

} // namespace mergelab
