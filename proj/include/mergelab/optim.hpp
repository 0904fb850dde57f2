#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mergelab/model.hpp"

namespace mergelab {

struct AdamHyper {
    double lr = 1e-3;  // paper-scale 1e-5 stays selectable via config
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    uint64_t t = 0;
    AdamHyper hyper;

    static AdamState fresh(size_t n, const AdamHyper& hyper) {
        AdamState s;
        s.m.assign(n, 0.0);
        s.v.assign(n, 0.0);
        s.hyper = hyper;
        return s;
    }
};

// One Adam update with bias correction; returns new state and params.
std::pair<AdamState, ParamVector> adam_step(const AdamState& state, const ParamVector& params,
                                            const std::vector<double>& grad);

void write_adam_state(const AdamState& state, const std::string& path);
AdamState read_adam_state(const std::string& path);

} // namespace mergelab
