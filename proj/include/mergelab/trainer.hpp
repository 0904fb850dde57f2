#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mergelab/glyphgen.hpp"
#include "mergelab/model.hpp"
#include "mergelab/optim.hpp"

namespace mergelab {

struct TrainConfig {
    int epochs = 1;
    int batch_size = 32;
    double lr = 1e-3;
    uint64_t shuffle_seed = 0;
    std::optional<uint64_t> max_steps;  // cap on total optimizer steps

    void validate() const;
};

struct TrainResult {
    ParamVector params;
    std::vector<double> loss_trace;  // per-epoch mean loss
    uint64_t steps = 0;              // optimizer steps actually taken
};

// U^k: k epochs of Adam/CTC on one dataset from theta; fresh optimizer
// state at entry, seeded shuffle per epoch, deterministic throughout.
TrainResult update(const Dataset& dataset, const ParamVector& theta, const TrainConfig& cfg,
                   const ModelSpec& spec);

// theta_0 = update(Z, init_model(spec, seed), cfg)
TrainResult pretrain_seed(const Dataset& z, const ModelSpec& spec, const TrainConfig& cfg,
                          uint64_t seed);

// Fine-tune on a target whose glyph_count may differ: the output head is
// reinitialized at the new size, everything below carries over byte-exact.
struct TransferResult {
    TrainResult train;
    ModelSpec target_spec;
    bool head_reinitialized = false;
};

TransferResult transfer_finetune(const Dataset& g, const ParamVector& theta_seed,
                                 const ModelSpec& source_spec, const TrainConfig& cfg,
                                 uint64_t head_seed = 0xFEED);

} // namespace mergelab
