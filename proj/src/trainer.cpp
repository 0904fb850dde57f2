#include "mergelab/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mergelab/rng.hpp"

namespace mergelab {

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be positive");
}

TrainResult update(const Dataset& dataset, const ParamVector& theta, const TrainConfig& cfg,
                   const ModelSpec& spec) {
    cfg.validate();
    if (dataset.samples.empty()) throw std::invalid_argument("update: empty dataset");
    if (theta.spec_hash != spec.layout_hash())
        throw std::invalid_argument("update: theta/spec hash mismatch");

    const size_t n = dataset.samples.size();
    TrainResult result;
    result.params = theta;
    AdamHyper hyper;
    hyper.lr = cfg.lr;
    AdamState state = AdamState::fresh(theta.values.size(), hyper);

    RngStream shuffle_root(cfg.shuffle_seed);
    std::vector<size_t> order(n);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (size_t i = 0; i < n; ++i) order[i] = i;
        RngStream es = shuffle_root.substream(static_cast<uint64_t>(epoch));
        for (size_t i = n; i > 1; --i) std::swap(order[i - 1], order[es.below(i, i)]);

        double epoch_loss = 0.0;
        size_t batches = 0;
        for (size_t start = 0; start < n; start += static_cast<size_t>(cfg.batch_size)) {
            if (cfg.max_steps && result.steps >= *cfg.max_steps) break;
            size_t end = std::min(n, start + static_cast<size_t>(cfg.batch_size));
            std::vector<Sample> batch;
            batch.reserve(end - start);
            for (size_t i = start; i < end; ++i) batch.push_back(dataset.samples[order[i]]);

            auto [loss, grad] = backward(spec, result.params, batch);
            if (!std::isfinite(loss)) throw std::runtime_error("update: non-finite loss, aborting");
            auto [next_state, next_params] = adam_step(state, result.params, grad);
            state = std::move(next_state);
            result.params = std::move(next_params);
            epoch_loss += loss;
            ++batches;
            ++result.steps;
        }
        if (batches > 0) result.loss_trace.push_back(epoch_loss / static_cast<double>(batches));
        if (cfg.max_steps && result.steps >= *cfg.max_steps) break;
    }
    return result;
}

TrainResult pretrain_seed(const Dataset& z, const ModelSpec& spec, const TrainConfig& cfg,
                          uint64_t seed) {
    return update(z, init_model(spec, seed), cfg, spec);
}

TransferResult transfer_finetune(const Dataset& g, const ParamVector& theta_seed,
                                 const ModelSpec& source_spec, const TrainConfig& cfg,
                                 uint64_t head_seed) {
    TransferResult out;
    out.target_spec = source_spec;
    out.target_spec.num_classes = g.glyph_count + 1;

    ParamVector start;
    if (out.target_spec.num_classes == source_spec.num_classes) {
        start = theta_seed;
    } else {
        out.head_reinitialized = true;
        // carry everything below the output head, reinitialize out.w / out.b
        ParamVector fresh = init_model(out.target_spec, head_seed);
        auto src_layout = param_layout(source_spec);
        auto dst_layout = param_layout(out.target_spec);
        start = fresh;
        for (size_t i = 0; i < dst_layout.size(); ++i) {
            if (dst_layout[i].name.starts_with("out.")) continue;
            if (src_layout[i].size != dst_layout[i].size)
                throw std::runtime_error("transfer_finetune: unexpected layout divergence at " +
                                         dst_layout[i].name);
            std::copy(theta_seed.values.begin() + static_cast<ptrdiff_t>(src_layout[i].offset),
                      theta_seed.values.begin() + static_cast<ptrdiff_t>(src_layout[i].offset + src_layout[i].size),
                      start.values.begin() + static_cast<ptrdiff_t>(dst_layout[i].offset));
        }
    }
    out.train = update(g, start, cfg, out.target_spec);
    return out;
}

} // namespace mergelab
