#include "doctest.h"

#include <stdexcept>

#include "mergelab/trainer.hpp"

using namespace mergelab;

namespace {

ModelSpec toy_spec(int num_classes = 5) {
    ModelSpec s;
    s.conv_channels = {4, 8};
    s.hidden_dim = 16;
    s.num_classes = num_classes;
    return s;
}

struct World {
    Alphabet alph = make_alphabet(7, 4, {2, 4});
    DomainStyle style;
    Dataset train;
    World() {
        auto [tr, te] = build_domain(alph, style, 8, 2, 3, 4);
        train = tr;
    }
};

} // namespace

TEST_CASE("k=1 single-sample update composes backward + adam_step") {
    World w;
    ModelSpec spec = toy_spec();
    Dataset one = w.train;
    one.samples.resize(1);
    ParamVector theta = init_model(spec, 1);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 4;
    cfg.lr = 1e-3;
    TrainResult r = update(one, theta, cfg, spec);

    auto [loss, grad] = backward(spec, theta, one.samples);
    AdamHyper hyper;
    hyper.lr = cfg.lr;
    auto [st, expected] = adam_step(AdamState::fresh(theta.values.size(), hyper), theta, grad);
    CHECK(r.params.values == expected.values);
    CHECK(r.steps == 1);
    REQUIRE(r.loss_trace.size() == 1);
    CHECK(r.loss_trace[0] == loss);
}

TEST_CASE("update is bit-deterministic") {
    World w;
    ModelSpec spec = toy_spec();
    ParamVector theta = init_model(spec, 2);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 4;
    cfg.shuffle_seed = 11;
    TrainResult a = update(w.train, theta, cfg, spec);
    TrainResult b = update(w.train, theta, cfg, spec);
    CHECK(a.params.values == b.params.values);
    CHECK(a.loss_trace == b.loss_trace);
}

TEST_CASE("k=2 differs from two chained k=1 calls (state persists within a call)") {
    World w;
    ModelSpec spec = toy_spec();
    ParamVector theta = init_model(spec, 2);
    TrainConfig k2;
    k2.epochs = 2;
    k2.batch_size = 4;
    k2.shuffle_seed = 11;
    TrainConfig k1 = k2;
    k1.epochs = 1;

    TrainResult joint = update(w.train, theta, k2, spec);
    TrainResult first = update(w.train, theta, k1, spec);
    TrainResult chained = update(w.train, first.params, k1, spec);
    CHECK(joint.params.values != chained.params.values);
}

TEST_CASE("pretrain_seed is deterministic and moves the weights") {
    World w;
    ModelSpec spec = toy_spec();
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 4;
    TrainResult a = pretrain_seed(w.train, spec, cfg, 42);
    TrainResult b = pretrain_seed(w.train, spec, cfg, 42);
    CHECK(a.params.values == b.params.values);
    CHECK(a.params.values != init_model(spec, 42).values);
}

TEST_CASE("transfer with equal glyph_count carries the full vector") {
    World w;
    ModelSpec spec = toy_spec();
    ParamVector theta = pretrain_seed(w.train, spec, TrainConfig{.epochs = 1, .batch_size = 4}, 1).params;
    Alphabet g_alph = make_alphabet(99, 4, {2, 4});  // same glyph_count
    auto [g, _] = build_domain(g_alph, w.style, 4, 1, 5, 4);
    TransferResult tr = transfer_finetune(g, theta, spec, TrainConfig{.epochs = 1, .batch_size = 4});
    CHECK(!tr.head_reinitialized);
    CHECK(tr.target_spec.num_classes == spec.num_classes);
}

TEST_CASE("transfer with new glyph_count carries encoder bytes exactly") {
    World w;
    ModelSpec spec = toy_spec();
    ParamVector theta = pretrain_seed(w.train, spec, TrainConfig{.epochs = 1, .batch_size = 4}, 1).params;
    Alphabet g_alph = make_alphabet(99, 6, {2, 4});
    auto [g, _] = build_domain(g_alph, w.style, 4, 1, 5, 4);

    // reproduce the pre-training start vector via a zero-step cap
    TrainConfig probe{.epochs = 1, .batch_size = 4};
    probe.max_steps = 0;
    TransferResult start = transfer_finetune(g, theta, spec, probe);
    CHECK(start.head_reinitialized);
    CHECK(start.target_spec.num_classes == 7);

    auto src_layout = param_layout(spec);
    auto dst_layout = param_layout(start.target_spec);
    for (size_t i = 0; i < dst_layout.size(); ++i) {
        if (dst_layout[i].name.starts_with("out.")) continue;
        for (size_t j = 0; j < dst_layout[i].size; ++j)
            CHECK(start.train.params.values[dst_layout[i].offset + j] ==
                  theta.values[src_layout[i].offset + j]);
    }
}
