#include "doctest.h"

#include <algorithm>
#include <stdexcept>

#include "mergelab/eval.hpp"
#include "mergelab/rng.hpp"
#include "mergelab/trainer.hpp"

using namespace mergelab;

namespace {

// O(3^n) recursion, independent of the DP implementation.
size_t lev_oracle(const std::vector<int>& a, const std::vector<int>& b, size_t i, size_t j) {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    size_t best = lev_oracle(a, b, i + 1, j + 1) + (a[i] == b[j] ? 0 : 1);
    best = std::min(best, lev_oracle(a, b, i + 1, j) + 1);
    best = std::min(best, lev_oracle(a, b, i, j + 1) + 1);
    return best;
}

std::vector<int> random_seq(RngStream s, uint64_t tag, int max_len, int classes) {
    int len = static_cast<int>(s.below(tag, static_cast<uint64_t>(max_len + 1)));
    std::vector<int> out;
    for (int i = 0; i < len; ++i)
        out.push_back(static_cast<int>(s.below(tag * 1000 + 1 + static_cast<uint64_t>(i),
                                               static_cast<uint64_t>(classes))));
    return out;
}

} // namespace

TEST_CASE("levenshtein basics") {
    CHECK(levenshtein({1, 2}, {2}) == 1);
    CHECK(levenshtein({}, {}) == 0);
    CHECK(levenshtein({1, 2, 3}, {1, 2, 3}) == 0);
    CHECK(levenshtein({1}, {2, 3, 4}) == 3);
}

TEST_CASE("levenshtein matches the recursive oracle on 500 random pairs") {
    RngStream s(17);
    for (uint64_t t = 0; t < 500; ++t) {
        std::vector<int> a = random_seq(s.substream(2 * t), 1, 6, 3);
        std::vector<int> b = random_seq(s.substream(2 * t + 1), 1, 6, 3);
        CHECK(levenshtein(a, b) == lev_oracle(a, b, 0, 0));
    }
}

TEST_CASE("levenshtein symmetry and triangle inequality on fuzzed triples") {
    RngStream s(23);
    for (uint64_t t = 0; t < 200; ++t) {
        std::vector<int> a = random_seq(s.substream(3 * t), 1, 5, 3);
        std::vector<int> b = random_seq(s.substream(3 * t + 1), 1, 5, 3);
        std::vector<int> c = random_seq(s.substream(3 * t + 2), 1, 5, 3);
        CHECK(levenshtein(a, b) == levenshtein(b, a));
        CHECK(levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c));
    }
}

TEST_CASE("accuracy and cer on a model overfit to one sample") {
    ModelSpec spec;
    spec.conv_channels = {4, 8};
    spec.hidden_dim = 16;
    spec.num_classes = 3;
    Alphabet alph = make_alphabet(55, 2, {2, 4});
    DomainStyle style;
    Dataset d;
    d.alphabet_id = "tiny";
    d.glyph_count = 2;
    d.samples.push_back(render_sample(alph, {0, 1}, style, 1));

    TrainConfig cfg;
    cfg.epochs = 300;
    cfg.batch_size = 1;
    cfg.lr = 3e-3;
    TrainResult r = update(d, init_model(spec, 3), cfg, spec);
    MetricsReport rep = evaluate(spec, r.params, d);
    CHECK(rep.seq_accuracy == 1.0);
    CHECK(rep.cer == 0.0);  // accuracy 1 <=> cer 0
}

TEST_CASE("untrained model scores near zero on multi-char data") {
    ModelSpec spec;
    spec.conv_channels = {4, 8};
    spec.hidden_dim = 16;
    spec.num_classes = 7;
    Alphabet alph = make_alphabet(77, 6, {2, 4});
    DomainStyle style;
    Dataset d;
    d.alphabet_id = "hard";
    d.glyph_count = 6;
    RngStream s(5);
    for (uint64_t i = 0; i < 200; ++i) {
        std::vector<int> label;
        for (int j = 0; j < 4; ++j)
            label.push_back(static_cast<int>(s.below(10 * i + static_cast<uint64_t>(j), 6)));
        d.samples.push_back(render_sample(alph, label, style, 40000 + i));
    }
    CHECK(sequence_accuracy(spec, init_model(spec, 1), d) < 0.05);
}

TEST_CASE("single mismatching sample gives zero accuracy") {
    ModelSpec spec;
    spec.conv_channels = {4, 8};
    spec.hidden_dim = 16;
    spec.num_classes = 3;
    Alphabet alph = make_alphabet(55, 2, {2, 4});
    DomainStyle style;
    Dataset d;
    d.glyph_count = 2;
    d.samples.push_back(render_sample(alph, {0, 1, 0, 1}, style, 1));
    // untrained params virtually never decode this exactly
    CHECK(sequence_accuracy(spec, init_model(spec, 8), d) == 0.0);

    Dataset empty;
    CHECK_THROWS_AS(evaluate(spec, init_model(spec, 8), empty), std::invalid_argument);
}

TEST_CASE("metrics are order-independent") {
    ModelSpec spec;
    spec.conv_channels = {4, 8};
    spec.hidden_dim = 16;
    spec.num_classes = 5;
    Alphabet alph = make_alphabet(31, 4, {2, 4});
    DomainStyle style;
    auto [d, _] = build_domain(alph, style, 20, 1, 3, 4);
    ParamVector p = init_model(spec, 2);
    MetricsReport fwd = evaluate(spec, p, d);
    Dataset rev = d;
    std::reverse(rev.samples.begin(), rev.samples.end());
    MetricsReport bwd = evaluate(spec, p, rev);
    CHECK(fwd.seq_accuracy == bwd.seq_accuracy);
    CHECK(fwd.cer == bwd.cer);
}
