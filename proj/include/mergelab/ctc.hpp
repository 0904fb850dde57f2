#pragma once

#include <vector>

#include "mergelab/model.hpp"

namespace mergelab {

constexpr int kCtcBlank = 0;

// Minimum frame count for a label: L plus one per adjacent repeat.
int ctc_min_frames(const std::vector<int>& label);

struct CtcResult {
    double loss = 0.0;
    std::vector<double> grad_logits;  // frames x num_classes, row-major
};

// -log p(label | logits), log-space forward-backward over the
// blank-extended label; gradient w.r.t. the raw logits.
CtcResult ctc_loss(const LogitsSequence& logits, const std::vector<int>& label);

// Best-path decoding: per-frame argmax (ties -> lowest class index),
// collapse repeats, drop blanks.
std::vector<int> greedy_decode(const LogitsSequence& logits);

} // namespace mergelab
