#pragma once

#include <string>
#include <vector>

#include "mergelab/glyphgen.hpp"
#include "mergelab/model.hpp"

namespace mergelab {

struct MetricsReport {
    std::string dataset_id;
    size_t n = 0;
    double seq_accuracy = 0.0;
    double cer = 0.0;
};

size_t levenshtein(const std::vector<int>& a, const std::vector<int>& b);

// Greedy-decoded prediction in glyph-index space (CTC classes shifted back).
std::vector<int> predict(const ModelSpec& spec, const ParamVector& params, const Image& image);

double sequence_accuracy(const ModelSpec& spec, const ParamVector& params, const Dataset& dataset);
double cer(const ModelSpec& spec, const ParamVector& params, const Dataset& dataset);
MetricsReport evaluate(const ModelSpec& spec, const ParamVector& params, const Dataset& dataset,
                       const std::string& dataset_id = "");

} // namespace mergelab
