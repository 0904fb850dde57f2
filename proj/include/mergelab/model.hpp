#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mergelab/glyphgen.hpp"
#include "mergelab/sha256.hpp"

namespace mergelab {

// Conv(3x3, pad 1) + ReLU + MaxPool(2x2) per stage, then a per-column
// hidden layer and a class layer over the flattened column features.
struct ModelSpec {
    std::vector<int> conv_channels{8, 16};
    int hidden_dim = 32;
    int num_classes = 0;  // glyph_count + 1; class 0 is the CTC blank

    void validate() const;
    int downsample_factor() const { return 1 << static_cast<int>(conv_channels.size()); }
    int pooled_height() const { return kImageHeight / downsample_factor(); }
    int frame_feature_dim() const { return conv_channels.back() * pooled_height(); }
    Digest256 layout_hash() const;
    std::string describe() const;
};

struct LayoutEntry {
    std::string name;
    size_t offset;
    std::vector<int> shape;
    size_t size;
};

std::vector<LayoutEntry> param_layout(const ModelSpec& spec);
size_t param_count(const ModelSpec& spec);

struct ParamVector {
    std::vector<double> values;
    Digest256 spec_hash{};

    size_t size() const { return values.size(); }
};

struct LogitsSequence {
    int frames = 0;
    int num_classes = 0;
    std::vector<double> data;  // row-major frames x num_classes

    double& at(int f, int c) { return data[static_cast<size_t>(f) * num_classes + c]; }
    double at(int f, int c) const { return data[static_cast<size_t>(f) * num_classes + c]; }
};

ParamVector init_model(const ModelSpec& spec, uint64_t seed);

LogitsSequence forward(const ModelSpec& spec, const ParamVector& params, const Image& image);

// Mean CTC loss over the batch and its parameter gradient.
std::pair<double, std::vector<double>> backward(const ModelSpec& spec, const ParamVector& params,
                                                const std::vector<Sample>& batch);

void check_finite(const ParamVector& params, const std::string& context);

} // namespace mergelab
