#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mergelab/rng.hpp"

namespace mergelab {

constexpr int kGlyphCell = 16;   // square glyph cell, also the image height
constexpr int kImageHeight = 16;
constexpr int kDefaultMaxLabelLen = 8;

struct Alphabet {
    std::string id;
    int glyph_count = 0;
    std::vector<uint64_t> glyph_seeds;
    std::pair<int, int> stroke_budget{2, 4};
};

struct DomainStyle {
    double slant = 0.0;        // shear in [-0.5, 0.5]
    int stroke_width = 1;      // {1,2,3}
    double noise_sigma = 0.0;  // [0, 0.3]
    bool invert = false;
    int spacing_jitter = 0;    // [0, 3] px

    void validate() const;
};

// Row-major H x W grayscale image, values in [0,1].
struct Image {
    int height = 0;
    int width = 0;
    std::vector<double> pixels;

    double& at(int r, int c) { return pixels[static_cast<size_t>(r) * width + c]; }
    double at(int r, int c) const { return pixels[static_cast<size_t>(r) * width + c]; }
};

struct Sample {
    Image image;
    std::vector<int> label;
};

enum class Split { train, test };

struct Dataset {
    std::string alphabet_id;
    int glyph_count = 0;
    DomainStyle style;
    std::vector<Sample> samples;
    uint64_t seed = 0;
    Split split = Split::train;
};

// Rasterizes glyph `seed` alone into a 16x16 cell with the neutral style
// (no slant, width 1, no noise). Used for distinguishability checks.
Image render_glyph_canonical(uint64_t seed, std::pair<int, int> stroke_budget);

Alphabet make_alphabet(uint64_t master_seed, int glyph_count, std::pair<int, int> stroke_budget,
                       const std::string& id = "");

Sample render_sample(const Alphabet& alphabet, const std::vector<int>& label,
                     const DomainStyle& style, uint64_t sample_seed,
                     int max_len = kDefaultMaxLabelLen);

std::pair<Dataset, Dataset> build_domain(const Alphabet& alphabet, const DomainStyle& style,
                                         int n_train, int n_test, uint64_t seed,
                                         int max_len = kDefaultMaxLabelLen);

Dataset subsample(const Dataset& dataset, double fraction, uint64_t seed);

// Concatenates datasets (same glyph_count required); used for pooled training.
Dataset pool_datasets(const std::vector<Dataset>& parts);

// Binary export: "GLYF" header then per-sample records.
void write_glyf(const Dataset& dataset, const std::string& path);
Dataset read_glyf(const std::string& path);

} // namespace mergelab
