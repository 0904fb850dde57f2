#include "mergelab/glyphgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mergelab {

namespace {

constexpr int kSubGrid = 12;                         // stroke endpoints live on a 12x12 grid
constexpr int kSubOffset = (kGlyphCell - kSubGrid) / 2;

void draw_line(Image& img, double x0, double y0, double x1, double y1) {
    // dense parametric walk; endpoints are grid points so this is exact enough
    double dx = x1 - x0, dy = y1 - y0;
    int steps = std::max(1, static_cast<int>(std::ceil(std::max(std::abs(dx), std::abs(dy)) * 2.0)));
    for (int i = 0; i <= steps; ++i) {
        double t = static_cast<double>(i) / steps;
        int x = static_cast<int>(std::lround(x0 + t * dx));
        int y = static_cast<int>(std::lround(y0 + t * dy));
        if (x >= 0 && x < img.width && y >= 0 && y < img.height) img.at(y, x) = 1.0;
    }
}

// Polyline strokes from the glyph seed, width 1, no slant.
Image rasterize_glyph(uint64_t seed, std::pair<int, int> stroke_budget) {
    Image img;
    img.height = kGlyphCell;
    img.width = kGlyphCell;
    img.pixels.assign(static_cast<size_t>(kGlyphCell) * kGlyphCell, 0.0);

    RngStream stream(seed);
    int span = stroke_budget.second - stroke_budget.first + 1;
    int strokes = stroke_budget.first + static_cast<int>(stream.below(0, static_cast<uint64_t>(span)));
    uint64_t ctr = 1;
    for (int s = 0; s < strokes; ++s) {
        // each stroke is a short polyline of 2..3 segments
        int segments = 2 + static_cast<int>(stream.below(ctr++, 2));
        double px = kSubOffset + static_cast<double>(stream.below(ctr++, kSubGrid));
        double py = kSubOffset + static_cast<double>(stream.below(ctr++, kSubGrid));
        for (int g = 0; g < segments; ++g) {
            double nx = kSubOffset + static_cast<double>(stream.below(ctr++, kSubGrid));
            double ny = kSubOffset + static_cast<double>(stream.below(ctr++, kSubGrid));
            draw_line(img, px, py, nx, ny);
            px = nx;
            py = ny;
        }
    }
    return img;
}

Image shear(const Image& src, double slant) {
    Image out;
    out.height = src.height;
    out.width = src.width;
    out.pixels.assign(src.pixels.size(), 0.0);
    double cy = (src.height - 1) / 2.0;
    for (int r = 0; r < src.height; ++r) {
        int shift = static_cast<int>(std::lround(slant * (r - cy)));
        for (int c = 0; c < src.width; ++c) {
            int sc = c - shift;
            if (sc >= 0 && sc < src.width) out.at(r, c) = src.at(r, sc);
        }
    }
    return out;
}

Image dilate(const Image& src, int width) {
    if (width <= 1) return src;
    int radius = width - 1;  // width 2 -> one extra ring right/down, width 3 -> full ring
    Image out = src;
    for (int r = 0; r < src.height; ++r)
        for (int c = 0; c < src.width; ++c) {
            if (src.at(r, c) <= 0.0) continue;
            for (int dr = -(radius / 2); dr <= (radius + 1) / 2; ++dr)
                for (int dc = -(radius / 2); dc <= (radius + 1) / 2; ++dc) {
                    int rr = r + dr, cc = c + dc;
                    if (rr >= 0 && rr < out.height && cc >= 0 && cc < out.width) out.at(rr, cc) = 1.0;
                }
        }
    return out;
}

Image styled_glyph(uint64_t seed, std::pair<int, int> budget, const DomainStyle& style) {
    Image g = rasterize_glyph(seed, budget);
    if (style.slant != 0.0) g = shear(g, style.slant);
    if (style.stroke_width > 1) g = dilate(g, style.stroke_width);
    return g;
}

int hamming(const Image& a, const Image& b) {
    int d = 0;
    for (size_t i = 0; i < a.pixels.size(); ++i)
        if ((a.pixels[i] > 0.5) != (b.pixels[i] > 0.5)) ++d;
    return d;
}

} // namespace

void DomainStyle::validate() const {
    if (slant < -0.5 || slant > 0.5) throw std::invalid_argument("DomainStyle: slant out of [-0.5, 0.5]");
    if (stroke_width < 1 || stroke_width > 3) throw std::invalid_argument("DomainStyle: stroke_width not in {1,2,3}");
    if (noise_sigma < 0.0 || noise_sigma > 0.3) throw std::invalid_argument("DomainStyle: noise_sigma out of [0, 0.3]");
    if (spacing_jitter < 0 || spacing_jitter > 3) throw std::invalid_argument("DomainStyle: spacing_jitter out of [0, 3]");
}

Image render_glyph_canonical(uint64_t seed, std::pair<int, int> stroke_budget) {
    return rasterize_glyph(seed, stroke_budget);
}

Alphabet make_alphabet(uint64_t master_seed, int glyph_count, std::pair<int, int> stroke_budget,
                       const std::string& id) {
    if (glyph_count < 2) throw std::invalid_argument("make_alphabet: glyph_count must be >= 2");
    if (stroke_budget.first < 1 || stroke_budget.first > stroke_budget.second || stroke_budget.second > 8)
        throw std::invalid_argument("make_alphabet: stroke_budget must satisfy 1 <= min <= max <= 8");

    constexpr int kMinHamming = 13;  // > 5% of 256 pixels
    constexpr int kMaxRetries = 100;

    RngStream master(master_seed);
    Alphabet a;
    a.id = id.empty() ? "alph_" + std::to_string(master_seed) : id;
    a.glyph_count = glyph_count;
    a.stroke_budget = stroke_budget;

    std::vector<Image> canon;
    int retries = 0;
    for (int i = 0; i < glyph_count; ++i) {
        for (uint64_t attempt = 0;; ++attempt) {
            uint64_t seed = master.substream(static_cast<uint64_t>(i)).bits(attempt);
            Image img = rasterize_glyph(seed, stroke_budget);
            bool distinct = true;
            for (const Image& prev : canon)
                if (hamming(img, prev) < kMinHamming) { distinct = false; break; }
            // reject near-empty glyphs too
            double ink = 0;
            for (double p : img.pixels) ink += p;
            if (ink < 4.0) distinct = false;
            if (distinct) {
                a.glyph_seeds.push_back(seed);
                canon.push_back(std::move(img));
                break;
            }
            if (++retries > kMaxRetries)
                throw std::runtime_error("make_alphabet: could not draw distinguishable glyphs "
                                         "(degenerate stroke_budget?)");
        }
    }
    return a;
}

Sample render_sample(const Alphabet& alphabet, const std::vector<int>& label,
                     const DomainStyle& style, uint64_t sample_seed, int max_len) {
    style.validate();
    if (label.empty()) throw std::invalid_argument("render_sample: empty label");
    if (static_cast<int>(label.size()) > max_len)
        throw std::invalid_argument("render_sample: label longer than max_len");
    for (int c : label)
        if (c < 0 || c >= alphabet.glyph_count)
            throw std::invalid_argument("render_sample: label index out of range");

    RngStream stream(sample_seed);
    int n = static_cast<int>(label.size());

    // per-gap jitter, drawn before pixels so noise counters stay stable
    std::vector<int> jitter(n, 0);
    int total_jitter = 0;
    if (style.spacing_jitter > 0) {
        for (int i = 0; i < n; ++i) {
            jitter[i] = static_cast<int>(stream.substream(1).below(static_cast<uint64_t>(i),
                                                                   static_cast<uint64_t>(style.spacing_jitter + 1)));
            total_jitter += jitter[i];
        }
    }

    Sample s;
    s.label = label;
    s.image.height = kImageHeight;
    s.image.width = kGlyphCell * n + total_jitter;
    s.image.pixels.assign(static_cast<size_t>(s.image.height) * s.image.width, 0.0);

    int x = 0;
    for (int i = 0; i < n; ++i) {
        x += jitter[i];
        Image g = styled_glyph(alphabet.glyph_seeds[static_cast<size_t>(label[i])],
                               alphabet.stroke_budget, style);
        for (int r = 0; r < kGlyphCell; ++r)
            for (int c = 0; c < kGlyphCell; ++c)
                if (g.at(r, c) > 0.0) s.image.at(r, x + c) = 1.0;
        x += kGlyphCell;
    }

    if (style.invert)
        for (double& p : s.image.pixels) p = 1.0 - p;

    if (style.noise_sigma > 0.0) {
        RngStream noise = stream.substream(2);
        for (size_t i = 0; i < s.image.pixels.size(); ++i) {
            double v = s.image.pixels[i] + style.noise_sigma * noise.gaussian(i);
            s.image.pixels[i] = std::clamp(v, 0.0, 1.0);
        }
    }
    return s;
}

namespace {

Dataset generate_split(const Alphabet& alphabet, const DomainStyle& style, int count,
                       const RngStream& stream, uint64_t seed, Split split, int max_len) {
    Dataset d;
    d.alphabet_id = alphabet.id;
    d.glyph_count = alphabet.glyph_count;
    d.style = style;
    d.seed = seed;
    d.split = split;
    d.samples.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        RngStream per_sample = stream.substream(static_cast<uint64_t>(i));
        int len = 1 + static_cast<int>(per_sample.below(0, static_cast<uint64_t>(max_len)));
        std::vector<int> label(static_cast<size_t>(len));
        for (int j = 0; j < len; ++j)
            label[static_cast<size_t>(j)] = static_cast<int>(
                per_sample.below(1 + static_cast<uint64_t>(j), static_cast<uint64_t>(alphabet.glyph_count)));
        d.samples.push_back(render_sample(alphabet, label, style, per_sample.substream(99).key(), max_len));
    }
    return d;
}

} // namespace

std::pair<Dataset, Dataset> build_domain(const Alphabet& alphabet, const DomainStyle& style,
                                         int n_train, int n_test, uint64_t seed, int max_len) {
    if (n_train < 1 || n_test < 1) throw std::invalid_argument("build_domain: counts must be >= 1");
    style.validate();
    RngStream root(seed);
    Dataset train = generate_split(alphabet, style, n_train, root.substream(0), seed, Split::train, max_len);
    Dataset test = generate_split(alphabet, style, n_test, root.substream(1), seed, Split::test, max_len);
    return {std::move(train), std::move(test)};
}

Dataset subsample(const Dataset& dataset, double fraction, uint64_t seed) {
    if (!(fraction > 0.0) || fraction > 1.0)
        throw std::invalid_argument("subsample: fraction must be in (0, 1]");
    size_t n = dataset.samples.size();
    size_t take = static_cast<size_t>(std::ceil(fraction * static_cast<double>(n)));

    // one seeded permutation; every fraction takes a prefix, so subsets nest
    std::vector<size_t> perm(n);
    for (size_t i = 0; i < n; ++i) perm[i] = i;
    RngStream stream(seed);
    for (size_t i = n; i > 1; --i) {
        size_t j = stream.below(i, i);
        std::swap(perm[i - 1], perm[j]);
    }

    // keep selected samples in original dataset order so fraction = 1 is the
    // identity; nesting across fractions still holds via the shared prefix
    std::vector<size_t> pick(perm.begin(), perm.begin() + static_cast<ptrdiff_t>(take));
    std::sort(pick.begin(), pick.end());

    Dataset out = dataset;
    out.samples.clear();
    out.samples.reserve(take);
    for (size_t idx : pick) out.samples.push_back(dataset.samples[idx]);
    return out;
}

Dataset pool_datasets(const std::vector<Dataset>& parts) {
    if (parts.empty()) throw std::invalid_argument("pool_datasets: empty list");
    Dataset out = parts.front();
    out.alphabet_id = parts.front().alphabet_id + "+pooled";
    for (size_t i = 1; i < parts.size(); ++i) {
        if (parts[i].glyph_count != out.glyph_count)
            throw std::invalid_argument("pool_datasets: glyph_count mismatch");
        out.samples.insert(out.samples.end(), parts[i].samples.begin(), parts[i].samples.end());
    }
    return out;
}

namespace {

template <typename T>
void write_le(std::ostream& os, T v) {
    uint8_t b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    uint8_t b[sizeof(T)];
    is.read(reinterpret_cast<char*>(b), sizeof(T));
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

} // namespace

void write_glyf(const Dataset& dataset, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_glyf: cannot open " + path);
    os.write("GLYF", 4);
    write_le<uint16_t>(os, 1);  // version
    write_le<uint16_t>(os, static_cast<uint16_t>(kImageHeight));
    write_le<uint32_t>(os, static_cast<uint32_t>(dataset.samples.size()));
    for (const Sample& s : dataset.samples) {
        write_le<uint16_t>(os, static_cast<uint16_t>(s.image.width));
        write_le<uint8_t>(os, static_cast<uint8_t>(s.label.size()));
        for (int c : s.label) write_le<uint8_t>(os, static_cast<uint8_t>(c));
        for (double p : s.image.pixels)
            write_le<uint8_t>(os, static_cast<uint8_t>(std::lround(std::clamp(p, 0.0, 1.0) * 255.0)));
    }
    if (!os) throw std::runtime_error("write_glyf: write failed for " + path);
}

Dataset read_glyf(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_glyf: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "GLYF", 4) != 0) throw std::runtime_error("read_glyf: bad magic");
    uint16_t version = read_le<uint16_t>(is);
    if (version != 1) throw std::runtime_error("read_glyf: unsupported version");
    uint16_t height = read_le<uint16_t>(is);
    uint32_t count = read_le<uint32_t>(is);
    Dataset d;
    d.samples.reserve(count);
    int max_class = -1;
    for (uint32_t i = 0; i < count; ++i) {
        Sample s;
        s.image.height = height;
        s.image.width = read_le<uint16_t>(is);
        uint8_t label_len = read_le<uint8_t>(is);
        s.label.resize(label_len);
        for (uint8_t j = 0; j < label_len; ++j) {
            s.label[j] = read_le<uint8_t>(is);
            max_class = std::max(max_class, s.label[j]);
        }
        size_t npx = static_cast<size_t>(height) * s.image.width;
        s.image.pixels.resize(npx);
        for (size_t j = 0; j < npx; ++j) s.image.pixels[j] = read_le<uint8_t>(is) / 255.0;
        d.samples.push_back(std::move(s));
        if (!is) throw std::runtime_error("read_glyf: truncated file");
    }
    d.glyph_count = max_class + 1;
    return d;
}

} // namespace mergelab
