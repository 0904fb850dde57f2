#include "mergelab/model.hpp"

#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "mergelab/ctc.hpp"
#include "mergelab/rng.hpp"

namespace mergelab {

void ModelSpec::validate() const {
    if (conv_channels.empty()) throw std::invalid_argument("ModelSpec: need at least one conv stage");
    for (int c : conv_channels)
        if (c < 1) throw std::invalid_argument("ModelSpec: conv channels must be positive");
    if (hidden_dim < 1) throw std::invalid_argument("ModelSpec: hidden_dim must be positive");
    if (num_classes < 3) throw std::invalid_argument("ModelSpec: num_classes must be >= 3 (2 glyphs + blank)");
    if (kImageHeight % downsample_factor() != 0 || pooled_height() < 1)
        throw std::invalid_argument("ModelSpec: too many conv stages for height " +
                                    std::to_string(kImageHeight));
}

std::string ModelSpec::describe() const {
    std::ostringstream os;
    os << "conv3x3-pool2[";
    for (size_t i = 0; i < conv_channels.size(); ++i) os << (i ? "," : "") << conv_channels[i];
    os << "];hidden=" << hidden_dim << ";classes=" << num_classes << ";h=" << kImageHeight;
    return os.str();
}

Digest256 ModelSpec::layout_hash() const { return Sha256::digest(describe()); }

std::vector<LayoutEntry> param_layout(const ModelSpec& spec) {
    std::vector<LayoutEntry> layout;
    size_t offset = 0;
    auto add = [&](const std::string& name, std::vector<int> shape) {
        size_t sz = 1;
        for (int d : shape) sz *= static_cast<size_t>(d);
        layout.push_back({name, offset, std::move(shape), sz});
        offset += sz;
    };
    int in_ch = 1;
    for (size_t l = 0; l < spec.conv_channels.size(); ++l) {
        int out_ch = spec.conv_channels[l];
        add("conv" + std::to_string(l) + ".w", {out_ch, in_ch, 3, 3});
        add("conv" + std::to_string(l) + ".b", {out_ch});
        in_ch = out_ch;
    }
    add("hidden.w", {spec.hidden_dim, spec.frame_feature_dim()});
    add("hidden.b", {spec.hidden_dim});
    add("out.w", {spec.num_classes, spec.hidden_dim});
    add("out.b", {spec.num_classes});
    return layout;
}

size_t param_count(const ModelSpec& spec) {
    auto layout = param_layout(spec);
    return layout.back().offset + layout.back().size;
}

ParamVector init_model(const ModelSpec& spec, uint64_t seed) {
    spec.validate();
    auto layout = param_layout(spec);
    ParamVector p;
    p.spec_hash = spec.layout_hash();
    p.values.assign(param_count(spec), 0.0);
    RngStream root(seed);
    for (size_t l = 0; l < layout.size(); ++l) {
        const LayoutEntry& e = layout[l];
        if (e.name.ends_with(".b")) continue;  // biases stay zero
        // uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]
        size_t fan_in = 1;
        for (size_t d = 1; d < e.shape.size(); ++d) fan_in *= static_cast<size_t>(e.shape[d]);
        double limit = 1.0 / std::sqrt(static_cast<double>(fan_in));
        RngStream stream = root.substream(l);
        for (size_t i = 0; i < e.size; ++i)
            p.values[e.offset + i] = limit * (2.0 * stream.uniform(i) - 1.0);
    }
    return p;
}

void check_finite(const ParamVector& params, const std::string& context) {
    for (size_t i = 0; i < params.values.size(); ++i)
        if (!std::isfinite(params.values[i]))
            throw std::runtime_error(context + ": non-finite parameter at index " + std::to_string(i));
}

namespace {

// Channel-major feature map: data[c][r][w] at c*(h*w) + r*w + col.
struct FeatureMap {
    int channels = 0, height = 0, width = 0;
    std::vector<double> data;

    void resize(int c, int h, int w, double fill = 0.0) {
        channels = c; height = h; width = w;
        data.assign(static_cast<size_t>(c) * h * w, fill);
    }
    double& at(int c, int r, int w_) { return data[(static_cast<size_t>(c) * height + r) * width + w_]; }
    double at(int c, int r, int w_) const { return data[(static_cast<size_t>(c) * height + r) * width + w_]; }
};

struct StageTrace {
    FeatureMap pre_act;    // conv output + bias, before relu
    FeatureMap pooled;     // after relu + maxpool
    std::vector<int> argmax;  // per pooled cell: linear index into pre-pool map
};

struct Trace {
    FeatureMap input;
    std::vector<StageTrace> stages;
    std::vector<double> hidden_pre;  // frames x hidden_dim
    LogitsSequence logits;
};

void conv3x3(const FeatureMap& in, const double* w, const double* b, int out_ch, FeatureMap& out) {
    out.resize(out_ch, in.height, in.width);
    for (int oc = 0; oc < out_ch; ++oc) {
        for (int r = 0; r < in.height; ++r) {
            for (int c = 0; c < in.width; ++c) {
                double acc = b[oc];
                for (int ic = 0; ic < in.channels; ++ic) {
                    const double* wk = w + ((static_cast<size_t>(oc) * in.channels + ic) * 9);
                    for (int kr = -1; kr <= 1; ++kr) {
                        int rr = r + kr;
                        if (rr < 0 || rr >= in.height) continue;
                        for (int kc = -1; kc <= 1; ++kc) {
                            int cc = c + kc;
                            if (cc < 0 || cc >= in.width) continue;
                            acc += wk[(kr + 1) * 3 + (kc + 1)] * in.at(ic, rr, cc);
                        }
                    }
                }
                out.at(oc, r, c) = acc;
            }
        }
    }
}

// ReLU then 2x2 max pool; records the winning pre-pool cell for backprop.
void relu_pool(const FeatureMap& pre, FeatureMap& out, std::vector<int>& argmax) {
    int oh = pre.height / 2, ow = pre.width / 2;
    out.resize(pre.channels, oh, ow);
    argmax.assign(out.data.size(), -1);
    size_t oi = 0;
    for (int c = 0; c < pre.channels; ++c)
        for (int r = 0; r < oh; ++r)
            for (int w = 0; w < ow; ++w, ++oi) {
                double best = -1.0;
                int best_idx = -1;
                for (int dr = 0; dr < 2; ++dr)
                    for (int dc = 0; dc < 2; ++dc) {
                        size_t idx = (static_cast<size_t>(c) * pre.height + 2 * r + dr) * pre.width +
                                     (2 * w + dc);
                        double v = std::max(0.0, pre.data[idx]);
                        if (v > best) { best = v; best_idx = static_cast<int>(idx); }
                    }
                out.data[oi] = best;
                argmax[oi] = best_idx;
            }
}

Trace run_forward(const ModelSpec& spec, const ParamVector& params, const Image& image) {
    if (image.height != kImageHeight)
        throw std::invalid_argument("forward: image height must be " + std::to_string(kImageHeight));
    if (params.spec_hash != spec.layout_hash())
        throw std::invalid_argument("forward: params/spec hash mismatch");
    if (params.values.size() != param_count(spec))
        throw std::invalid_argument("forward: params size mismatch");

    auto layout = param_layout(spec);
    auto block = [&](size_t idx) { return params.values.data() + layout[idx].offset; };

    Trace t;
    t.input.resize(1, image.height, image.width);
    std::copy(image.pixels.begin(), image.pixels.end(), t.input.data.begin());

    const FeatureMap* cur = &t.input;
    t.stages.resize(spec.conv_channels.size());
    for (size_t l = 0; l < spec.conv_channels.size(); ++l) {
        StageTrace& st = t.stages[l];
        conv3x3(*cur, block(2 * l), block(2 * l + 1), spec.conv_channels[l], st.pre_act);
        relu_pool(st.pre_act, st.pooled, st.argmax);
        cur = &st.pooled;
    }

    const int F = cur->width;
    if (F < 1) throw std::invalid_argument("forward: image too narrow, no frames after pooling");
    const int feat = spec.frame_feature_dim();
    const int H = spec.hidden_dim;
    const int C = spec.num_classes;
    const size_t hw_idx = 2 * spec.conv_channels.size();
    const double* hw = block(hw_idx);
    const double* hb = block(hw_idx + 1);
    const double* ow = block(hw_idx + 2);
    const double* ob = block(hw_idx + 3);

    t.hidden_pre.assign(static_cast<size_t>(F) * H, 0.0);
    t.logits.frames = F;
    t.logits.num_classes = C;
    t.logits.data.assign(static_cast<size_t>(F) * C, 0.0);

    for (int f = 0; f < F; ++f) {
        // column f flattened channel-major: (channel, row)
        for (int h = 0; h < H; ++h) {
            double acc = hb[h];
            const double* wrow = hw + static_cast<size_t>(h) * feat;
            int k = 0;
            for (int c = 0; c < cur->channels; ++c)
                for (int r = 0; r < cur->height; ++r, ++k) acc += wrow[k] * cur->at(c, r, f);
            t.hidden_pre[static_cast<size_t>(f) * H + h] = acc;
        }
        for (int c = 0; c < C; ++c) {
            double acc = ob[c];
            const double* wrow = ow + static_cast<size_t>(c) * H;
            for (int h = 0; h < H; ++h)
                acc += wrow[h] * std::max(0.0, t.hidden_pre[static_cast<size_t>(f) * H + h]);
            t.logits.at(f, c) = acc;
        }
    }
    return t;
}

// Accumulates d(loss)/d(params) for one sample given d(loss)/d(logits).
void backprop_sample(const ModelSpec& spec, const ParamVector& params, const Trace& t,
                     const std::vector<double>& grad_logits, std::vector<double>& grad) {
    auto layout = param_layout(spec);
    auto block = [&](size_t idx) { return params.values.data() + layout[idx].offset; };
    auto gblock = [&](size_t idx) { return grad.data() + layout[idx].offset; };

    const int F = t.logits.frames;
    const int C = spec.num_classes;
    const int H = spec.hidden_dim;
    const int feat = spec.frame_feature_dim();
    const size_t hw_idx = 2 * spec.conv_channels.size();
    const FeatureMap& top = t.stages.back().pooled;

    FeatureMap grad_top;
    grad_top.resize(top.channels, top.height, top.width);

    std::vector<double> grad_hidden(static_cast<size_t>(H));
    for (int f = 0; f < F; ++f) {
        const double* gl = grad_logits.data() + static_cast<size_t>(f) * C;
        // output layer
        for (int c = 0; c < C; ++c) {
            gblock(hw_idx + 3)[c] += gl[c];
            double* gw = gblock(hw_idx + 2) + static_cast<size_t>(c) * H;
            for (int h = 0; h < H; ++h)
                gw[h] += gl[c] * std::max(0.0, t.hidden_pre[static_cast<size_t>(f) * H + h]);
        }
        // into hidden pre-activation
        for (int h = 0; h < H; ++h) {
            double g = 0.0;
            if (t.hidden_pre[static_cast<size_t>(f) * H + h] > 0.0) {
                const double* ow = block(hw_idx + 2);
                for (int c = 0; c < C; ++c) g += gl[c] * ow[static_cast<size_t>(c) * H + h];
            }
            grad_hidden[static_cast<size_t>(h)] = g;
        }
        // hidden layer weights and input (top feature column) grads
        for (int h = 0; h < H; ++h) {
            double g = grad_hidden[static_cast<size_t>(h)];
            if (g == 0.0) continue;
            gblock(hw_idx + 1)[h] += g;
            double* gw = gblock(hw_idx) + static_cast<size_t>(h) * feat;
            const double* wrow = block(hw_idx) + static_cast<size_t>(h) * feat;
            int k = 0;
            for (int c = 0; c < top.channels; ++c)
                for (int r = 0; r < top.height; ++r, ++k) {
                    gw[k] += g * top.at(c, r, f);
                    grad_top.at(c, r, f) += g * wrow[k];
                }
        }
    }

    // conv stages, top down
    FeatureMap grad_pooled = std::move(grad_top);
    for (int l = static_cast<int>(spec.conv_channels.size()) - 1; l >= 0; --l) {
        const StageTrace& st = t.stages[static_cast<size_t>(l)];
        const FeatureMap& below = (l == 0) ? t.input : t.stages[static_cast<size_t>(l) - 1].pooled;

        // unpool + relu gate into the pre-activation map
        FeatureMap grad_pre;
        grad_pre.resize(st.pre_act.channels, st.pre_act.height, st.pre_act.width);
        for (size_t i = 0; i < grad_pooled.data.size(); ++i) {
            int idx = st.argmax[i];
            if (idx >= 0 && st.pre_act.data[static_cast<size_t>(idx)] > 0.0)
                grad_pre.data[static_cast<size_t>(idx)] += grad_pooled.data[i];
        }

        FeatureMap grad_below;
        grad_below.resize(below.channels, below.height, below.width);
        const double* w = block(2 * static_cast<size_t>(l));
        double* gw = gblock(2 * static_cast<size_t>(l));
        double* gb = gblock(2 * static_cast<size_t>(l) + 1);
        for (int oc = 0; oc < grad_pre.channels; ++oc) {
            for (int r = 0; r < grad_pre.height; ++r) {
                for (int c = 0; c < grad_pre.width; ++c) {
                    double g = grad_pre.at(oc, r, c);
                    if (g == 0.0) continue;
                    gb[oc] += g;
                    for (int ic = 0; ic < below.channels; ++ic) {
                        size_t wbase = (static_cast<size_t>(oc) * below.channels + ic) * 9;
                        for (int kr = -1; kr <= 1; ++kr) {
                            int rr = r + kr;
                            if (rr < 0 || rr >= below.height) continue;
                            for (int kc = -1; kc <= 1; ++kc) {
                                int cc = c + kc;
                                if (cc < 0 || cc >= below.width) continue;
                                size_t wi = wbase + static_cast<size_t>((kr + 1) * 3 + (kc + 1));
                                gw[wi] += g * below.at(ic, rr, cc);
                                grad_below.at(ic, rr, cc) += g * w[wi];
                            }
                        }
                    }
                }
            }
        }
        grad_pooled = std::move(grad_below);
    }
}

} // namespace

LogitsSequence forward(const ModelSpec& spec, const ParamVector& params, const Image& image) {
    return run_forward(spec, params, image).logits;
}

std::pair<double, std::vector<double>> backward(const ModelSpec& spec, const ParamVector& params,
                                                const std::vector<Sample>& batch) {
    if (batch.empty()) throw std::invalid_argument("backward: empty batch");
    std::vector<double> grad(param_count(spec), 0.0);
    double total_loss = 0.0;
    for (size_t i = 0; i < batch.size(); ++i) {
        const Sample& s = batch[i];
        Trace t = run_forward(spec, params, s.image);
        // dataset labels are glyph indices; CTC classes shift by one for the blank
        std::vector<int> ctc_label(s.label.size());
        for (size_t j = 0; j < s.label.size(); ++j) ctc_label[j] = s.label[j] + 1;
        CtcResult r;
        try {
            r = ctc_loss(t.logits, ctc_label);
        } catch (const std::exception& e) {
            throw std::runtime_error("backward: sample " + std::to_string(i) + ": " + e.what());
        }
        total_loss += r.loss;
        backprop_sample(spec, params, t, r.grad_logits, grad);
    }
    double inv = 1.0 / static_cast<double>(batch.size());
    total_loss *= inv;
    for (double& g : grad) g *= inv;
    if (!std::isfinite(total_loss)) throw std::runtime_error("backward: non-finite loss");
    return {total_loss, std::move(grad)};
}

} // namespace mergelab
