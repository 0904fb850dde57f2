#include "mergelab/ctc.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace mergelab {

namespace {

constexpr double kLogZero = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
    if (a == kLogZero) return b;
    if (b == kLogZero) return a;
    double hi = std::max(a, b), lo = std::min(a, b);
    return hi + std::log1p(std::exp(lo - hi));
}

} // namespace

int ctc_min_frames(const std::vector<int>& label) {
    int repeats = 0;
    for (size_t i = 1; i < label.size(); ++i)
        if (label[i] == label[i - 1]) ++repeats;
    return static_cast<int>(label.size()) + repeats;
}

CtcResult ctc_loss(const LogitsSequence& logits, const std::vector<int>& label) {
    const int F = logits.frames;
    const int C = logits.num_classes;
    const int L = static_cast<int>(label.size());
    if (L < 1) throw std::invalid_argument("ctc_loss: empty label");
    for (int c : label)
        if (c <= kCtcBlank || c >= C) throw std::invalid_argument("ctc_loss: label class out of range");
    if (F < ctc_min_frames(label))
        throw std::invalid_argument("ctc_loss: label infeasible, needs " +
                                    std::to_string(ctc_min_frames(label)) + " frames but got " +
                                    std::to_string(F));

    // blanks interleaved: length 2L+1, even positions blank
    const int S = 2 * L + 1;
    std::vector<int> ext(static_cast<size_t>(S), kCtcBlank);
    for (int i = 0; i < L; ++i) ext[static_cast<size_t>(2 * i + 1)] = label[static_cast<size_t>(i)];

    // per-frame log-softmax
    std::vector<double> logp(static_cast<size_t>(F) * C);
    for (int f = 0; f < F; ++f) {
        double mx = logits.at(f, 0);
        for (int c = 1; c < C; ++c) mx = std::max(mx, logits.at(f, c));
        double z = 0.0;
        for (int c = 0; c < C; ++c) z += std::exp(logits.at(f, c) - mx);
        double logz = mx + std::log(z);
        for (int c = 0; c < C; ++c) logp[static_cast<size_t>(f) * C + c] = logits.at(f, c) - logz;
    }
    auto lp = [&](int f, int s) { return logp[static_cast<size_t>(f) * C + ext[static_cast<size_t>(s)]]; };

    std::vector<double> alpha(static_cast<size_t>(F) * S, kLogZero);
    std::vector<double> beta(static_cast<size_t>(F) * S, kLogZero);
    auto A = [&](int f, int s) -> double& { return alpha[static_cast<size_t>(f) * S + s]; };
    auto B = [&](int f, int s) -> double& { return beta[static_cast<size_t>(f) * S + s]; };

    A(0, 0) = lp(0, 0);
    if (S > 1) A(0, 1) = lp(0, 1);
    for (int f = 1; f < F; ++f) {
        for (int s = 0; s < S; ++s) {
            double acc = A(f - 1, s);
            if (s >= 1) acc = log_add(acc, A(f - 1, s - 1));
            if (s >= 2 && ext[static_cast<size_t>(s)] != kCtcBlank &&
                ext[static_cast<size_t>(s)] != ext[static_cast<size_t>(s - 2)])
                acc = log_add(acc, A(f - 1, s - 2));
            A(f, s) = acc == kLogZero ? kLogZero : acc + lp(f, s);
        }
    }

    B(F - 1, S - 1) = 0.0;
    if (S > 1) B(F - 1, S - 2) = 0.0;
    for (int f = F - 2; f >= 0; --f) {
        for (int s = S - 1; s >= 0; --s) {
            double acc = B(f + 1, s) == kLogZero ? kLogZero : B(f + 1, s) + lp(f + 1, s);
            if (s + 1 < S && B(f + 1, s + 1) != kLogZero)
                acc = log_add(acc, B(f + 1, s + 1) + lp(f + 1, s + 1));
            if (s + 2 < S && ext[static_cast<size_t>(s + 2)] != kCtcBlank &&
                ext[static_cast<size_t>(s + 2)] != ext[static_cast<size_t>(s)] &&
                B(f + 1, s + 2) != kLogZero)
                acc = log_add(acc, B(f + 1, s + 2) + lp(f + 1, s + 2));
            B(f, s) = acc;
        }
    }

    double log_lik = log_add(A(F - 1, S - 1), S > 1 ? A(F - 1, S - 2) : kLogZero);
    if (log_lik == kLogZero || std::isnan(log_lik))
        throw std::runtime_error("ctc_loss: zero-probability label (numerical failure)");

    CtcResult out;
    out.loss = -log_lik;

    // d(-log p)/d(logit_{f,c}) = softmax(f,c) - posterior(f,c)
    out.grad_logits.assign(static_cast<size_t>(F) * C, 0.0);
    for (int f = 0; f < F; ++f) {
        std::vector<double> post(static_cast<size_t>(C), kLogZero);
        for (int s = 0; s < S; ++s) {
            if (A(f, s) == kLogZero || B(f, s) == kLogZero) continue;
            int c = ext[static_cast<size_t>(s)];
            post[static_cast<size_t>(c)] = log_add(post[static_cast<size_t>(c)], A(f, s) + B(f, s));
        }
        for (int c = 0; c < C; ++c) {
            double p = std::exp(logp[static_cast<size_t>(f) * C + c]);
            double q = post[static_cast<size_t>(c)] == kLogZero
                           ? 0.0
                           : std::exp(post[static_cast<size_t>(c)] - log_lik);
            out.grad_logits[static_cast<size_t>(f) * C + c] = p - q;
        }
    }
    return out;
}

std::vector<int> greedy_decode(const LogitsSequence& logits) {
    std::vector<int> out;
    int prev = -1;
    for (int f = 0; f < logits.frames; ++f) {
        int best = 0;
        for (int c = 1; c < logits.num_classes; ++c)
            if (logits.at(f, c) > logits.at(f, best)) best = c;
        if (best != prev && best != kCtcBlank) out.push_back(best);
        prev = best;
    }
    return out;
}

} // namespace mergelab
