#include "mergelab/eval.hpp"

#include <algorithm>
#include <stdexcept>

#include "mergelab/ctc.hpp"

namespace mergelab {

size_t levenshtein(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (size_t j = 1; j <= b.size(); ++j) {
            size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

std::vector<int> predict(const ModelSpec& spec, const ParamVector& params, const Image& image) {
    std::vector<int> decoded = greedy_decode(forward(spec, params, image));
    for (int& c : decoded) c -= 1;  // CTC class -> glyph index
    return decoded;
}

MetricsReport evaluate(const ModelSpec& spec, const ParamVector& params, const Dataset& dataset,
                       const std::string& dataset_id) {
    if (dataset.samples.empty()) throw std::invalid_argument("evaluate: empty dataset");
    MetricsReport r;
    r.dataset_id = dataset_id.empty() ? dataset.alphabet_id : dataset_id;
    r.n = dataset.samples.size();
    size_t exact = 0, edits = 0, ref_len = 0;
    for (const Sample& s : dataset.samples) {
        std::vector<int> pred = predict(spec, params, s.image);
        if (pred == s.label) ++exact;
        edits += levenshtein(pred, s.label);
        ref_len += s.label.size();
    }
    r.seq_accuracy = static_cast<double>(exact) / static_cast<double>(r.n);
    r.cer = static_cast<double>(edits) / static_cast<double>(ref_len);
    return r;
}

double sequence_accuracy(const ModelSpec& spec, const ParamVector& params, const Dataset& dataset) {
    return evaluate(spec, params, dataset).seq_accuracy;
}

double cer(const ModelSpec& spec, const ParamVector& params, const Dataset& dataset) {
    return evaluate(spec, params, dataset).cer;
}

} // namespace mergelab
