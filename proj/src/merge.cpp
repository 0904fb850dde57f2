#include "mergelab/merge.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <stdexcept>

#include "mergelab/checkpoint.hpp"
#include "mergelab/rng.hpp"

namespace mergelab {

double TaskVector::norm() const {
    double s = 0.0;
    for (double d : delta) s += d * d;
    return std::sqrt(s);
}

void MergePlan::validate() const {
    if (node_ids.empty()) throw std::invalid_argument("MergePlan: need at least one node");
    if (rounds < 1) throw std::invalid_argument("MergePlan: rounds must be >= 1");
    if (epochs_per_round < 1) throw std::invalid_argument("MergePlan: epochs_per_round must be >= 1");
    if (filter && (!(filter->threshold > 0.0) || filter->threshold > 1.0))
        throw std::invalid_argument("MergePlan: filter threshold must be in (0, 1]");
}

TaskVector task_vector(const ParamVector& theta_ft, const ParamVector& theta_0,
                       const std::string& tag, int round) {
    if (theta_ft.spec_hash != theta_0.spec_hash)
        throw std::invalid_argument("task_vector: spec hash mismatch");
    if (theta_ft.values.size() != theta_0.values.size())
        throw std::invalid_argument("task_vector: length mismatch");
    TaskVector tau;
    tau.spec_hash = theta_0.spec_hash;
    tau.source_tag = tag;
    tau.round = round;
    tau.delta.resize(theta_0.values.size());
    for (size_t i = 0; i < tau.delta.size(); ++i)
        tau.delta[i] = theta_ft.values[i] - theta_0.values[i];
    return tau;
}

ParamVector average_merge(const ParamVector& theta_0, const std::vector<TaskVector>& taus) {
    if (taus.empty()) throw std::invalid_argument("average_merge: empty task vector list");
    for (const TaskVector& tau : taus) {
        if (tau.spec_hash != theta_0.spec_hash)
            throw std::invalid_argument("average_merge: spec hash mismatch for tag " + tau.source_tag);
        if (tau.delta.size() != theta_0.values.size())
            throw std::invalid_argument("average_merge: length mismatch for tag " + tau.source_tag);
    }
    ParamVector out = theta_0;
    // identical task vectors average to themselves; take that path exactly
    // instead of round-tripping through sum/N
    bool all_equal = true;
    for (size_t n = 1; n < taus.size() && all_equal; ++n)
        all_equal = taus[n].delta == taus[0].delta;
    if (all_equal) {
        for (size_t i = 0; i < out.values.size(); ++i) out.values[i] += taus[0].delta[i];
    } else {
        const double inv_n = 1.0 / static_cast<double>(taus.size());
        for (size_t i = 0; i < out.values.size(); ++i) {
            double acc = 0.0;
            for (const TaskVector& tau : taus) acc += tau.delta[i];  // fixed node order
            out.values[i] += inv_n * acc;
        }
    }
    check_finite(out, "average_merge");
    return out;
}

std::vector<std::vector<double>> cosine_matrix(const std::vector<TaskVector>& taus) {
    const size_t n = taus.size();
    if (n < 2) throw std::invalid_argument("cosine_matrix: need at least two task vectors");
    std::vector<double> norms(n);
    for (size_t i = 0; i < n; ++i) {
        norms[i] = taus[i].norm();
        if (norms[i] == 0.0)
            throw std::invalid_argument("cosine_matrix: zero-norm task vector '" + taus[i].source_tag + "'");
    }
    std::vector<std::vector<double>> c(n, std::vector<double>(n, 1.0));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            double dot = 0.0;
            for (size_t k = 0; k < taus[i].delta.size(); ++k) dot += taus[i].delta[k] * taus[j].delta[k];
            c[i][j] = c[j][i] = dot / (norms[i] * norms[j]);
        }
    return c;
}

FilterAudit orthogonality_filter(const std::vector<TaskVector>& taus, double threshold) {
    FilterAudit audit;
    audit.matrix = cosine_matrix(taus);
    std::vector<size_t> kept(taus.size());
    for (size_t i = 0; i < kept.size(); ++i) kept[i] = i;

    while (kept.size() > 1) {
        bool violation = false;
        for (size_t a = 0; a < kept.size() && !violation; ++a)
            for (size_t b = a + 1; b < kept.size(); ++b)
                // 1e-12 slack so exactly-colinear pairs trip a threshold of 1.0
                if (std::abs(audit.matrix[kept[a]][kept[b]]) > threshold - 1e-12) { violation = true; break; }
        if (!violation) break;

        size_t worst = kept[0];
        double worst_mean = -1.0;
        for (size_t idx : kept) {
            double mean = 0.0;
            for (size_t other : kept)
                if (other != idx) mean += std::abs(audit.matrix[idx][other]);
            mean /= static_cast<double>(kept.size() - 1);
            if (mean > worst_mean ||
                (mean == worst_mean && taus[idx].source_tag < taus[worst].source_tag)) {
                worst_mean = mean;
                worst = idx;
            }
        }
        audit.dropped.push_back(worst);
        kept.erase(std::find(kept.begin(), kept.end(), worst));
    }
    audit.kept = std::move(kept);
    return audit;
}

MetaRoundResult meta_round(const ParamVector& theta_t, const std::vector<Dataset>& domains,
                           int k, const TrainConfig& cfg, const ModelSpec& spec, int workers,
                           int round_index, const std::optional<FilterConfig>& filter) {
    if (domains.empty()) throw std::invalid_argument("meta_round: need at least one domain");
    TrainConfig node_cfg = cfg;
    node_cfg.epochs = k;

    const size_t n = domains.size();
    std::vector<TrainResult> results(n);
    std::vector<std::string> errors(n);

    auto run_node = [&](size_t i) {
        try {
            results[i] = update(domains[i], theta_t, node_cfg, spec);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    };

    if (workers <= 1 || n == 1) {
        for (size_t i = 0; i < n; ++i) run_node(i);
    } else {
        // bounded fan-out; each node writes only its own slot
        size_t pool = std::min<size_t>(static_cast<size_t>(workers), n);
        std::vector<std::future<void>> futs;
        std::atomic<size_t> next{0};
        for (size_t w = 0; w < pool; ++w)
            futs.push_back(std::async(std::launch::async, [&] {
                for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) run_node(i);
            }));
        for (auto& f : futs) f.get();
    }

    for (size_t i = 0; i < n; ++i)
        if (!errors[i].empty())
            throw std::runtime_error("meta_round: node " + std::to_string(i) + " (" +
                                     domains[i].alphabet_id + ") failed: " + errors[i]);

    MetaRoundResult out;
    out.taus.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        out.taus.push_back(task_vector(results[i].params, theta_t,
                                       domains[i].alphabet_id + "#" + std::to_string(i), round_index));
        out.steps += results[i].steps;
    }

    std::vector<size_t> merged_idx(n);
    for (size_t i = 0; i < n; ++i) merged_idx[i] = i;
    if (filter && n >= 2) merged_idx = orthogonality_filter(out.taus, filter->threshold).kept;

    if (merged_idx.size() == 1) {
        // single surviving node: Eq. (1) reduces to that node's update,
        // returned bit-exactly rather than via theta + (theta_n - theta)
        out.theta = results[merged_idx[0]].params;
    } else {
        std::vector<TaskVector> merged;
        for (size_t idx : merged_idx) merged.push_back(out.taus[idx]);
        out.theta = average_merge(theta_t, merged);
    }
    return out;
}

MetaTrainResult meta_train(const ParamVector& theta_0, const std::vector<Dataset>& domains,
                           const MergePlan& plan, const TrainConfig& cfg, const ModelSpec& spec,
                           int workers) {
    plan.validate();
    if (plan.node_ids.size() != domains.size())
        throw std::invalid_argument("meta_train: node_ids/domains size mismatch");

    MetaTrainResult out;
    out.theta = theta_0;
    for (int t = 0; t < plan.rounds; ++t) {
        TrainConfig round_cfg = cfg;
        // fresh optimizer state per round is implicit (update starts fresh);
        // round-distinct shuffle streams keep batch orders independent
        round_cfg.shuffle_seed = rng::hash_combine(cfg.shuffle_seed, static_cast<uint64_t>(t));
        MetaRoundResult r = meta_round(out.theta, domains, plan.epochs_per_round, round_cfg, spec,
                                       workers, t, plan.filter);

        RoundRecord rec;
        rec.round = t;
        rec.steps = r.steps;
        for (const TaskVector& tau : r.taus) rec.tau_norms.push_back(tau.norm());
        if (r.taus.size() >= 2) rec.cosines = cosine_matrix(r.taus);
        if (plan.filter && r.taus.size() >= 2) {
            FilterAudit audit = orthogonality_filter(r.taus, plan.filter->threshold);
            rec.kept = audit.kept;
            rec.dropped = audit.dropped;
        } else {
            for (size_t i = 0; i < r.taus.size(); ++i) rec.kept.push_back(i);
        }
        rec.merged_digest = checkpoint_digest(r.theta);
        out.round_log.push_back(std::move(rec));
        out.theta = std::move(r.theta);
    }
    return out;
}

} // namespace mergelab
