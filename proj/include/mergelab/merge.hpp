#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mergelab/model.hpp"
#include "mergelab/trainer.hpp"

namespace mergelab {

struct TaskVector {
    std::vector<double> delta;  // theta_ft - theta_0
    Digest256 spec_hash{};
    std::string source_tag;
    int round = 0;

    double norm() const;
};

struct FilterConfig {
    double threshold = 0.10;  // on |cos|
};

struct MergePlan {
    std::vector<std::string> node_ids;  // defines N and reduction order
    int rounds = 1;                     // T
    int epochs_per_round = 1;           // k
    std::optional<FilterConfig> filter;

    void validate() const;
};

TaskVector task_vector(const ParamVector& theta_ft, const ParamVector& theta_0,
                       const std::string& tag, int round = 0);

// Eq.-style uniform merge: theta_0 + (1/N) sum tau_n, summed in list order.
ParamVector average_merge(const ParamVector& theta_0, const std::vector<TaskVector>& taus);

std::vector<std::vector<double>> cosine_matrix(const std::vector<TaskVector>& taus);

struct FilterAudit {
    std::vector<size_t> kept;
    std::vector<size_t> dropped;  // in drop order
    std::vector<std::vector<double>> matrix;
};

// Greedy: while any kept pair has |cos| > threshold, drop the vector with
// the largest mean |off-diagonal cos| (ties -> lexicographically smallest tag).
FilterAudit orthogonality_filter(const std::vector<TaskVector>& taus, double threshold);

struct RoundRecord {
    int round = 0;
    std::vector<double> tau_norms;
    std::vector<std::vector<double>> cosines;  // empty when N < 2
    std::vector<size_t> kept;
    std::vector<size_t> dropped;
    std::string merged_digest;
    uint64_t steps = 0;  // total optimizer steps across nodes this round
};

struct MetaRoundResult {
    ParamVector theta;
    std::vector<TaskVector> taus;
    uint64_t steps = 0;
};

// One federated round: independent k-epoch updates from theta_t on every
// domain, then uniform task-vector averaging. `workers` bounds the fan-out;
// results are identical for any worker count.
MetaRoundResult meta_round(const ParamVector& theta_t, const std::vector<Dataset>& domains,
                           int k, const TrainConfig& cfg, const ModelSpec& spec,
                           int workers = 1, int round_index = 0,
                           const std::optional<FilterConfig>& filter = std::nullopt);

struct MetaTrainResult {
    ParamVector theta;
    std::vector<RoundRecord> round_log;
};

MetaTrainResult meta_train(const ParamVector& theta_0, const std::vector<Dataset>& domains,
                           const MergePlan& plan, const TrainConfig& cfg, const ModelSpec& spec,
                           int workers = 1);

} // namespace mergelab
