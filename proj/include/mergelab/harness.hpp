#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mergelab/merge.hpp"
#include "mergelab/plan.hpp"

#include "json.hpp"

namespace mergelab {

// Raised when a stored artifact no longer matches its recorded digest;
// maps to CLI exit code 4.
struct ProvenanceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One numeric result plus the provenance needed to re-derive it: which
// model (by payload digest) was scored on which dataset (by content digest).
struct ReportCell {
    std::string table;
    std::string row;   // model / regime id
    std::string col;   // test-set id, or a derived column such as "x_delta"
    std::string metric;
    double value = 0.0;
    std::string model_digest;
    std::string dataset_digest;
};

struct Report {
    std::string table;   // primary table name, used for file naming
    std::string plan_digest;
    nlohmann::json plan_json;
    std::vector<ReportCell> cells;
    std::vector<RoundRecord> rounds;                    // merge logs, all regimes
    std::map<std::string, ParamVector> checkpoints;     // name -> params
    std::map<std::string, std::string> dataset_digests; // recipe id -> digest
    std::vector<std::string> notes;                     // warnings, filter audit text
    nlohmann::json extra;                               // table-specific detail
};

// Bounded worker pool over [0, n); any worker-count gives identical results
// because each index writes only its own slot. First exception rethrown.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

// Shared context for the regime runners: materialized world plus the
// pretrained starting point theta_0 (trained once, reused everywhere).
struct Lab {
    ExperimentPlan plan;
    World world;
    ParamVector theta0;
    uint64_t pretrain_steps = 0;
    double pretrain_train_accuracy = 0.0;

    explicit Lab(const ExperimentPlan& plan, int workers = 1);
};

// Deterministic per-purpose seed derivation from the world seed.
uint64_t seed_for(uint64_t root, const std::string& purpose);

Report run_baseline_grid(Lab& lab, int workers);
Report run_merge_variants(Lab& lab, int workers);
Report run_transfer(Lab& lab, int workers);
Report run_tk_sweep(Lab& lab, int workers);
Report run_subsample_sweep(Lab& lab, int workers);
Report run_leave_one_out(Lab& lab, int workers);

// Writes report.csv, report.json, rounds.jsonl and ckpt/*.mmck under dir;
// the JSON carries the plan echo, digests, and per-cell provenance.
void save_report(const Report& report, const std::string& dir);
std::string report_csv(const Report& report);

// Re-derives every digest recorded under dir/report.json: checkpoint
// payloads from the .mmck files, dataset digests from the plan's recipes,
// and the plan digest itself. Throws ProvenanceError on any mismatch.
void verify_provenance(const std::string& dir);

} // namespace mergelab
