#include "mergelab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "mergelab/checkpoint.hpp"
#include "mergelab/eval.hpp"
#include "mergelab/sha256.hpp"

using nlohmann::json;

namespace mergelab {

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    if (n <= 0) return;
    workers = std::max(1, std::min(workers, n));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::mutex err_mu;
    std::exception_ptr first_error;
    auto body = [&] {
        for (;;) {
            int i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

uint64_t seed_for(uint64_t root, const std::string& purpose) {
    Digest256 d = Sha256::digest(purpose);
    uint64_t w = 0;
    for (int i = 0; i < 8; ++i) w |= static_cast<uint64_t>(d[i]) << (8 * i);
    return rng::hash_combine(root, w);
}

namespace {

std::string fmt_value(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

TrainConfig cfg_for(const ExperimentPlan& plan, int epochs, const std::string& purpose) {
    TrainConfig cfg = plan.train_config(epochs);
    cfg.shuffle_seed = seed_for(plan.world_seed, purpose);
    return cfg;
}

Report new_report(const Lab& lab, const std::string& table) {
    Report r;
    r.table = table;
    r.plan_json = plan_to_json(lab.plan);
    r.plan_digest = plan_digest(lab.plan);
    return r;
}

void add_cell(Report& r, const std::string& row, const std::string& col,
              const std::string& metric, double value, const std::string& model_digest = "",
              const std::string& ds_digest = "") {
    r.cells.push_back({r.table, row, col, metric, value, model_digest, ds_digest});
}

// Scores one model on one test set and appends accuracy + CER cells.
void add_eval(Report& r, const ModelSpec& spec, const std::string& row,
              const ParamVector& params, const Dataset& test) {
    std::string md = checkpoint_digest(params);
    std::string dd = dataset_digest(test);
    try {
        MetricsReport m = evaluate(spec, params, test, test.alphabet_id);
        add_cell(r, row, test.alphabet_id, "seq_accuracy", m.seq_accuracy, md, dd);
        add_cell(r, row, test.alphabet_id, "cer", m.cer, md, dd);
    } catch (const std::exception& e) {
        r.notes.push_back("cell hole: " + row + " x " + test.alphabet_id + ": " + e.what());
    }
}

std::vector<const Dataset*> grid_test_sets(const World& w) {
    std::vector<const Dataset*> sets{&w.z_test};
    for (const Dataset& d : w.source_test) sets.push_back(&d);
    for (const Dataset& d : w.ood_test) sets.push_back(&d);
    return sets;
}

// Per-domain fine-tunes from theta0 under the shared epoch budget; used by
// the baseline grid, the merge variants, and the leave-one-out ablation so
// their task vectors are byte-identical across tables.
std::vector<TrainResult> domain_finetunes(Lab& lab, int workers) {
    const auto& domains = lab.world.source_train;
    std::vector<TrainResult> out(domains.size());
    parallel_for(static_cast<int>(domains.size()), workers, [&](int i) {
        TrainConfig cfg =
            cfg_for(lab.plan, lab.plan.budgets.tk_product, "ft_" + domains[i].alphabet_id);
        out[i] = update(domains[i], lab.theta0, cfg, lab.world.spec);
    });
    return out;
}

MergePlan distributed_plan(const ExperimentPlan& plan, int rounds) {
    MergePlan mp;
    for (const DataRecipe& r : plan.source_domains) mp.node_ids.push_back(r.id);
    mp.rounds = rounds;
    mp.epochs_per_round = plan.budgets.tk_product / rounds;
    return mp;
}

struct TransferScore {
    ParamVector params;
    ModelSpec spec;
    double accuracy = 0.0;
};

// Fine-tunes seed params onto one target alphabet and scores the result.
TransferScore transfer_score(Lab& lab, const ParamVector& seed_params, size_t target_idx,
                             const std::string& purpose) {
    const Dataset& g_train = lab.world.target_train[target_idx];
    const Dataset& g_test = lab.world.target_test[target_idx];
    TrainConfig cfg = cfg_for(lab.plan, lab.plan.budgets.transfer_epochs,
                              purpose + "_" + g_train.alphabet_id);
    TransferResult tr = transfer_finetune(g_train, seed_params, lab.world.spec, cfg);
    TransferScore s;
    s.spec = tr.target_spec;
    s.accuracy = sequence_accuracy(tr.target_spec, tr.train.params, g_test);
    s.params = std::move(tr.train.params);
    return s;
}

json round_to_json(const RoundRecord& rr) {
    return {{"round", rr.round},         {"tau_norms", rr.tau_norms},
            {"cosines", rr.cosines},     {"kept", rr.kept},
            {"dropped", rr.dropped},     {"merged_digest", rr.merged_digest},
            {"steps", rr.steps}};
}

// Reference values of the full-scale configuration this desk setup scales
// down from; echoed in every report so deviations are explicit.
json full_scale_reference(const ExperimentPlan& plan) {
    return {{"lr", {{"ours", plan.lr}, {"reference", 1e-5}}},
            {"pretrain_epochs", {{"ours", plan.budgets.pretrain_epochs}, {"reference", 75}}},
            {"transfer_epochs", {{"ours", plan.budgets.transfer_epochs}, {"reference", 30}}},
            {"tk_product", {{"ours", plan.budgets.tk_product}, {"reference", 75}}},
            {"batch_size", {{"ours", plan.batch_size}, {"reference", 128}}},
            {"architecture",
             {{"ours", plan.model_spec().describe()},
              {"reference", "conv-recurrent column recognizer at production scale"}}}};
}

} // namespace

Lab::Lab(const ExperimentPlan& p, int workers) : plan(p) {
    (void)workers;
    plan.validate();
    world = materialize(plan);
    TrainConfig cfg = cfg_for(plan, plan.budgets.pretrain_epochs, "pretrain");
    TrainResult pre =
        pretrain_seed(world.z_train, world.spec, cfg, seed_for(plan.world_seed, "init"));
    theta0 = std::move(pre.params);
    pretrain_steps = pre.steps;
    pretrain_train_accuracy = sequence_accuracy(world.spec, theta0, world.z_train);
}

Report run_baseline_grid(Lab& lab, int workers) {
    Report r = new_report(lab, "baseline_grid");
    std::vector<std::pair<std::string, ParamVector>> models;
    models.emplace_back("zero_shot", lab.theta0);

    std::vector<TrainResult> fts = domain_finetunes(lab, workers);
    for (size_t i = 0; i < fts.size(); ++i)
        models.emplace_back("ft_" + lab.world.source_train[i].alphabet_id,
                            std::move(fts[i].params));

    Dataset pooled = pool_datasets(lab.world.source_train);
    pooled.alphabet_id = "pooled";
    TrainConfig pooled_cfg = cfg_for(lab.plan, lab.plan.budgets.tk_product, "ft_pooled");
    models.emplace_back("ft_pooled", update(pooled, lab.theta0, pooled_cfg, lab.world.spec).params);

    for (auto& [name, params] : models) {
        r.checkpoints[name] = params;
        for (const Dataset* test : grid_test_sets(lab.world))
            add_eval(r, lab.world.spec, name, params, *test);
    }
    return r;
}

Report run_merge_variants(Lab& lab, int workers) {
    Report r = new_report(lab, "merge_variants");
    const ModelSpec& spec = lab.world.spec;
    const auto& domains = lab.world.source_train;

    std::vector<TrainResult> fts = domain_finetunes(lab, workers);
    std::vector<TaskVector> taus;
    for (size_t i = 0; i < fts.size(); ++i)
        taus.push_back(task_vector(fts[i].params, lab.theta0, domains[i].alphabet_id));

    Dataset pooled = pool_datasets(domains);
    pooled.alphabet_id = "pooled";
    ParamVector ft_pooled =
        update(pooled, lab.theta0, cfg_for(lab.plan, lab.plan.budgets.tk_product, "ft_pooled"),
               spec)
            .params;

    // Group-level averaging: one node per pooled half of the domain list,
    // then task-vector averaging over the group models.
    std::vector<TaskVector> group_taus;
    size_t half = (domains.size() + 1) / 2;
    std::vector<std::pair<std::string, Dataset>> groups;
    if (domains.size() >= 2) {
        std::vector<Dataset> a(domains.begin(), domains.begin() + half);
        std::vector<Dataset> b(domains.begin() + half, domains.end());
        groups.emplace_back("groupA", pool_datasets(a));
        groups.emplace_back("groupB", pool_datasets(b));
    } else {
        groups.emplace_back("groupA", domains.front());
    }
    std::vector<TaskVector> gt(groups.size());
    parallel_for(static_cast<int>(groups.size()), workers, [&](int i) {
        TrainConfig cfg = cfg_for(lab.plan, lab.plan.budgets.tk_product, "ftg_" + groups[i].first);
        gt[i] = task_vector(update(groups[i].second, lab.theta0, cfg, spec).params, lab.theta0,
                            groups[i].first);
    });
    group_taus = std::move(gt);

    ParamVector avg_ind = average_merge(lab.theta0, taus);
    ParamVector avg_group = average_merge(lab.theta0, group_taus);

    FilterAudit audit = orthogonality_filter(taus, lab.plan.filter_threshold);
    std::vector<TaskVector> kept_taus;
    for (size_t i : audit.kept) kept_taus.push_back(taus[i]);
    if (kept_taus.size() == 1)
        r.notes.push_back("orthogonality filter kept a single task vector; proceeding");
    ParamVector avg_orth = average_merge(lab.theta0, kept_taus);

    json kept = json::array(), dropped = json::array();
    for (size_t i : audit.kept) kept.push_back(taus[i].source_tag);
    for (size_t i : audit.dropped) dropped.push_back(taus[i].source_tag);
    r.extra = {{"cosine_matrix", audit.matrix},
               {"kept", kept},
               {"dropped", dropped},
               {"filter_threshold", lab.plan.filter_threshold}};
    for (size_t i = 0; i < audit.matrix.size(); ++i)
        for (size_t j = 0; j < audit.matrix.size(); ++j)
            add_cell(r, "cosine_" + taus[i].source_tag, taus[j].source_tag, "cosine",
                     audit.matrix[i][j]);

    std::vector<std::pair<std::string, const ParamVector*>> models = {
        {"ft_pooled", &ft_pooled},
        {"avg_group", &avg_group},
        {"avg_ind", &avg_ind},
        {"avg_orth", &avg_orth}};
    for (auto& [name, params] : models) {
        r.checkpoints[name] = *params;
        for (const Dataset* test : grid_test_sets(lab.world))
            add_eval(r, spec, name, *params, *test);
    }
    return r;
}

Report run_transfer(Lab& lab, int workers) {
    Report r = new_report(lab, "transfer");
    const ModelSpec& spec = lab.world.spec;

    Dataset pooled = pool_datasets(lab.world.source_train);
    ParamVector centralized_seed =
        update(pooled, lab.theta0, cfg_for(lab.plan, lab.plan.budgets.tk_product, "ft_pooled"),
               spec)
            .params;

    MergePlan mp = distributed_plan(lab.plan, lab.plan.distributed_rounds);
    MetaTrainResult dist = meta_train(lab.theta0, lab.world.source_train, mp,
                                      cfg_for(lab.plan, mp.epochs_per_round, "meta"), spec,
                                      workers);
    ParamVector random_init = init_model(spec, seed_for(lab.plan.world_seed, "random_init"));
    MetaTrainResult dist_rand = meta_train(random_init, lab.world.source_train, mp,
                                           cfg_for(lab.plan, mp.epochs_per_round, "meta_random"),
                                           spec, workers);
    for (const RoundRecord& rr : dist.round_log) r.rounds.push_back(rr);
    for (const RoundRecord& rr : dist_rand.round_log) r.rounds.push_back(rr);

    std::vector<std::pair<std::string, const ParamVector*>> regimes = {
        {"baseline", &lab.theta0},
        {"centralized", &centralized_seed},
        {"distributed", &dist.theta},
        {"distributed_random", &dist_rand.theta}};
    for (auto& [name, seed_params] : regimes) r.checkpoints["seed_" + name] = *seed_params;

    size_t n_targets = lab.world.target_train.size();
    std::vector<TransferScore> scores(regimes.size() * n_targets);
    parallel_for(static_cast<int>(scores.size()), workers, [&](int idx) {
        size_t ri = static_cast<size_t>(idx) / n_targets, gi = static_cast<size_t>(idx) % n_targets;
        scores[idx] =
            transfer_score(lab, *regimes[ri].second, gi, "transfer_" + regimes[ri].first);
    });

    for (size_t ri = 0; ri < regimes.size(); ++ri) {
        double ratio_sum = 0.0;
        for (size_t gi = 0; gi < n_targets; ++gi) {
            const TransferScore& s = scores[ri * n_targets + gi];
            const TransferScore& base = scores[0 * n_targets + gi];
            const std::string& gid = lab.world.target_test[gi].alphabet_id;
            r.checkpoints[regimes[ri].first + "_to_" + gid] = s.params;
            add_cell(r, regimes[ri].first, gid, "seq_accuracy", s.accuracy,
                     checkpoint_digest(s.params), dataset_digest(lab.world.target_test[gi]));
            // equal accuracies are a ratio of 1 by definition (covers the
            // baseline row against itself); otherwise a zero baseline is
            // floored at half a count so ratios stay finite
            if (s.accuracy == base.accuracy) {
                ratio_sum += 1.0;
            } else {
                double denom = std::max(
                    base.accuracy,
                    0.5 / static_cast<double>(lab.world.target_test[gi].samples.size()));
                ratio_sum += s.accuracy / denom;
            }
        }
        add_cell(r, regimes[ri].first, "x_delta", "ratio",
                 ratio_sum / static_cast<double>(n_targets));
    }
    return r;
}

Report run_tk_sweep(Lab& lab, int workers) {
    Report r = new_report(lab, "tk_sweep");
    const ModelSpec& spec = lab.world.spec;

    for (int T : lab.plan.tk_rounds) {
        MergePlan mp = distributed_plan(lab.plan, T);
        MetaTrainResult mt = meta_train(lab.theta0, lab.world.source_train, mp,
                                        cfg_for(lab.plan, mp.epochs_per_round, "meta"), spec,
                                        workers);
        for (const RoundRecord& rr : mt.round_log) r.rounds.push_back(rr);
        std::string row = "T=" + std::to_string(T);
        r.checkpoints["merged_" + row] = mt.theta;

        uint64_t steps = 0;
        for (const RoundRecord& rr : mt.round_log) steps += rr.steps;
        add_cell(r, row, "steps", "count", static_cast<double>(steps),
                 checkpoint_digest(mt.theta));

        size_t n_targets = lab.world.target_train.size();
        std::vector<TransferScore> scores(n_targets);
        parallel_for(static_cast<int>(n_targets), workers, [&](int gi) {
            scores[gi] = transfer_score(lab, mt.theta, gi, "tk" + std::to_string(T));
        });
        double mean = 0.0;
        for (size_t gi = 0; gi < n_targets; ++gi) {
            const std::string& gid = lab.world.target_test[gi].alphabet_id;
            add_cell(r, row, gid, "seq_accuracy", scores[gi].accuracy,
                     checkpoint_digest(scores[gi].params),
                     dataset_digest(lab.world.target_test[gi]));
            mean += scores[gi].accuracy;
        }
        add_cell(r, row, "mean", "seq_accuracy", mean / static_cast<double>(n_targets));
    }
    return r;
}

Report run_subsample_sweep(Lab& lab, int workers) {
    Report r = new_report(lab, "subsample_sweep");
    const ModelSpec& spec = lab.world.spec;
    size_t n_targets = lab.world.target_train.size();

    for (double f : lab.plan.subsample_fractions) {
        std::vector<Dataset> subs;
        for (const Dataset& d : lab.world.source_train)
            subs.push_back(
                subsample(d, f, seed_for(lab.plan.world_seed, "subsample_" + d.alphabet_id)));
        for (const Dataset& d : subs)
            if (d.samples.empty())
                throw std::invalid_argument("subsample fraction " + fmt_value(f) +
                                            " empties domain " + d.alphabet_id);

        MergePlan mp = distributed_plan(lab.plan, lab.plan.distributed_rounds);
        MetaTrainResult dist =
            meta_train(lab.theta0, subs, mp, cfg_for(lab.plan, mp.epochs_per_round, "meta"),
                       spec, workers);
        for (const RoundRecord& rr : dist.round_log) r.rounds.push_back(rr);
        Dataset pooled = pool_datasets(subs);
        ParamVector cent =
            update(pooled, lab.theta0,
                   cfg_for(lab.plan, lab.plan.budgets.tk_product, "ft_pooled"), spec)
                .params;

        char fid_buf[32];
        std::snprintf(fid_buf, sizeof(fid_buf), "%g", f);
        std::string fid = fid_buf;
        std::vector<std::pair<std::string, const ParamVector*>> regimes = {
            {"distributed", &dist.theta}, {"centralized", &cent}};
        for (auto& [name, seed_params] : regimes) {
            r.checkpoints["seed_" + name + "_f" + fid] = *seed_params;
            std::vector<TransferScore> scores(n_targets);
            parallel_for(static_cast<int>(n_targets), workers, [&](int gi) {
                scores[gi] = transfer_score(lab, *seed_params, gi, "transfer_" + name);
            });
            double mean = 0.0, sq = 0.0;
            for (size_t gi = 0; gi < n_targets; ++gi) {
                const std::string& gid = lab.world.target_test[gi].alphabet_id;
                add_cell(r, name + "_f" + fid, gid, "seq_accuracy", scores[gi].accuracy,
                         checkpoint_digest(scores[gi].params),
                         dataset_digest(lab.world.target_test[gi]));
                mean += scores[gi].accuracy;
                sq += scores[gi].accuracy * scores[gi].accuracy;
            }
            mean /= static_cast<double>(n_targets);
            double var = sq / static_cast<double>(n_targets) - mean * mean;
            add_cell(r, name + "_f" + fid, "mean", "seq_accuracy", mean);
            add_cell(r, name + "_f" + fid, "std", "seq_accuracy",
                     std::sqrt(std::max(0.0, var)));
        }
    }
    return r;
}

Report run_leave_one_out(Lab& lab, int workers) {
    Report r = new_report(lab, "leave_one_out");
    const auto& domains = lab.world.source_train;
    size_t n_targets = lab.world.target_train.size();

    std::vector<TrainResult> fts = domain_finetunes(lab, workers);
    std::vector<TaskVector> taus;
    for (size_t i = 0; i < fts.size(); ++i)
        taus.push_back(task_vector(fts[i].params, lab.theta0, domains[i].alphabet_id));

    std::vector<std::pair<std::string, std::vector<std::string>>> exclusions;
    exclusions.emplace_back("all", std::vector<std::string>{});
    for (const Dataset& d : domains)
        exclusions.emplace_back("loo_" + d.alphabet_id, std::vector<std::string>{d.alphabet_id});
    for (const auto& [name, excluded] : lab.plan.group_masks)
        exclusions.emplace_back("mask_" + name, excluded);

    for (const auto& [row, excluded] : exclusions) {
        std::vector<TaskVector> kept;
        for (const TaskVector& t : taus)
            if (std::find(excluded.begin(), excluded.end(), t.source_tag) == excluded.end())
                kept.push_back(t);
        if (kept.empty()) throw PlanError("exclusion '" + row + "' removes every task vector");
        ParamVector merged = average_merge(lab.theta0, kept);
        r.checkpoints["merged_" + row] = merged;

        std::vector<TransferScore> scores(n_targets);
        parallel_for(static_cast<int>(n_targets), workers, [&](int gi) {
            scores[gi] = transfer_score(lab, merged, gi, "loo_" + row);
        });
        for (size_t gi = 0; gi < n_targets; ++gi)
            add_cell(r, row, lab.world.target_test[gi].alphabet_id, "seq_accuracy",
                     scores[gi].accuracy, checkpoint_digest(scores[gi].params),
                     dataset_digest(lab.world.target_test[gi]));
    }
    return r;
}

std::string report_csv(const Report& report) {
    std::string out = "table,row,col,metric,value,model_digest,dataset_digest\n";
    for (const ReportCell& c : report.cells) {
        out += c.table + "," + c.row + "," + c.col + "," + c.metric + "," + fmt_value(c.value) +
               "," + c.model_digest + "," + c.dataset_digest + "\n";
    }
    return out;
}

void save_report(const Report& report, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "ckpt");

    json checkpoints = json::object();
    for (const auto& [name, params] : report.checkpoints) {
        write_checkpoint(params, (fs::path(dir) / "ckpt" / (name + ".mmck")).string());
        checkpoints[name] = checkpoint_digest(params);
    }

    {
        std::ofstream os(fs::path(dir) / "report.csv", std::ios::binary);
        os << report_csv(report);
    }
    {
        std::ofstream os(fs::path(dir) / "rounds.jsonl", std::ios::binary);
        for (const RoundRecord& rr : report.rounds) os << round_to_json(rr).dump() << "\n";
    }

    json cells = json::array();
    for (const ReportCell& c : report.cells)
        cells.push_back({{"table", c.table},
                         {"row", c.row},
                         {"col", c.col},
                         {"metric", c.metric},
                         {"value", c.value},
                         {"model_digest", c.model_digest},
                         {"dataset_digest", c.dataset_digest}});

    ExperimentPlan plan = parse_plan(report.plan_json);
    json j = {{"table", report.table},
              {"plan", report.plan_json},
              {"plan_digest", report.plan_digest},
              {"full_scale_reference", full_scale_reference(plan)},
              {"checkpoints", checkpoints},
              {"datasets", json::object()},
              {"cells", cells},
              {"notes", report.notes},
              {"extra", report.extra}};
    for (const auto& bucket :
         {&plan.pretrain, &plan.source_domains, &plan.ood_sets, &plan.transfer_targets})
        for (const DataRecipe& rec : *bucket) {
            auto [train, test] = realize(rec);
            j["datasets"][rec.id + ".train"] = dataset_digest(train);
            j["datasets"][rec.id + ".test"] = dataset_digest(test);
        }
    std::ofstream os(fs::path(dir) / "report.json", std::ios::binary);
    os << j.dump(2) << "\n";
}

void verify_provenance(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream is(fs::path(dir) / "report.json");
    if (!is) throw ProvenanceError("no report.json under " + dir);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ProvenanceError(std::string("report.json unreadable: ") + e.what());
    }

    ExperimentPlan plan = parse_plan(j.at("plan"));
    if (plan_digest(plan) != j.at("plan_digest").get<std::string>())
        throw ProvenanceError("plan digest mismatch");

    std::map<std::string, DataRecipe> recipes;
    for (const auto& bucket :
         {&plan.pretrain, &plan.source_domains, &plan.ood_sets, &plan.transfer_targets})
        for (const DataRecipe& rec : *bucket) recipes[rec.id] = rec;
    std::map<std::string, std::pair<std::string, std::string>> realized;  // id -> digests
    for (auto it = j.at("datasets").begin(); it != j.at("datasets").end(); ++it) {
        std::string key = it.key();
        size_t dot = key.rfind('.');
        std::string id = key.substr(0, dot), split = key.substr(dot + 1);
        auto rit = recipes.find(id);
        if (rit == recipes.end()) throw ProvenanceError("dataset key not in plan: " + key);
        if (!realized.count(id)) {
            auto [train, test] = realize(rit->second);
            realized[id] = {dataset_digest(train), dataset_digest(test)};
        }
        const std::string& want =
            split == "train" ? realized[id].first : realized[id].second;
        if (it.value().get<std::string>() != want)
            throw ProvenanceError("dataset digest mismatch for " + key);
    }

    for (auto it = j.at("checkpoints").begin(); it != j.at("checkpoints").end(); ++it) {
        std::string path = (fs::path(dir) / "ckpt" / (it.key() + ".mmck")).string();
        ParamVector params;
        try {
            params = read_checkpoint(path);
        } catch (const std::exception& e) {
            throw ProvenanceError("checkpoint " + it.key() + ": " + e.what());
        }
        if (checkpoint_digest(params) != it.value().get<std::string>())
            throw ProvenanceError("checkpoint digest mismatch for " + it.key());
    }
}

} // namespace mergelab
