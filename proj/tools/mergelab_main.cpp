// mergelab CLI: data generation, training, merging, the six regime reports,
// and provenance verification. Exit codes: 0 ok, 2 bad plan, 3 numeric
// failure, 4 provenance failure.
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "json.hpp"

#include "mergelab/checkpoint.hpp"
#include "mergelab/eval.hpp"
#include "mergelab/harness.hpp"
#include "mergelab/merge.hpp"
#include "mergelab/plan.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mergelab;

namespace {

struct Common {
    std::string plan_path;
    std::string out;
    int workers = 1;
};

ExperimentPlan plan_of(const Common& c) {
    if (c.plan_path.empty()) return default_toy_plan();
    return load_plan(c.plan_path);
}

void add_common(CLI::App* cmd, Common& c, bool with_out = true) {
    cmd->add_option("--plan", c.plan_path, "plan file (JSON); omits to use the built-in toy plan");
    if (with_out) cmd->add_option("--out", c.out, "output directory (default: plan output_dir)");
    cmd->add_option("--workers", c.workers, "worker pool size")->check(CLI::PositiveNumber);
}

const Dataset* find_domain(const World& w, const std::string& id) {
    for (const Dataset& d : w.source_train)
        if (d.alphabet_id == id) return &d;
    return nullptr;
}

int run_regime(const Common& c, const std::string& table,
               Report (*fn)(Lab&, int)) {
    ExperimentPlan plan = plan_of(c);
    Lab lab(plan, c.workers);
    Report r = fn(lab, c.workers);
    std::string dir = (c.out.empty() ? plan.output_dir : c.out) + "/" + table;
    save_report(r, dir);
    std::cout << "wrote " << dir << "/report.csv (" << r.cells.size() << " cells)\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale lab for distributed model merging on synthetic glyph sequences"};
    app.require_subcommand(1);

    Common c;
    std::string domain_id, target_id, init_path, out_ckpt, data_path, rounds_log;
    std::vector<std::string> ckpt_paths;
    int epochs = 1, rounds = 0;
    double filter_threshold = -1.0;

    auto* gen = app.add_subcommand("gen-data", "realize every recipe to GLYF files + manifest");
    add_common(gen, c);

    auto* pre = app.add_subcommand("pretrain", "train theta_0 on the pooled pretraining mixture");
    add_common(pre, c);

    auto* node = app.add_subcommand("train-node", "fine-tune a checkpoint on one source domain");
    add_common(node, c, false);
    node->add_option("--domain", domain_id, "source domain id")->required();
    node->add_option("--init", init_path, "starting checkpoint (.mmck)")->required();
    node->add_option("--epochs", epochs)->check(CLI::PositiveNumber);
    node->add_option("--out-ckpt", out_ckpt, "output checkpoint path")->required();

    auto* mrg = app.add_subcommand("merge", "uniform task-vector average of checkpoints");
    add_common(mrg, c, false);
    mrg->add_option("--init", init_path, "shared starting checkpoint")->required();
    mrg->add_option("--ckpt", ckpt_paths, "fine-tuned checkpoints")->required();
    mrg->add_option("--filter-threshold", filter_threshold,
                    "drop near-colinear task vectors above this |cos|");
    mrg->add_option("--out-ckpt", out_ckpt)->required();

    auto* meta = app.add_subcommand("meta-train", "T rounds of federated averaging over D");
    add_common(meta, c, false);
    meta->add_option("--init", init_path, "starting checkpoint (default: fresh pretrain)");
    meta->add_option("--rounds", rounds, "override round count T");
    meta->add_option("--out-ckpt", out_ckpt)->required();
    meta->add_option("--rounds-log", rounds_log, "round log path (JSON lines)");

    auto* tx = app.add_subcommand(
        "transfer", "transfer comparison: baseline vs centralized vs distributed seeds");
    add_common(tx, c);

    auto* grid = app.add_subcommand("baseline-grid", "train-set x test-set accuracy grid");
    add_common(grid, c);
    auto* mv = app.add_subcommand("merge-variants",
                                  "pooled FT vs group / individual / filtered averaging");
    add_common(mv, c);
    auto* tk = app.add_subcommand("tk-sweep", "rounds-vs-epochs sweep at a fixed step budget");
    add_common(tk, c);
    auto* sub = app.add_subcommand("subsample-sweep",
                                   "distributed vs centralized under data subsampling");
    add_common(sub, c);
    auto* loo = app.add_subcommand("loo", "leave-one-out and masked-group merge ablation");
    add_common(loo, c);

    auto* ev = app.add_subcommand("eval", "score a checkpoint on a GLYF dataset");
    ev->add_option("--ckpt", init_path)->required();
    ev->add_option("--data", data_path, "GLYF dataset file")->required();
    ev->add_option("--plan", c.plan_path, "plan supplying the architecture");

    auto* vp = app.add_subcommand("verify-provenance", "re-derive every digest in a report dir");
    vp->add_option("--dir", out_ckpt, "report directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            ExperimentPlan plan = plan_of(c);
            plan.validate();
            std::string dir = (c.out.empty() ? plan.output_dir : c.out) + "/data";
            fs::create_directories(dir);
            json manifest = {{"plan_digest", plan_digest(plan)}, {"datasets", json::object()}};
            for (const auto& bucket :
                 {&plan.pretrain, &plan.source_domains, &plan.ood_sets, &plan.transfer_targets})
                for (const DataRecipe& rec : *bucket) {
                    auto [train, test] = realize(rec);
                    write_glyf(train, dir + "/" + rec.id + ".train.glyf");
                    write_glyf(test, dir + "/" + rec.id + ".test.glyf");
                    manifest["datasets"][rec.id + ".train"] = dataset_digest(train);
                    manifest["datasets"][rec.id + ".test"] = dataset_digest(test);
                }
            std::ofstream os(dir + "/manifest.json");
            os << manifest.dump(2) << "\n";
            std::cout << "wrote " << dir << "\n";
        } else if (*pre) {
            ExperimentPlan plan = plan_of(c);
            Lab lab(plan, c.workers);
            std::string dir = (c.out.empty() ? plan.output_dir : c.out) + "/ckpt";
            fs::create_directories(dir);
            write_checkpoint(lab.theta0, dir + "/theta0.mmck");
            std::cout << json{{"checkpoint", dir + "/theta0.mmck"},
                              {"digest", checkpoint_digest(lab.theta0)},
                              {"steps", lab.pretrain_steps},
                              {"train_seq_accuracy", lab.pretrain_train_accuracy}}
                             .dump(2)
                      << "\n";
        } else if (*node) {
            ExperimentPlan plan = plan_of(c);
            World w = materialize(plan);
            const Dataset* d = find_domain(w, domain_id);
            if (!d) throw PlanError("unknown source domain: " + domain_id);
            ParamVector theta = read_checkpoint(init_path, &w.spec);
            TrainConfig cfg = plan.train_config(epochs);
            cfg.shuffle_seed = seed_for(plan.world_seed, "ft_" + domain_id);
            TrainResult res = update(*d, theta, cfg, w.spec);
            write_checkpoint(res.params, out_ckpt);
            std::cout << json{{"checkpoint", out_ckpt},
                              {"digest", checkpoint_digest(res.params)},
                              {"steps", res.steps},
                              {"final_loss", res.loss_trace.back()}}
                             .dump(2)
                      << "\n";
        } else if (*mrg) {
            ExperimentPlan plan = plan_of(c);
            ModelSpec spec = plan.model_spec();
            ParamVector theta0 = read_checkpoint(init_path, &spec);
            std::vector<TaskVector> taus;
            for (const std::string& p : ckpt_paths)
                taus.push_back(task_vector(read_checkpoint(p, &spec), theta0, p));
            json audit_json;
            if (filter_threshold > 0.0 && taus.size() >= 2) {
                FilterAudit audit = orthogonality_filter(taus, filter_threshold);
                std::vector<TaskVector> kept;
                json dropped = json::array();
                for (size_t i : audit.kept) kept.push_back(taus[i]);
                for (size_t i : audit.dropped) dropped.push_back(taus[i].source_tag);
                audit_json = {{"dropped", dropped}, {"cosine_matrix", audit.matrix}};
                taus = std::move(kept);
            }
            ParamVector merged = average_merge(theta0, taus);
            write_checkpoint(merged, out_ckpt);
            json out = {{"checkpoint", out_ckpt},
                        {"digest", checkpoint_digest(merged)},
                        {"merged", taus.size()}};
            if (!audit_json.is_null()) out["filter"] = audit_json;
            std::cout << out.dump(2) << "\n";
        } else if (*meta) {
            ExperimentPlan plan = plan_of(c);
            Lab lab(plan, c.workers);
            ParamVector theta0 =
                init_path.empty() ? lab.theta0 : read_checkpoint(init_path, &lab.world.spec);
            int T = rounds > 0 ? rounds : plan.distributed_rounds;
            if (plan.budgets.tk_product % T != 0)
                throw PlanError("rounds must divide the epoch budget " +
                                std::to_string(plan.budgets.tk_product));
            MergePlan mp;
            for (const DataRecipe& rct : plan.source_domains) mp.node_ids.push_back(rct.id);
            mp.rounds = T;
            mp.epochs_per_round = plan.budgets.tk_product / T;
            TrainConfig cfg = plan.train_config(mp.epochs_per_round);
            cfg.shuffle_seed = seed_for(plan.world_seed, "meta");
            MetaTrainResult mt =
                meta_train(theta0, lab.world.source_train, mp, cfg, lab.world.spec, c.workers);
            write_checkpoint(mt.theta, out_ckpt);
            if (!rounds_log.empty()) {
                std::ofstream os(rounds_log, std::ios::binary);
                for (const RoundRecord& rr : mt.round_log)
                    os << json{{"round", rr.round},
                               {"tau_norms", rr.tau_norms},
                               {"cosines", rr.cosines},
                               {"kept", rr.kept},
                               {"dropped", rr.dropped},
                               {"merged_digest", rr.merged_digest},
                               {"steps", rr.steps}}
                              .dump()
                       << "\n";
            }
            std::cout << json{{"checkpoint", out_ckpt},
                              {"digest", checkpoint_digest(mt.theta)},
                              {"rounds", mt.round_log.size()}}
                             .dump(2)
                      << "\n";
        } else if (*ev) {
            ExperimentPlan plan = plan_of(c);
            Dataset d = read_glyf(data_path);
            ModelSpec spec = plan.model_spec();
            spec.num_classes = d.glyph_count + 1;
            ParamVector params = read_checkpoint(init_path, &spec);
            MetricsReport m = evaluate(spec, params, d, data_path);
            std::cout << json{{"dataset", data_path},
                              {"n", m.n},
                              {"seq_accuracy", m.seq_accuracy},
                              {"cer", m.cer}}
                             .dump(2)
                      << "\n";
        } else if (*vp) {
            verify_provenance(out_ckpt);
            std::cout << "provenance ok: " << out_ckpt << "\n";
        } else if (*tx) {
            return run_regime(c, "transfer", run_transfer);
        } else if (*grid) {
            return run_regime(c, "baseline_grid", run_baseline_grid);
        } else if (*mv) {
            return run_regime(c, "merge_variants", run_merge_variants);
        } else if (*tk) {
            return run_regime(c, "tk_sweep", run_tk_sweep);
        } else if (*sub) {
            return run_regime(c, "subsample_sweep", run_subsample_sweep);
        } else if (*loo) {
            return run_regime(c, "leave_one_out", run_leave_one_out);
        }
    } catch (const PlanError& e) {
        std::cerr << "plan error: " << e.what() << "\n";
        return 2;
    } catch (const ProvenanceError& e) {
        std::cerr << "provenance error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return std::strstr(e.what(), "non-finite") ? 3 : 1;
    }
    return 0;
}
