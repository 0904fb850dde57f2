#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include "doctest.h"

#include "mergelab/checkpoint.hpp"
#include "mergelab/harness.hpp"
#include "mergelab/plan.hpp"

using namespace mergelab;
namespace fs = std::filesystem;

namespace {

// A deliberately small world so harness-level tests stay fast; trend
// quality does not matter here, only shapes, determinism, and provenance.
ExperimentPlan tiny_plan() {
    ExperimentPlan p = default_toy_plan();
    p.world_seed = 7;
    p.budgets.pretrain_epochs = 2;
    p.budgets.tk_product = 2;
    p.budgets.transfer_epochs = 2;
    p.distributed_rounds = 2;
    p.tk_rounds = {1, 2};
    p.subsample_fractions = {0.5, 1.0};
    for (auto* bucket : {&p.pretrain, &p.source_domains, &p.ood_sets, &p.transfer_targets})
        for (DataRecipe& r : *bucket) {
            if (r.n_train > 0) r.n_train = 10;
            r.n_test = 5;
            r.max_label_len = 2;
        }
    p.pretrain.resize(1);
    p.source_domains.resize(2);
    p.ood_sets.resize(1);
    p.transfer_targets.resize(1);
    p.group_masks = {{"only_first", {p.source_domains[1].id}}};
    p.validate();
    return p;
}

Lab& tiny_lab() {
    static Lab lab(tiny_plan(), 2);
    return lab;
}

struct TempDir {
    fs::path path;
    TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("mergelab_test_" + tag)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("parallel_for covers every index once for any worker count") {
    for (int workers : {1, 3, 8}) {
        std::vector<std::atomic<int>> hits(100);
        parallel_for(100, workers, [&](int i) { hits[i].fetch_add(1); });
        for (auto& h : hits) CHECK(h.load() == 1);
    }
}

TEST_CASE("parallel_for propagates worker exceptions") {
    CHECK_THROWS_AS(parallel_for(8, 4,
                                 [&](int i) {
                                     if (i == 5) throw std::runtime_error("boom");
                                 }),
                    std::runtime_error);
}

TEST_CASE("seed_for is a pure function of root and purpose") {
    CHECK(seed_for(1, "pretrain") == seed_for(1, "pretrain"));
    CHECK(seed_for(1, "pretrain") != seed_for(2, "pretrain"));
    CHECK(seed_for(1, "pretrain") != seed_for(1, "meta"));
}

TEST_CASE("plan JSON round trip preserves the digest") {
    ExperimentPlan p = default_toy_plan();
    ExperimentPlan q = parse_plan(plan_to_json(p));
    CHECK(plan_digest(p) == plan_digest(q));
    CHECK(plan_to_json(p).dump() == plan_to_json(q).dump());
}

TEST_CASE("plan parser rejects unknown keys at every level") {
    nlohmann::json j = plan_to_json(default_toy_plan());
    nlohmann::json bad = j;
    bad["extra_knob"] = 1;
    CHECK_THROWS_AS(parse_plan(bad), PlanError);
    bad = j;
    bad["budgets"]["warmup"] = 3;
    CHECK_THROWS_AS(parse_plan(bad), PlanError);
    bad = j;
    bad["source_domains"][0]["style"]["blur"] = 0.5;
    CHECK_THROWS_AS(parse_plan(bad), PlanError);
}

TEST_CASE("plan validation enforces the budget and naming contracts") {
    ExperimentPlan p = default_toy_plan();
    p.tk_rounds.push_back(p.budgets.tk_product * 2);
    CHECK_THROWS_AS(p.validate(), PlanError);

    p = default_toy_plan();
    p.source_domains[1].id = p.source_domains[0].id;
    CHECK_THROWS_AS(p.validate(), PlanError);

    p = default_toy_plan();
    p.group_masks["bad"] = {"nonexistent_domain"};
    CHECK_THROWS_AS(p.validate(), PlanError);

    p = default_toy_plan();
    for (const DataRecipe& r : p.source_domains) p.group_masks["all"].push_back(r.id);
    CHECK_THROWS_AS(p.validate(), PlanError);

    p = default_toy_plan();
    p.distributed_rounds = p.budgets.tk_product + 1;
    CHECK_THROWS_AS(p.validate(), PlanError);
}

TEST_CASE("plan validation rejects a transfer-sized mismatch in core recipes") {
    ExperimentPlan p = default_toy_plan();
    p.ood_sets[0].alphabet.glyph_count += 1;
    CHECK_THROWS_AS(p.validate(), PlanError);
}

TEST_CASE("materialize realizes every bucket at the declared sizes") {
    ExperimentPlan p = tiny_plan();
    World w = materialize(p);
    CHECK(w.z_train.samples.size() == 10);
    CHECK(w.source_train.size() == 2);
    CHECK(w.source_test.size() == 2);
    CHECK(w.ood_test.size() == 1);
    CHECK(w.ood_test[0].samples.size() == 5);
    CHECK(w.target_train.size() == 1);
    CHECK(w.spec.num_classes == p.source_domains[0].alphabet.glyph_count + 1);
}

TEST_CASE("dataset digests are stable and sensitive to content") {
    ExperimentPlan p = tiny_plan();
    auto [train_a, test_a] = realize(p.source_domains[0]);
    auto [train_b, test_b] = realize(p.source_domains[0]);
    CHECK(dataset_digest(train_a) == dataset_digest(train_b));
    CHECK(dataset_digest(train_a) != dataset_digest(test_a));
    train_b.samples[0].label[0] = (train_b.samples[0].label[0] + 1) % train_b.glyph_count;
    CHECK(dataset_digest(train_a) != dataset_digest(train_b));
}

TEST_CASE("baseline grid has one row per model and one column per test set") {
    Lab& lab = tiny_lab();
    Report r = run_baseline_grid(lab, 2);
    // rows: zero_shot + 2 per-domain + pooled; cols: Z + 2 source + 1 OOD;
    // two metrics per cell
    size_t rows = 4, cols = 4;
    CHECK(r.cells.size() == rows * cols * 2);
    CHECK(r.checkpoints.count("zero_shot") == 1);
    CHECK(checkpoint_digest(r.checkpoints.at("zero_shot")) == checkpoint_digest(lab.theta0));
}

TEST_CASE("regime reports are byte-identical across worker counts") {
    Lab& lab = tiny_lab();
    Report a = run_transfer(lab, 1);
    Report b = run_transfer(lab, 4);
    CHECK(report_csv(a) == report_csv(b));
    REQUIRE(a.checkpoints.size() == b.checkpoints.size());
    for (const auto& [name, params] : a.checkpoints)
        CHECK(checkpoint_digest(params) == checkpoint_digest(b.checkpoints.at(name)));

    Report c = run_merge_variants(lab, 1);
    Report d = run_merge_variants(lab, 3);
    CHECK(report_csv(c) == report_csv(d));
}

TEST_CASE("transfer report carries the ratio column with baseline at 1.0") {
    Lab& lab = tiny_lab();
    Report r = run_transfer(lab, 2);
    bool saw_baseline_delta = false;
    for (const ReportCell& cell : r.cells)
        if (cell.row == "baseline" && cell.col == "x_delta") {
            CHECK(cell.value == doctest::Approx(1.0));
            saw_baseline_delta = true;
        }
    CHECK(saw_baseline_delta);
}

TEST_CASE("tk sweep spends an identical step budget in every cell") {
    Lab& lab = tiny_lab();
    Report r = run_tk_sweep(lab, 2);
    std::vector<double> budgets;
    for (const ReportCell& cell : r.cells)
        if (cell.col == "steps") budgets.push_back(cell.value);
    REQUIRE(budgets.size() == lab.plan.tk_rounds.size());
    for (double b : budgets) CHECK(b == budgets.front());
}

TEST_CASE("leave-one-out rows cover every domain plus the group masks") {
    Lab& lab = tiny_lab();
    Report r = run_leave_one_out(lab, 2);
    std::set<std::string> rows;
    for (const ReportCell& cell : r.cells) rows.insert(cell.row);
    CHECK(rows.count("all") == 1);
    for (const Dataset& d : lab.world.source_train) CHECK(rows.count("loo_" + d.alphabet_id) == 1);
    CHECK(rows.count("mask_only_first") == 1);
    // with two domains, leaving one out merges a single task vector,
    // which must reproduce the other domain's fine-tune exactly
    CHECK(r.checkpoints.count("merged_loo_" + lab.world.source_train[0].alphabet_id) == 1);
}

TEST_CASE("saved reports verify and tampering is detected") {
    Lab& lab = tiny_lab();
    Report r = run_transfer(lab, 2);
    TempDir dir("provenance");
    save_report(r, dir.path.string());
    CHECK_NOTHROW(verify_provenance(dir.path.string()));

    // flip one payload byte in some checkpoint
    fs::path victim;
    for (const auto& entry : fs::directory_iterator(dir.path / "ckpt")) {
        victim = entry.path();
        break;
    }
    REQUIRE(!victim.empty());
    {
        std::fstream f(victim, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(64);
        char b;
        f.seekg(64);
        f.get(b);
        b = static_cast<char>(b ^ 0x01);
        f.seekp(64);
        f.put(b);
    }
    CHECK_THROWS_AS(verify_provenance(dir.path.string()), ProvenanceError);
}

TEST_CASE("verify_provenance rejects a doctored report digest") {
    Lab& lab = tiny_lab();
    Report r = run_baseline_grid(lab, 2);
    TempDir dir("tamper_json");
    save_report(r, dir.path.string());

    nlohmann::json j;
    {
        std::ifstream is(dir.path / "report.json");
        is >> j;
    }
    j["plan"]["world_seed"] = j["plan"]["world_seed"].get<uint64_t>() + 1;
    {
        std::ofstream os(dir.path / "report.json");
        os << j.dump(2);
    }
    CHECK_THROWS_AS(verify_provenance(dir.path.string()), ProvenanceError);
}

TEST_CASE("rerunning a regime from scratch reproduces report bytes") {
    // full independence: two labs built from the same plan
    ExperimentPlan p = tiny_plan();
    Lab lab1(p, 1), lab2(p, 2);
    CHECK(checkpoint_digest(lab1.theta0) == checkpoint_digest(lab2.theta0));
    Report a = run_subsample_sweep(lab1, 1);
    Report b = run_subsample_sweep(lab2, 2);
    CHECK(report_csv(a) == report_csv(b));
}
