#include "mergelab/plan.hpp"
#include "mergelab/sha256.hpp"

#include <algorithm>
#include <fstream>
#include <set>

using nlohmann::json;

namespace mergelab {

namespace {

void expect_keys(const json& j, const std::set<std::string>& allowed, const std::string& ctx) {
    if (!j.is_object()) throw PlanError(ctx + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw PlanError(ctx + ": unknown key '" + it.key() + "'");
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw PlanError("bad value for '" + key + "': " + e.what());
    }
}

AlphabetRecipe parse_alphabet(const json& j, const std::string& ctx) {
    expect_keys(j, {"seed", "glyph_count", "stroke_min", "stroke_max"}, ctx);
    AlphabetRecipe r;
    r.seed = get_or<uint64_t>(j, "seed", 0);
    r.glyph_count = get_or<int>(j, "glyph_count", 0);
    r.stroke_min = get_or<int>(j, "stroke_min", 2);
    r.stroke_max = get_or<int>(j, "stroke_max", 4);
    return r;
}

DomainStyle parse_style(const json& j, const std::string& ctx) {
    expect_keys(j, {"slant", "stroke_width", "noise_sigma", "invert", "spacing_jitter"}, ctx);
    DomainStyle s;
    s.slant = get_or<double>(j, "slant", 0.0);
    s.stroke_width = get_or<int>(j, "stroke_width", 1);
    s.noise_sigma = get_or<double>(j, "noise_sigma", 0.0);
    s.invert = get_or<bool>(j, "invert", false);
    s.spacing_jitter = get_or<int>(j, "spacing_jitter", 0);
    return s;
}

DataRecipe parse_recipe(const json& j, const std::string& ctx) {
    expect_keys(j, {"id", "alphabet", "style", "n_train", "n_test", "seed", "max_label_len"}, ctx);
    DataRecipe r;
    r.id = get_or<std::string>(j, "id", "");
    if (r.id.empty()) throw PlanError(ctx + ": recipe needs an id");
    if (!j.contains("alphabet")) throw PlanError(ctx + ": recipe needs an alphabet");
    r.alphabet = parse_alphabet(j.at("alphabet"), ctx + ".alphabet");
    if (j.contains("style")) r.style = parse_style(j.at("style"), ctx + ".style");
    r.n_train = get_or<int>(j, "n_train", 0);
    r.n_test = get_or<int>(j, "n_test", 0);
    r.seed = get_or<uint64_t>(j, "seed", 0);
    r.max_label_len = get_or<int>(j, "max_label_len", kDefaultMaxLabelLen);
    return r;
}

json alphabet_to_json(const AlphabetRecipe& r) {
    return {{"seed", r.seed},
            {"glyph_count", r.glyph_count},
            {"stroke_min", r.stroke_min},
            {"stroke_max", r.stroke_max}};
}

json style_to_json(const DomainStyle& s) {
    return {{"slant", s.slant},
            {"stroke_width", s.stroke_width},
            {"noise_sigma", s.noise_sigma},
            {"invert", s.invert},
            {"spacing_jitter", s.spacing_jitter}};
}

json recipe_to_json(const DataRecipe& r) {
    return {{"id", r.id},
            {"alphabet", alphabet_to_json(r.alphabet)},
            {"style", style_to_json(r.style)},
            {"n_train", r.n_train},
            {"n_test", r.n_test},
            {"seed", r.seed},
            {"max_label_len", r.max_label_len}};
}

} // namespace

void ExperimentPlan::validate() const {
    if (pretrain.empty()) throw PlanError("plan: pretrain recipes missing");
    if (source_domains.empty()) throw PlanError("plan: source_domains missing");
    if (budgets.pretrain_epochs < 1 || budgets.tk_product < 1 || budgets.transfer_epochs < 1)
        throw PlanError("plan: budgets must be positive");
    if (batch_size < 1) throw PlanError("plan: batch_size must be >= 1");
    if (!(lr > 0.0)) throw PlanError("plan: lr must be positive");
    if (distributed_rounds < 1) throw PlanError("plan: distributed_rounds must be >= 1");
    if (budgets.tk_product % distributed_rounds != 0)
        throw PlanError("plan: distributed_rounds must divide tk_product");
    if (!(filter_threshold > 0.0) || filter_threshold > 1.0)
        throw PlanError("plan: filter_threshold must be in (0, 1]");

    int base = source_domains.front().alphabet.glyph_count;
    for (const auto& bucket : {&pretrain, &source_domains, &ood_sets})
        for (const DataRecipe& r : *bucket)
            if (r.alphabet.glyph_count != base)
                throw PlanError("plan: recipe '" + r.id +
                                "' glyph_count differs from the source alphabet (" +
                                std::to_string(base) + "); only transfer targets may differ");

    std::set<std::string> ids;
    for (const auto& bucket : {&pretrain, &source_domains, &ood_sets, &transfer_targets})
        for (const DataRecipe& r : *bucket) {
            if (r.alphabet.glyph_count < 2) throw PlanError("plan: recipe '" + r.id + "': glyph_count < 2");
            if (r.n_train < 0 || r.n_test < 1)
                throw PlanError("plan: recipe '" + r.id + "': needs n_test >= 1");
            r.style.validate();
            if (!ids.insert(r.id).second) throw PlanError("plan: duplicate recipe id '" + r.id + "'");
        }

    for (int t : tk_rounds)
        if (t < 1 || budgets.tk_product % t != 0)
            throw PlanError("plan: tk_rounds entry " + std::to_string(t) +
                            " does not divide tk_product " + std::to_string(budgets.tk_product));
    for (double f : subsample_fractions)
        if (!(f > 0.0) || f > 1.0) throw PlanError("plan: subsample fraction out of (0, 1]");

    std::set<std::string> domain_ids;
    for (const DataRecipe& r : source_domains) domain_ids.insert(r.id);
    for (const auto& [name, excluded] : group_masks) {
        for (const std::string& id : excluded)
            if (!domain_ids.count(id))
                throw PlanError("plan: group mask '" + name + "' names unknown domain '" + id + "'");
        if (excluded.size() >= domain_ids.size())
            throw PlanError("plan: group mask '" + name + "' excludes every domain");
    }
}

ModelSpec ExperimentPlan::model_spec() const {
    ModelSpec spec;
    spec.conv_channels = conv_channels;
    spec.hidden_dim = hidden_dim;
    spec.num_classes = source_domains.front().alphabet.glyph_count + 1;
    return spec;
}

TrainConfig ExperimentPlan::train_config(int epochs) const {
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.lr = lr;
    cfg.shuffle_seed = world_seed;
    return cfg;
}

ExperimentPlan parse_plan(const json& j) {
    expect_keys(j,
                {"world_seed", "output_dir", "model", "train", "budgets", "distributed_rounds",
                 "filter_threshold", "pretrain", "source_domains", "ood_sets", "transfer_targets",
                 "tk_rounds", "subsample_fractions", "group_masks"},
                "plan");
    ExperimentPlan p;
    p.world_seed = get_or<uint64_t>(j, "world_seed", 1);
    p.output_dir = get_or<std::string>(j, "output_dir", "out");
    if (j.contains("model")) {
        expect_keys(j.at("model"), {"conv_channels", "hidden_dim"}, "plan.model");
        p.conv_channels = get_or<std::vector<int>>(j.at("model"), "conv_channels", p.conv_channels);
        p.hidden_dim = get_or<int>(j.at("model"), "hidden_dim", p.hidden_dim);
    }
    if (j.contains("train")) {
        expect_keys(j.at("train"), {"batch_size", "lr"}, "plan.train");
        p.batch_size = get_or<int>(j.at("train"), "batch_size", p.batch_size);
        p.lr = get_or<double>(j.at("train"), "lr", p.lr);
    }
    if (j.contains("budgets")) {
        expect_keys(j.at("budgets"), {"pretrain_epochs", "tk_product", "transfer_epochs"},
                    "plan.budgets");
        p.budgets.pretrain_epochs = get_or<int>(j.at("budgets"), "pretrain_epochs", 15);
        p.budgets.tk_product = get_or<int>(j.at("budgets"), "tk_product", 12);
        p.budgets.transfer_epochs = get_or<int>(j.at("budgets"), "transfer_epochs", 10);
    }
    p.distributed_rounds = get_or<int>(j, "distributed_rounds", 3);
    p.filter_threshold = get_or<double>(j, "filter_threshold", 0.10);

    auto parse_list = [&](const char* key, std::vector<DataRecipe>& out) {
        if (!j.contains(key)) return;
        if (!j.at(key).is_array()) throw PlanError(std::string("plan.") + key + ": expected an array");
        size_t i = 0;
        for (const json& r : j.at(key))
            out.push_back(parse_recipe(r, std::string(key) + "[" + std::to_string(i++) + "]"));
    };
    parse_list("pretrain", p.pretrain);
    parse_list("source_domains", p.source_domains);
    parse_list("ood_sets", p.ood_sets);
    parse_list("transfer_targets", p.transfer_targets);

    p.tk_rounds = get_or<std::vector<int>>(j, "tk_rounds", p.tk_rounds);
    p.subsample_fractions = get_or<std::vector<double>>(j, "subsample_fractions", p.subsample_fractions);
    if (j.contains("group_masks")) {
        if (!j.at("group_masks").is_object()) throw PlanError("plan.group_masks: expected an object");
        for (auto it = j.at("group_masks").begin(); it != j.at("group_masks").end(); ++it) {
            try {
                p.group_masks[it.key()] = it.value().get<std::vector<std::string>>();
            } catch (const json::exception& e) {
                throw PlanError("plan.group_masks." + it.key() + ": " + e.what());
            }
        }
    }

    p.validate();
    return p;
}

ExperimentPlan load_plan(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw PlanError("cannot open plan file " + path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw PlanError(std::string("plan parse error: ") + e.what());
    }
    return parse_plan(j);
}

json plan_to_json(const ExperimentPlan& p) {
    json j;
    j["world_seed"] = p.world_seed;
    j["output_dir"] = p.output_dir;
    j["model"] = {{"conv_channels", p.conv_channels}, {"hidden_dim", p.hidden_dim}};
    j["train"] = {{"batch_size", p.batch_size}, {"lr", p.lr}};
    j["budgets"] = {{"pretrain_epochs", p.budgets.pretrain_epochs},
                    {"tk_product", p.budgets.tk_product},
                    {"transfer_epochs", p.budgets.transfer_epochs}};
    j["distributed_rounds"] = p.distributed_rounds;
    j["filter_threshold"] = p.filter_threshold;
    auto list = [](const std::vector<DataRecipe>& v) {
        json out = json::array();
        for (const DataRecipe& r : v) out.push_back(recipe_to_json(r));
        return out;
    };
    j["pretrain"] = list(p.pretrain);
    j["source_domains"] = list(p.source_domains);
    j["ood_sets"] = list(p.ood_sets);
    j["transfer_targets"] = list(p.transfer_targets);
    j["tk_rounds"] = p.tk_rounds;
    j["subsample_fractions"] = p.subsample_fractions;
    j["group_masks"] = p.group_masks;
    return j;
}

std::string plan_digest(const ExperimentPlan& plan) {
    return Sha256::hex(Sha256::digest(plan_to_json(plan).dump()));
}

Alphabet recipe_alphabet(const AlphabetRecipe& r, const std::string& id) {
    return make_alphabet(r.seed, r.glyph_count, {r.stroke_min, r.stroke_max}, id);
}

std::pair<Dataset, Dataset> realize(const DataRecipe& r) {
    Alphabet a = recipe_alphabet(r.alphabet, r.id);
    // test-only recipes still need a non-empty train split for build_domain
    int n_train = std::max(1, r.n_train);
    auto [train, test] = build_domain(a, r.style, n_train, r.n_test, r.seed, r.max_label_len);
    if (r.n_train == 0) train.samples.clear();
    train.alphabet_id = r.id;
    test.alphabet_id = r.id;
    return {std::move(train), std::move(test)};
}

std::string dataset_digest(const Dataset& d) {
    Sha256 h;
    auto u32 = [&](uint32_t v) { h.update(&v, 4); };
    u32(static_cast<uint32_t>(d.glyph_count));
    u32(static_cast<uint32_t>(d.samples.size()));
    for (const Sample& s : d.samples) {
        u32(static_cast<uint32_t>(s.image.width));
        u32(static_cast<uint32_t>(s.label.size()));
        for (int c : s.label) u32(static_cast<uint32_t>(c));
        h.update(s.image.pixels.data(), s.image.pixels.size() * sizeof(double));
    }
    return Sha256::hex(h.finish());
}

World materialize(const ExperimentPlan& plan) {
    plan.validate();
    World w;
    w.spec = plan.model_spec();
    w.spec.validate();

    std::vector<Dataset> z_parts, z_test_parts;
    for (const DataRecipe& r : plan.pretrain) {
        auto [train, test] = realize(r);
        z_parts.push_back(std::move(train));
        z_test_parts.push_back(std::move(test));
    }
    w.z_train = pool_datasets(z_parts);
    w.z_train.alphabet_id = "Z";
    w.z_test = pool_datasets(z_test_parts);
    w.z_test.alphabet_id = "Z";

    for (const DataRecipe& r : plan.source_domains) {
        auto [train, test] = realize(r);
        w.source_train.push_back(std::move(train));
        w.source_test.push_back(std::move(test));
    }
    for (const DataRecipe& r : plan.ood_sets) {
        auto [train, test] = realize(r);
        w.ood_test.push_back(std::move(test));
    }
    for (const DataRecipe& r : plan.transfer_targets) {
        auto [train, test] = realize(r);
        w.target_train.push_back(std::move(train));
        w.target_test.push_back(std::move(test));
    }
    return w;
}

ExperimentPlan default_toy_plan() {
    ExperimentPlan p;
    p.world_seed = 1;
    p.output_dir = "out";
    p.batch_size = 8;
    p.lr = 2e-3;
    p.budgets.pretrain_epochs = 30;
    p.budgets.tk_product = 48;
    p.budgets.transfer_epochs = 40;
    p.distributed_rounds = 12;

    AlphabetRecipe base{101, 12, 2, 4};

    auto style = [](double slant, int width, double noise, bool invert, int jitter) {
        DomainStyle s;
        s.slant = slant;
        s.stroke_width = width;
        s.noise_sigma = noise;
        s.invert = invert;
        s.spacing_jitter = jitter;
        return s;
    };
    auto recipe = [&](std::string id, AlphabetRecipe a, DomainStyle s, int ntr, int nte,
                      uint64_t seed) {
        DataRecipe r;
        r.id = std::move(id);
        r.alphabet = a;
        r.style = s;
        r.n_train = ntr;
        r.n_test = nte;
        r.seed = seed;
        r.max_label_len = 3;
        return r;
    };

    // Z: broad style mixture over the base alphabet
    p.pretrain = {recipe("z_plain", base, style(0.0, 1, 0.0, false, 0), 60, 20, 11),
                  recipe("z_slant", base, style(0.2, 2, 0.05, false, 1), 60, 20, 12)};

    // D: four style domains over the shared alphabet
    p.source_domains = {recipe("d_plain", base, style(0.0, 1, 0.02, false, 0), 40, 24, 21),
                        recipe("d_slant", base, style(0.35, 2, 0.02, false, 1), 40, 24, 22),
                        recipe("d_invert", base, style(0.0, 1, 0.10, true, 0), 40, 24, 23),
                        recipe("d_jitter", base, style(-0.35, 1, 0.05, false, 2), 40, 24, 24)};

    // OOD: held-out styles over the same alphabet
    p.ood_sets = {recipe("ood_heavy", base, style(0.45, 3, 0.15, false, 1), 0, 32, 31),
                  recipe("ood_invnoise", base, style(-0.2, 2, 0.2, true, 3), 0, 32, 32)};

    // transfer targets: fresh alphabets, disjoint glyph seeds
    p.transfer_targets = {
        recipe("g_small", {901, 10, 2, 4}, style(0.1, 1, 0.05, false, 1), 40, 32, 41),
        recipe("g_large", {902, 16, 2, 5}, style(-0.1, 2, 0.05, false, 0), 40, 32, 42)};

    p.tk_rounds = {1, 2, 3, 4, 6, 12, 48};
    p.subsample_fractions = {0.2, 0.6, 1.0};
    p.group_masks = {{"no_slanted", {"d_slant", "d_jitter"}}, {"no_inverted", {"d_invert"}}};
    return p;
}

} // namespace mergelab
