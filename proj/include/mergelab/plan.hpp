#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mergelab/glyphgen.hpp"
#include "mergelab/model.hpp"
#include "mergelab/trainer.hpp"

#include "json.hpp"

namespace mergelab {

// Raised for anything wrong with a plan file; maps to CLI exit code 2.
struct PlanError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AlphabetRecipe {
    uint64_t seed = 0;
    int glyph_count = 0;
    int stroke_min = 2;
    int stroke_max = 4;
};

struct DataRecipe {
    std::string id;
    AlphabetRecipe alphabet;
    DomainStyle style;
    int n_train = 0;
    int n_test = 0;
    uint64_t seed = 0;
    int max_label_len = kDefaultMaxLabelLen;
};

struct Budgets {
    int pretrain_epochs = 15;
    int tk_product = 12;
    int transfer_epochs = 10;
};

struct ExperimentPlan {
    uint64_t world_seed = 1;
    std::string output_dir = "out";

    std::vector<int> conv_channels{8, 16};
    int hidden_dim = 32;

    int batch_size = 8;
    double lr = 1e-3;

    Budgets budgets;
    int distributed_rounds = 3;       // T for the default distributed regime
    double filter_threshold = 0.10;

    std::vector<DataRecipe> pretrain;        // pooled -> Z
    std::vector<DataRecipe> source_domains;  // D
    std::vector<DataRecipe> ood_sets;        // test-only
    std::vector<DataRecipe> transfer_targets;

    std::vector<int> tk_rounds{1, 2, 3, 4, 6, 12};     // T values of the sweep
    std::vector<double> subsample_fractions{0.2, 0.6, 1.0};
    std::map<std::string, std::vector<std::string>> group_masks;  // name -> excluded ids

    void validate() const;
    ModelSpec model_spec() const;  // num_classes from the source glyph_count
    TrainConfig train_config(int epochs) const;
};

ExperimentPlan parse_plan(const nlohmann::json& j);
ExperimentPlan load_plan(const std::string& path);
nlohmann::json plan_to_json(const ExperimentPlan& plan);
std::string plan_digest(const ExperimentPlan& plan);

// The default desk-scale world: one 12-glyph alphabet under 4 source
// styles, 2 held-out styles as OOD, 2 fresh alphabets as transfer targets.
ExperimentPlan default_toy_plan();

// Deterministic materialization of a recipe.
Alphabet recipe_alphabet(const AlphabetRecipe& r, const std::string& id);
std::pair<Dataset, Dataset> realize(const DataRecipe& r);
std::string dataset_digest(const Dataset& d);

struct World {
    ModelSpec spec;
    Dataset z_train, z_test;
    std::vector<Dataset> source_train, source_test;
    std::vector<Dataset> ood_test;
    std::vector<Dataset> target_train, target_test;
};

World materialize(const ExperimentPlan& plan);

} // namespace mergelab
