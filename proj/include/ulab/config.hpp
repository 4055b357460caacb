#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ulab/attacks.hpp"
#include "ulab/dataset.hpp"
#include "ulab/trainer.hpp"
#include "ulab/unlearn.hpp"

namespace ulab::config {

// Flat INI-style document: "[section]" headers, "key = value" lines, '#'
// and ';' comments. Keys may contain dots (attack.kind).
class Ini {
public:
    static Ini parse_file(const std::string& path);
    static Ini parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& section, const std::string& key) const;
    bool has_section(const std::string& section) const;

    std::string get_string(const std::string& section, const std::string& key) const;
    std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    int get_int(const std::string& section, const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& section, const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    std::vector<double> get_double_list(const std::string& section, const std::string& key) const;
    std::vector<std::uint64_t> get_u64_list(const std::string& section, const std::string& key) const;
    std::vector<int> get_int_list(const std::string& section, const std::string& key) const;

private:
    std::map<std::string, std::string> values_;  // "section.key" -> value
    std::string origin_;

    const std::string* find(const std::string& section, const std::string& key) const;
};

struct DatasetConfig {
    std::string kind = "blobs";  // blobs | moons | csv
    std::string path;            // csv
    int classes = 3;
    int per_class = 50;
    int dim = 4;
    double spread = 0.15;
    double noise = 0.05;  // moons
    std::uint64_t seed = 7;
    data::SplitMode mode = data::SplitMode::sample;
    int forget_class = 0;
    double forget_fraction = 0.5;
    double test_fraction = 0.2;
    std::uint64_t split_seed = 99;
};

struct EvalConfig {
    std::vector<double> tau_grid = {0.0, 0.01, 0.02, 0.03};
    attack::PerturbationSpec attack;
    double eta = 0.05;
    int max_relearn_epochs = 30;
    std::uint64_t mia_seed = 5;
    std::uint64_t eval_seed = 11;
    train::TrainConfig relearn;  // fine-tuning settings for re-learn time
};

struct TheoryConfig {
    bool enabled = false;
    int a1_pairs = 1000;
    int a1_support_max = 6;
    std::uint64_t a1_seed = 3;
    int hemisphere_samples = 100000;
    std::vector<int> hemisphere_dims = {20, 50, 100};
    std::vector<double> hemisphere_taus = {0.1, 0.2, 0.3, 0.5};
    std::uint64_t hemisphere_seed = 4;
};

struct ExperimentConfig {
    DatasetConfig dataset;
    std::vector<int> hidden_dims = {100};
    nn::Activation activation = nn::Activation::relu;
    train::TrainConfig train;
    train::TrainConfig retrain;
    unlearn::MethodHyper unlearn;
    bool has_unlearn = false;
    EvalConfig eval;
    TheoryConfig theory;
    std::string output_dir = "out";
    int trials = 1;
    int first_trial_index = 0;  // nonzero when --trial selects a single trial
    std::vector<std::uint64_t> seeds = {7};
};

ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig experiment_config_from_ini(const Ini& ini);

}  // namespace ulab::config
