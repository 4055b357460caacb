#pragma once

#include <string>

#include "ulab/config.hpp"
#include "ulab/evaluate.hpp"

namespace ulab::experiment {

// Builds the dataset and task described by the config.
data::UnlearnTask build_task(const config::DatasetConfig& cfg);

std::vector<int> model_dims(const config::ExperimentConfig& cfg, const data::UnlearnTask& task);

struct TrialModels {
    nn::MlpModel original;
    nn::MlpModel retrained;
    nn::MlpModel unlearned;
    bool has_unlearned = false;
};

// Full per-trial pipeline: train Original, train Re-train, run the method.
TrialModels run_trial(const config::ExperimentConfig& cfg, const data::UnlearnTask& task, std::uint64_t seed,
                      const std::string& trial_dir);

eval::EvalReport evaluate_model(const nn::MlpModel& model, const nn::MlpModel& retrain_ref,
                                const nn::MlpModel& original, const data::UnlearnTask& task,
                                const config::EvalConfig& eval_cfg, bool with_relearn, bool with_curve);

// Runs the theory block and writes theory_report.csv into out_dir. Returns
// the number of failed checks.
int run_theory_block(const config::TheoryConfig& cfg, const std::string& out_dir);

// Writes named evaluation reports as a json document (floats rounded to 6
// significant digits, matching the aggregated report).
void write_reports_json(const std::string& path,
                        const std::vector<std::pair<std::string, eval::EvalReport>>& reports);

// Complete `run` pipeline: trials, aggregation, report.json, curves,
// checkpoints. Returns the process exit code.
int run_experiment(const config::ExperimentConfig& cfg);

// The Figure-1 style demo: Iris, one hidden layer of 100 units, gd vs rurk,
// residual-knowledge curves on tau in {0, 0.01, 0.02, 0.03}.
int run_demo_iris(const std::string& iris_csv, const std::string& out_dir);

void ensure_dir(const std::string& path);

}  // namespace ulab::experiment
