#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ulab/attacks.hpp"
#include "ulab/dataset.hpp"
#include "ulab/nn.hpp"
#include "ulab/trainer.hpp"

namespace ulab::eval {

double accuracy(const nn::MlpModel& model, const data::Dataset& dataset, std::span<const int> indices);

// Attack failure rate of a confidence-threshold membership attack: a 1-D
// regularized logistic classifier on p(correct class | x). Sample mode
// trains retain(1) vs test(0) and evaluates on the forget set; class mode
// trains retain(1) vs half of the forget set(0) and evaluates on the held
// out half.
double mia_accuracy(const nn::MlpModel& model, const data::UnlearnTask& task, std::uint64_t attacker_seed);

struct RelearnResult {
    int epochs = 0;
    bool exceeded = false;

    std::string to_string() const { return exceeded ? ">" + std::to_string(epochs) : std::to_string(epochs); }
};

// Fine-tunes on the full training set until L(m, S_f) <= (1+eta) *
// L(original, S_f), checking before any step and after each epoch.
RelearnResult relearn_time(const nn::MlpModel& model, const nn::MlpModel& original, const data::UnlearnTask& task,
                           double eta, const train::TrainConfig& finetune_config, int max_epochs);

// Shared-draw Monte-Carlo estimates around one sample: both models are
// evaluated on identical perturbations (drawn attacking model m).
struct RkEstimate {
    int numerator = 0;    // #{ m(x') = y }
    int denominator = 0;  // #{ a(x') = y }
    int disagreements = 0;
    int count = 0;
    bool denominator_zero = false;
    double r_hat = 0.0;  // +inf flagged through denominator_zero
    double k_hat = 0.0;
    double p_a_hat = 0.0;
};

RkEstimate residual_knowledge(const nn::MlpModel& m, const nn::MlpModel& a, const data::Dataset& dataset,
                              int sample_idx, const attack::PerturbationSpec& spec, std::uint64_t seed);

double adversarial_disagreement(const nn::MlpModel& m, const nn::MlpModel& a, const data::Dataset& dataset,
                                int sample_idx, const attack::PerturbationSpec& spec, std::uint64_t seed);

struct RkBounds {
    double lower = 0.0;  // r * p_a * (1 - p_a)
    double upper = 0.0;  // 1 - r * p_a^2
    double r_hat = 0.0;
    double p_a = 0.0;
};

bool rk_bounds_check(double r_hat, double p_a_hat, double k_hat, double slack, RkBounds* bounds = nullptr);

struct RkCurvePoint {
    double tau = 0.0;
    double r_hat_mean = 0.0;  // over samples with positive denominator
    double k_hat_mean = 0.0;
    double prevalence = 0.0;  // fraction of forget samples with r_hat > 1
    int denominator_zero_count = 0;
};

std::vector<RkCurvePoint> rk_curve(const nn::MlpModel& m, const nn::MlpModel& a, const data::UnlearnTask& task,
                                   std::span<const double> tau_grid, const attack::PerturbationSpec& spec_template,
                                   std::uint64_t seed);

struct EvalReport {
    double retain_acc = 0.0;
    double unlearn_acc = 0.0;  // 1 - forget accuracy
    double test_acc = 0.0;
    double mia_acc = 0.0;
    double avg_gap = 0.0;  // percentage points, vs the re-train reference
    std::optional<RelearnResult> relearn;
    std::vector<RkCurvePoint> curve;
};

// Mean absolute accuracy gap in percentage points over retain, unlearn,
// test, and MIA accuracies.
double avg_gap(const EvalReport& report, const EvalReport& retrain_report);
double mean_absolute_gap(std::span<const double> gaps_pp);

void write_rk_curve_csv(std::span<const RkCurvePoint> curve, const std::string& path);

}  // namespace ulab::eval
