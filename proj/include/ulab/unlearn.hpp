#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ulab/attacks.hpp"
#include "ulab/dataset.hpp"
#include "ulab/nn.hpp"
#include "ulab/trainer.hpp"

namespace ulab::unlearn {

enum class Method {
    retrain,
    gd,
    ngd,
    ga,
    neggrad_plus,
    eu_k,
    cf_k,
    scrub,
    fisher,
    ssd,
    cr,
    ntk,
    rurk,
};

Method method_from_string(const std::string& name);
const char* method_to_string(Method method);

struct RurkHyper {
    double tau = 0.03;
    double lambda_f = 0.03;
    double lambda_a = 0.03;
    int v = 1;
    attack::VulnMethod vuln_method = attack::VulnMethod::ball;
    attack::Kind attack_kind = attack::Kind::gaussian;  // used when vuln_method = targeted_attack
    double step_size = 2.0 / 255.0;
    int steps = 10;
    bool clamp = true;
};

struct MethodHyper {
    Method method = Method::gd;
    train::TrainConfig optim;  // lr/momentum/decay/batch/epochs/clip/schedule for the fine-tuning family
    double sigma = 0.03;       // ngd gradient noise
    double beta = 0.001;       // neggrad_plus forget weight
    int k_layers = 1;          // eu_k / cf_k parameter groups, output layer first
    double scrub_alpha = 0.001;
    double scrub_gamma = 1.0;
    double fisher_alpha = 1e-7;
    double ssd_alpha = 10.0;
    double ssd_lambda = 1.0;
    double cr_lambda = 0.1;
    double cr_l2 = 1e-2;
    RurkHyper rurk;
    std::uint64_t init_seed = 7;  // retrain/eu_k re-initialization and the ntk linearization reference
};

// A(S_r): fresh initialization, then the standard trainer on the retain set.
nn::MlpModel retrain_oracle(const data::UnlearnTask& task, const std::vector<int>& layer_dims,
                            nn::Activation activation, std::uint64_t init_seed, const train::TrainConfig& config);

// Fine-tuning family (gd, ngd, ga, neggrad_plus, eu_k, cf_k, scrub). All
// methods share one SGD engine; retain-batch shuffles, forget-batch cycling
// and noise draws use separate random streams so zero-hyperparameter limits
// coincide with gd step by step.
nn::MlpModel finetune_unlearn(const nn::MlpModel& original, const data::UnlearnTask& task, const MethodHyper& hyper,
                              std::uint64_t seed, const train::StepObserver& observer = {});

nn::MlpModel rurk_unlearn(const nn::MlpModel& original, const data::UnlearnTask& task, const MethodHyper& hyper,
                          std::uint64_t seed, const train::StepObserver& observer = {});

// Diagonal empirical Fisher on the given samples: mean squared per-sample
// loss gradient, per parameter.
std::vector<double> diag_fisher(const nn::MlpModel& model, const data::Dataset& dataset,
                                std::span<const int> indices);

// w += noise with per-parameter variance alpha / max(fisher_i, 1e-8).
void apply_fisher_noise(nn::MlpModel& model, std::span<const double> fisher, double alpha, Rng& rng);

nn::MlpModel fisher_noise_unlearn(const nn::MlpModel& original, const data::UnlearnTask& task, double fisher_alpha,
                                  std::uint64_t seed);

nn::MlpModel ssd_dampen(const nn::MlpModel& original, const data::UnlearnTask& task, double ssd_alpha,
                        double ssd_lambda);

// One-vs-rest logistic head over fixed features.
struct LogisticHead {
    std::vector<double> w;
    double b = 0.0;
};

LogisticHead train_logistic_head(const Matrix& features, std::span<const char> targets, double l2_reg,
                                 int max_iters = 100, double tol = 1e-10);

// One damped Newton step of the l2-regularized logistic loss on the given
// samples: w -= lambda * H^{-1} grad.
void newton_removal_step(LogisticHead& head, const Matrix& features, std::span<const char> targets, double l2_reg,
                         double step_lambda);

// Certified-removal style update: one-vs-rest logistic heads trained on the
// frozen hidden features of the original model over all training samples,
// then a single damped Newton step toward the retain-set minimizer. The
// result is the original model with its output layer replaced by the heads.
nn::MlpModel cr_unlearn(const nn::MlpModel& original, const data::UnlearnTask& task, double cr_lambda,
                        double l2_reg);

struct NtkDiagnostics {
    double projector_residual_inf = 0.0;  // max |(P J_r^T)_{ij}|
    double cond_estimate = 0.0;           // rough condition estimate of K(S_r,S_r)
};

struct NtkResult {
    nn::MlpModel model;
    std::optional<std::string> warning;
};

// Closed-form kernel update. Jacobians are evaluated at the original
// weights; label residuals (one-hot targets minus logits) are evaluated at
// the initialization reference, which is what makes the update exact for
// linear networks under squared loss.
NtkResult ntk_removal(const nn::MlpModel& original, const nn::MlpModel& init_reference,
                      const data::UnlearnTask& task, NtkDiagnostics* diagnostics = nullptr);

// Dispatcher used by the CLI: runs the method selected in hyper. retrain
// needs no original model but accepts one for interface uniformity.
nn::MlpModel run_unlearn(const nn::MlpModel& original, const data::UnlearnTask& task, const MethodHyper& hyper,
                         std::uint64_t seed);

}  // namespace ulab::unlearn
