#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ulab/nn.hpp"

namespace ulab::theory {

// Finite distribution over named outcomes.
struct FiniteDist {
    std::vector<std::string> support;
    std::vector<double> probs;

    void validate() const;
};

struct IndistParams {
    double epsilon = 0.0;
    double delta = 0.0;
    double alpha = 2.0;  // Renyi order, reserved; no operation consumes it
};

struct IndistResult {
    bool holds = false;
    // worst-case slack of each direction: max_T (Pr[P in T] - e^eps Pr[Q in T])
    // and the mirror; the pair must both be <= delta
    double excess_p_over_q = 0.0;
    double excess_q_over_p = 0.0;
    std::vector<std::string> witness;  // a violating subset when !holds
};

// Two-sided (eps, delta)-indistinguishability over the union support. For
// finite supports the binding subsets are the extremal sets
// {z : P(z) > e^eps Q(z)} and its mirror.
IndistResult indist_check(const FiniteDist& p, const FiniteDist& q, double epsilon, double delta);

struct ViolationMass {
    double mass_p = 0.0;  // P-mass of {z : P(z)/Q(z) outside [e^-2eps, e^2eps]}
    double mass_q = 0.0;
};

ViolationMass ratio_violation_mass(const FiniteDist& p, const FiniteDist& q, double epsilon);

// Smallest delta at which (eps, delta) holds, from the extremal subsets.
double min_delta(const FiniteDist& p, const FiniteDist& q, double epsilon);

struct HemisphereResult {
    double empirical = 0.0;  // fraction of sphere samples inside the tau-expansion
    double bound = 0.0;      // 1 - sqrt(pi/8) exp(-(d-1) tau^2 / 2)
    int n_samples = 0;
};

// Monte-Carlo measure of the l2 tau-expansion of the hemisphere {x_1 >= 0}
// on S^{d-1}. Membership test: x_1 >= -sin(2 asin(tau/2)) (chord-to-cap).
// All taus are evaluated on one shared sample set per seed.
HemisphereResult hemisphere_expansion(int d, double tau, int n_samples, std::uint64_t seed);
std::vector<HemisphereResult> hemisphere_expansion_grid(int d, std::span<const double> taus, int n_samples,
                                                        std::uint64_t seed);

// (2 delta / (1 - e^-eps)) * (1 - sqrt(pi/8) exp(-2 eps - (d-1) tau^2 / 2)),
// clamped into [0,1]; the big-O constant is taken as 1. eps = delta = 0
// returns the limit 0.
double disagreement_probability_bound(double epsilon, double delta, double tau, int d);

// Minimum l2-norm adversarial perturbation readout for a binary linear
// classifier: g_x(w) = x - (x^T x) w / ||w||^2, with w the logit-difference
// direction of a 2-class single-layer model.
std::vector<double> min_l2_readout(const nn::MlpModel& model, std::span<const double> x);

struct ReadoutBin {
    std::vector<int> cell;
    int count_m = 0;
    int count_a = 0;
    double ratio = 0.0;  // count_m / count_a over occupied-by-both bins
};

struct ReadoutRatioResult {
    std::vector<ReadoutBin> bins;          // bins occupied by at least one ensemble
    double eps_hat = 0.0;                // max |log ratio| over model-level bins
    int bins_outside_amplified = 0;      // readout bins with ratio outside [e^-2eps, e^2eps]
    int defined_ratio_bins = 0;
};

ReadoutRatioResult readout_ratio_experiment(std::span<const nn::MlpModel> ensemble_m,
                                            std::span<const nn::MlpModel> ensemble_a, std::span<const double> x,
                                            int bins_per_dim);

struct TheoryReportRow {
    std::string name;
    std::string parameters;
    double bound = 0.0;
    double empirical = 0.0;
    bool pass = false;
};

void write_theory_report_csv(std::span<const TheoryReportRow> rows, const std::string& path);

}  // namespace ulab::theory
