#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ulab/nn.hpp"
#include "ulab/rng.hpp"

namespace ulab::attack {

enum class Kind { gaussian, fgsm, pgd };
enum class Norm { l2, linf };
enum class TargetRule { random_wrong_label, fixed_label };

// Perturbation generator settings over the ball B_p(x, tau). Gaussian draws
// use standard deviation tau per coordinate (not strict ball membership);
// fgsm/pgd live in the l_inf ball.
struct PerturbationSpec {
    Kind kind = Kind::gaussian;
    Norm p = Norm::l2;
    double tau = 0.03;
    double step_size = 2.0 / 255.0;  // pgd only
    int steps = 10;                  // pgd only
    bool targeted = false;
    TargetRule target_rule = TargetRule::random_wrong_label;
    int fixed_label = 0;
    int mc_count = 100;
    bool clamp = true;

    void validate() const;
};

Kind kind_from_string(const std::string& name);
Norm norm_from_string(const std::string& name);
const char* kind_to_string(Kind kind);
const char* norm_to_string(Norm p);

std::vector<double> sample_gaussian(std::span<const double> x, double tau, bool clamp, Rng& rng);

std::vector<double> fgsm(const nn::MlpModel& model, std::span<const double> x, int y, double tau, bool targeted,
                         int target_label, bool clamp);

std::vector<double> pgd(const nn::MlpModel& model, std::span<const double> x, int y, double tau, double step_size,
                        int steps, bool targeted, int target_label, Rng& rng, bool clamp);

// One perturbation drawn according to spec, attacking `model`. Targeted
// attacks pick a random wrong label from rng unless the rule pins one.
std::vector<double> draw_perturbation(const nn::MlpModel& model, std::span<const double> x, int y,
                                      const PerturbationSpec& spec, Rng& rng);

enum class VulnMethod { ball, targeted_attack };

// v candidate perturbations around a forget sample on which the model may
// still recognize the true label. ball: plain Gaussian draws (the efficient
// approximation V = B_p(x, tau)); targeted_attack: targeted fgsm/pgd toward
// a random wrong label per draw.
std::vector<std::vector<double>> find_vulnerable(const nn::MlpModel& model, std::span<const double> x, int y,
                                                 const PerturbationSpec& spec, int v, VulnMethod method, Rng& rng);

}  // namespace ulab::attack
