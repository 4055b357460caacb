#include "ulab/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "ulab/kernels.hpp"

namespace ulab::attack {

void PerturbationSpec::validate() const {
    if (tau < 0.0) {
        throw ConfigError("attack: tau must be non-negative");
    }
    if (kind == Kind::gaussian && p != Norm::l2) {
        throw ConfigError("attack: gaussian perturbations use the l2 ball");
    }
    if ((kind == Kind::fgsm || kind == Kind::pgd) && p != Norm::linf) {
        throw ConfigError("attack: fgsm/pgd use the linf ball");
    }
    if (kind == Kind::pgd && (!(step_size > 0.0) || steps < 0)) {
        throw ConfigError("attack: pgd needs step_size > 0 and steps >= 0");
    }
    if (mc_count < 1) {
        throw ConfigError("attack: mc_count must be positive");
    }
}

Kind kind_from_string(const std::string& name) {
    if (name == "gaussian") {
        return Kind::gaussian;
    }
    if (name == "fgsm") {
        return Kind::fgsm;
    }
    if (name == "pgd") {
        return Kind::pgd;
    }
    throw ConfigError("unknown attack kind '" + name + "'");
}

Norm norm_from_string(const std::string& name) {
    if (name == "l2") {
        return Norm::l2;
    }
    if (name == "linf") {
        return Norm::linf;
    }
    throw ConfigError("unknown norm '" + name + "'");
}

const char* kind_to_string(Kind kind) {
    switch (kind) {
        case Kind::gaussian: return "gaussian";
        case Kind::fgsm: return "fgsm";
        default: return "pgd";
    }
}

const char* norm_to_string(Norm p) { return p == Norm::l2 ? "l2" : "linf"; }

std::vector<double> sample_gaussian(std::span<const double> x, double tau, bool clamp, Rng& rng) {
    std::vector<double> out(x.begin(), x.end());
    if (tau > 0.0) {
        for (double& v : out) {
            v += tau * rng.next_normal();
        }
    }
    if (clamp) {
        kernels::clamp01(out);
    }
    return out;
}

std::vector<double> fgsm(const nn::MlpModel& model, std::span<const double> x, int y, double tau, bool targeted,
                         int target_label, bool clamp) {
    if (targeted && target_label == y) {
        throw ConfigError("fgsm: target label must differ from the true label");
    }
    std::vector<double> out(x.begin(), x.end());
    if (tau > 0.0) {
        const int loss_label = targeted ? target_label : y;
        const std::vector<double> grad = nn::grad_input(model, x, loss_label);
        // untargeted ascends the true-label loss; targeted descends the
        // target-label loss
        const double magnitude = targeted ? -tau : tau;
        kernels::sign_step(out, grad, magnitude);
    }
    if (clamp) {
        kernels::clamp01(out);
    }
    return out;
}

namespace {

void project_linf(std::span<double> z, std::span<const double> x, double tau) {
    for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] = std::clamp(z[i], x[i] - tau, x[i] + tau);
    }
}

}  // namespace

std::vector<double> pgd(const nn::MlpModel& model, std::span<const double> x, int y, double tau, double step_size,
                        int steps, bool targeted, int target_label, Rng& rng, bool clamp) {
    if (targeted && target_label == y) {
        throw ConfigError("pgd: target label must differ from the true label");
    }
    if (steps < 0) {
        throw ConfigError("pgd: steps must be non-negative");
    }
    std::vector<double> z(x.begin(), x.end());
    for (double& v : z) {
        v += rng.next_uniform(-tau, tau);  // random start inside the ball
    }
    if (clamp) {
        kernels::clamp01(z);
    }
    if (tau == 0.0) {
        return {x.begin(), x.end()};
    }
    const int loss_label = targeted ? target_label : y;
    const double magnitude = targeted ? -step_size : step_size;
    for (int s = 0; s < steps; ++s) {
        const std::vector<double> grad = nn::grad_input(model, z, loss_label);
        kernels::sign_step(z, grad, magnitude);
        project_linf(z, x, tau);
        if (clamp) {
            kernels::clamp01(z);
        }
    }
    return z;
}

std::vector<double> draw_perturbation(const nn::MlpModel& model, std::span<const double> x, int y,
                                      const PerturbationSpec& spec, Rng& rng) {
    spec.validate();
    switch (spec.kind) {
        case Kind::gaussian:
            return sample_gaussian(x, spec.tau, spec.clamp, rng);
        case Kind::fgsm: {
            int target = spec.fixed_label;
            if (spec.targeted && spec.target_rule == TargetRule::random_wrong_label) {
                const int k = model.num_classes();
                if (k < 2) {
                    throw ConfigError("attack: no wrong label available");
                }
                target = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(k - 1)));
                if (target >= y) {
                    ++target;
                }
            }
            return fgsm(model, x, y, spec.tau, spec.targeted, target, spec.clamp);
        }
        case Kind::pgd:
        default: {
            int target = spec.fixed_label;
            if (spec.targeted && spec.target_rule == TargetRule::random_wrong_label) {
                const int k = model.num_classes();
                if (k < 2) {
                    throw ConfigError("attack: no wrong label available");
                }
                target = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(k - 1)));
                if (target >= y) {
                    ++target;
                }
            }
            return pgd(model, x, y, spec.tau, spec.step_size, spec.steps, spec.targeted, target, rng, spec.clamp);
        }
    }
}

std::vector<std::vector<double>> find_vulnerable(const nn::MlpModel& model, std::span<const double> x, int y,
                                                 const PerturbationSpec& spec, int v, VulnMethod method, Rng& rng) {
    if (v < 1) {
        throw ConfigError("find_vulnerable: v must be positive");
    }
    std::vector<std::vector<double>> out;
    out.reserve(static_cast<std::size_t>(v));
    if (method == VulnMethod::ball) {
        for (int i = 0; i < v; ++i) {
            out.push_back(sample_gaussian(x, spec.tau, spec.clamp, rng));
        }
        return out;
    }
    const int k = model.num_classes();
    if (k < 2) {
        throw ConfigError("find_vulnerable: no wrong label available");
    }
    for (int i = 0; i < v; ++i) {
        int target = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(k - 1)));
        if (target >= y) {
            ++target;
        }
        if (spec.kind == Kind::pgd) {
            out.push_back(pgd(model, x, y, spec.tau, spec.step_size, spec.steps, /*targeted=*/true, target, rng,
                              spec.clamp));
        } else {
            out.push_back(fgsm(model, x, y, spec.tau, /*targeted=*/true, target, spec.clamp));
        }
    }
    return out;
}

}  // namespace ulab::attack
