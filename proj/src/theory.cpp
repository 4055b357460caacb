#include "ulab/theory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "ulab/kernels.hpp"
#include "ulab/rng.hpp"

namespace ulab::theory {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct UnionSupport {
    std::vector<std::string> names;
    std::vector<double> p;
    std::vector<double> q;
};

UnionSupport union_support(const FiniteDist& p, const FiniteDist& q) {
    std::map<std::string, std::pair<double, double>> merged;
    for (std::size_t i = 0; i < p.support.size(); ++i) {
        merged[p.support[i]].first += p.probs[i];
    }
    for (std::size_t i = 0; i < q.support.size(); ++i) {
        merged[q.support[i]].second += q.probs[i];
    }
    UnionSupport u;
    for (const auto& [name, mass] : merged) {
        u.names.push_back(name);
        u.p.push_back(mass.first);
        u.q.push_back(mass.second);
    }
    return u;
}

}  // namespace

void FiniteDist::validate() const {
    if (support.size() != probs.size() || support.empty()) {
        throw ConfigError("finite distribution: support and probability sizes must match and be non-empty");
    }
    double total = 0.0;
    for (double v : probs) {
        if (v < 0.0) {
            throw ConfigError("finite distribution: negative mass");
        }
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-12) {
        throw ConfigError("finite distribution: probabilities sum to " + std::to_string(total));
    }
}

IndistResult indist_check(const FiniteDist& p, const FiniteDist& q, double epsilon, double delta) {
    p.validate();
    q.validate();
    if (epsilon < 0.0 || delta < 0.0) {
        throw ConfigError("indist_check: epsilon and delta must be non-negative");
    }
    const UnionSupport u = union_support(p, q);
    const double scale = std::exp(epsilon);

    IndistResult result;
    std::vector<std::string> witness_pq;
    std::vector<std::string> witness_qp;
    for (std::size_t i = 0; i < u.names.size(); ++i) {
        const double over_p = u.p[i] - scale * u.q[i];
        if (over_p > 0.0) {
            result.excess_p_over_q += over_p;
            witness_pq.push_back(u.names[i]);
        }
        const double over_q = u.q[i] - scale * u.p[i];
        if (over_q > 0.0) {
            result.excess_q_over_p += over_q;
            witness_qp.push_back(u.names[i]);
        }
    }
    result.holds = result.excess_p_over_q <= delta && result.excess_q_over_p <= delta;
    if (!result.holds) {
        result.witness = result.excess_p_over_q > delta ? witness_pq : witness_qp;
    }
    return result;
}

double min_delta(const FiniteDist& p, const FiniteDist& q, double epsilon) {
    const IndistResult at_zero = indist_check(p, q, epsilon, 0.0);
    return std::max(at_zero.excess_p_over_q, at_zero.excess_q_over_p);
}

ViolationMass ratio_violation_mass(const FiniteDist& p, const FiniteDist& q, double epsilon) {
    if (!(epsilon > 0.0)) {
        throw ConfigError("ratio_violation_mass: epsilon must be positive (bound undefined at 0)");
    }
    p.validate();
    q.validate();
    const UnionSupport u = union_support(p, q);
    const double hi = std::exp(2.0 * epsilon);
    const double lo = std::exp(-2.0 * epsilon);

    ViolationMass mass;
    for (std::size_t i = 0; i < u.names.size(); ++i) {
        const double pv = u.p[i];
        const double qv = u.q[i];
        if (pv == 0.0 && qv == 0.0) {
            continue;
        }
        const bool violates = pv > hi * qv || pv < lo * qv;
        if (violates) {
            mass.mass_p += pv;
            mass.mass_q += qv;
        }
    }
    return mass;
}

std::vector<HemisphereResult> hemisphere_expansion_grid(int d, std::span<const double> taus, int n_samples,
                                                        std::uint64_t seed) {
    if (d < 3) {
        throw ConfigError("hemisphere_expansion: d must be at least 3");
    }
    if (n_samples < 10000) {
        throw ConfigError("hemisphere_expansion: need at least 1e4 samples");
    }
    for (double tau : taus) {
        if (tau < 0.0) {
            throw ConfigError("hemisphere_expansion: tau must be non-negative");
        }
    }

    // For each uniform sphere point only x_1 = g_1 / ||g|| matters; all tau
    // thresholds are evaluated on the same draws, so the empirical measure
    // is exactly non-decreasing in tau.
    std::vector<std::int64_t> hits(taus.size(), 0);
    std::vector<double> thresholds(taus.size());
    for (std::size_t t = 0; t < taus.size(); ++t) {
        const double cap_angle = 2.0 * std::asin(std::min(taus[t], 2.0) / 2.0);
        thresholds[t] = -std::sin(std::min(cap_angle, kPi / 2.0));
    }

    Rng rng(Rng::mix(seed, 0x5048));
    for (int i = 0; i < n_samples; ++i) {
        double first = rng.next_normal();
        double sumsq = first * first;
        for (int j = 1; j < d; ++j) {
            const double g = rng.next_normal();
            sumsq += g * g;
        }
        const double x1 = first / std::sqrt(sumsq);
        for (std::size_t t = 0; t < taus.size(); ++t) {
            if (x1 >= thresholds[t]) {
                ++hits[t];
            }
        }
    }

    std::vector<HemisphereResult> results(taus.size());
    for (std::size_t t = 0; t < taus.size(); ++t) {
        results[t].n_samples = n_samples;
        results[t].empirical = static_cast<double>(hits[t]) / static_cast<double>(n_samples);
        results[t].bound =
            1.0 - std::sqrt(kPi / 8.0) * std::exp(-0.5 * static_cast<double>(d - 1) * taus[t] * taus[t]);
    }
    return results;
}

HemisphereResult hemisphere_expansion(int d, double tau, int n_samples, std::uint64_t seed) {
    const double taus[1] = {tau};
    return hemisphere_expansion_grid(d, taus, n_samples, seed)[0];
}

double disagreement_probability_bound(double epsilon, double delta, double tau, int d) {
    if (epsilon < 0.0 || delta < 0.0 || tau < 0.0 || d < 2) {
        throw ConfigError("disagreement_probability_bound: invalid arguments");
    }
    if (epsilon == 0.0 && delta == 0.0) {
        return 0.0;  // L'Hopital limit with delta proportional to epsilon
    }
    if (epsilon == 0.0) {
        return 1.0;
    }
    const double prefactor = 2.0 * delta / (1.0 - std::exp(-epsilon));
    const double brace =
        1.0 - std::sqrt(kPi / 8.0) * std::exp(-2.0 * epsilon - 0.5 * static_cast<double>(d - 1) * tau * tau);
    return std::clamp(prefactor * brace, 0.0, 1.0);
}

std::vector<double> min_l2_readout(const nn::MlpModel& model, std::span<const double> x) {
    if (model.num_layers() != 1 || model.num_classes() != 2) {
        throw ConfigError("min_l2_readout: needs a single-layer binary model");
    }
    // discriminant direction of the two-logit model
    std::vector<double> w(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
        w[j] = model.weights[0](1, j) - model.weights[0](0, j);
    }
    const double wnorm2 = kernels::sumsq(w);
    if (wnorm2 == 0.0) {
        throw NumericError("min_l2_readout: zero discriminant");
    }
    const double xdotx = kernels::sumsq(x);
    std::vector<double> out(x.begin(), x.end());
    kernels::axpy(-xdotx / wnorm2, w, out);
    return out;
}

ReadoutRatioResult readout_ratio_experiment(std::span<const nn::MlpModel> ensemble_m,
                                            std::span<const nn::MlpModel> ensemble_a, std::span<const double> x,
                                            int bins_per_dim) {
    if (ensemble_m.size() < 100 || ensemble_a.size() < 100) {
        throw ConfigError("readout_ratio_experiment: ensembles need at least 100 models each");
    }
    if (bins_per_dim < 2) {
        throw ConfigError("readout_ratio_experiment: need at least 2 bins per dimension");
    }
    const std::size_t dim = x.size();

    std::vector<std::vector<double>> readouts_m;
    std::vector<std::vector<double>> readouts_a;
    readouts_m.reserve(ensemble_m.size());
    readouts_a.reserve(ensemble_a.size());
    for (const auto& model : ensemble_m) {
        readouts_m.push_back(min_l2_readout(model, x));
    }
    for (const auto& model : ensemble_a) {
        readouts_a.push_back(min_l2_readout(model, x));
    }

    // fixed grid over the bounding box of all readouts
    std::vector<double> lo(dim, 1e300), hi(dim, -1e300);
    for (const auto* batch : {&readouts_m, &readouts_a}) {
        for (const auto& r : *batch) {
            for (std::size_t j = 0; j < dim; ++j) {
                lo[j] = std::min(lo[j], r[j]);
                hi[j] = std::max(hi[j], r[j]);
            }
        }
    }
    const auto cell_of = [&](const std::vector<double>& r) {
        std::vector<int> cell(dim);
        for (std::size_t j = 0; j < dim; ++j) {
            const double range = hi[j] - lo[j];
            int c = range > 0.0
                        ? static_cast<int>(std::floor((r[j] - lo[j]) / range * static_cast<double>(bins_per_dim)))
                        : 0;
            cell[j] = std::clamp(c, 0, bins_per_dim - 1);
        }
        return cell;
    };

    std::map<std::vector<int>, std::pair<int, int>> readout_bins;
    for (const auto& r : readouts_m) {
        readout_bins[cell_of(r)].first += 1;
    }
    for (const auto& r : readouts_a) {
        readout_bins[cell_of(r)].second += 1;
    }

    // model-level "distribution": bin the discriminant directions themselves
    std::map<std::vector<int>, std::pair<int, int>> model_bins;
    {
        std::vector<std::vector<double>> dirs_m, dirs_a;
        const auto discriminant = [](const nn::MlpModel& model) {
            std::vector<double> w(model.weights[0].cols());
            for (std::size_t j = 0; j < w.size(); ++j) {
                w[j] = model.weights[0](1, j) - model.weights[0](0, j);
            }
            return w;
        };
        for (const auto& model : ensemble_m) {
            dirs_m.push_back(discriminant(model));
        }
        for (const auto& model : ensemble_a) {
            dirs_a.push_back(discriminant(model));
        }
        std::vector<double> wlo(dim, 1e300), whi(dim, -1e300);
        for (const auto* batch : {&dirs_m, &dirs_a}) {
            for (const auto& w : *batch) {
                for (std::size_t j = 0; j < dim; ++j) {
                    wlo[j] = std::min(wlo[j], w[j]);
                    whi[j] = std::max(whi[j], w[j]);
                }
            }
        }
        const auto wcell = [&](const std::vector<double>& w) {
            std::vector<int> cell(dim);
            for (std::size_t j = 0; j < dim; ++j) {
                const double range = whi[j] - wlo[j];
                int c = range > 0.0 ? static_cast<int>(std::floor((w[j] - wlo[j]) / range *
                                                                  static_cast<double>(bins_per_dim)))
                                    : 0;
                cell[j] = std::clamp(c, 0, bins_per_dim - 1);
            }
            return cell;
        };
        for (const auto& w : dirs_m) {
            model_bins[wcell(w)].first += 1;
        }
        for (const auto& w : dirs_a) {
            model_bins[wcell(w)].second += 1;
        }
    }

    ReadoutRatioResult result;
    const double nm = static_cast<double>(ensemble_m.size());
    const double na = static_cast<double>(ensemble_a.size());
    for (const auto& [cell, counts] : model_bins) {
        if (counts.first > 0 && counts.second > 0) {
            const double ratio = (static_cast<double>(counts.first) / nm) / (static_cast<double>(counts.second) / na);
            result.eps_hat = std::max(result.eps_hat, std::abs(std::log(ratio)));
        }
    }
    const double hi_ratio = std::exp(2.0 * result.eps_hat);
    const double lo_ratio = std::exp(-2.0 * result.eps_hat);
    for (const auto& [cell, counts] : readout_bins) {
        ReadoutBin bin;
        bin.cell = cell;
        bin.count_m = counts.first;
        bin.count_a = counts.second;
        if (counts.first > 0 && counts.second > 0) {
            bin.ratio = (static_cast<double>(counts.first) / nm) / (static_cast<double>(counts.second) / na);
            ++result.defined_ratio_bins;
            if (bin.ratio > hi_ratio || bin.ratio < lo_ratio) {
                ++result.bins_outside_amplified;
            }
        }
        result.bins.push_back(std::move(bin));
    }
    return result;
}

void write_theory_report_csv(std::span<const TheoryReportRow> rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw ParseError("cannot open '" + path + "' for writing");
    }
    out << "name,parameters,bound,empirical,verdict\n";
    char buf[64];
    for (const auto& row : rows) {
        out << row.name << ',' << row.parameters << ',';
        std::snprintf(buf, sizeof(buf), "%.6g", row.bound);
        out << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.6g", row.empirical);
        out << buf << ',' << (row.pass ? "pass" : "fail") << '\n';
    }
}

}  // namespace ulab::theory
