#include <doctest.h>

#include <cmath>

#include "ulab/dataset.hpp"
#include "ulab/rng.hpp"
#include "ulab/theory.hpp"
#include "ulab/trainer.hpp"

using namespace ulab;

namespace {

theory::FiniteDist bernoulli(double p1, const char* zero = "0", const char* one = "1") {
    return {{zero, one}, {1.0 - p1, p1}};
}

// Literal two-sided indistinguishability check over every subset of the
// union support; the
// independent oracle the extremal-set implementation is compared against.
bool exhaustive_indist(const theory::FiniteDist& p, const theory::FiniteDist& q, double eps, double delta) {
    const std::size_t n = p.support.size();
    const double scale = std::exp(eps);
    for (std::size_t mask = 0; mask < (1u << n); ++mask) {
        double pm = 0.0, qm = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
                pm += p.probs[i];
                qm += q.probs[i];
            }
        }
        if (pm > scale * qm + delta) {
            return false;
        }
        if (qm > scale * pm + delta) {
            return false;
        }
    }
    return true;
}

theory::FiniteDist random_dist(Rng& rng, int support) {
    theory::FiniteDist d;
    double total = 0.0;
    for (int i = 0; i < support; ++i) {
        d.support.push_back("z" + std::to_string(i));
        d.probs.push_back(-std::log(1.0 - rng.next_unit()));
        total += d.probs.back();
    }
    for (double& v : d.probs) {
        v /= total;
    }
    return d;
}

}  // namespace

TEST_CASE("finite distributions validate mass and normalization") {
    theory::FiniteDist bad{{"a", "b"}, {0.5, 0.6}};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    theory::FiniteDist neg{{"a", "b"}, {-0.1, 1.1}};
    CHECK_THROWS_AS(neg.validate(), ConfigError);
    CHECK_NOTHROW(bernoulli(0.3).validate());
}

TEST_CASE("indist_check: identical distributions hold for every epsilon and delta") {
    const auto p = bernoulli(0.37);
    CHECK(theory::indist_check(p, p, 0.0, 0.0).holds);
    CHECK(theory::indist_check(p, p, 1.0, 0.0).holds);
    CHECK(theory::indist_check(p, p, 0.0, 0.5).holds);
}

TEST_CASE("indist_check: Bernoulli(0.6) vs Bernoulli(0.5), values frozen from the exhaustive oracle") {
    const auto p = bernoulli(0.6);
    const auto q = bernoulli(0.5);

    // oracle evaluations over all four subsets
    CHECK(exhaustive_indist(p, q, 0.0, 0.1));
    CHECK_FALSE(exhaustive_indist(p, q, 0.0, 0.05));
    CHECK_FALSE(exhaustive_indist(p, q, std::log(1.2), 0.0));
    CHECK(exhaustive_indist(p, q, std::log(1.25), 0.0));

    // implementation agrees with the oracle on each case
    CHECK(theory::indist_check(p, q, 0.0, 0.1).holds);
    CHECK_FALSE(theory::indist_check(p, q, 0.0, 0.05).holds);
    CHECK_FALSE(theory::indist_check(p, q, std::log(1.2), 0.0).holds);
    CHECK(theory::indist_check(p, q, std::log(1.25), 0.0).holds);

    // the binding subset at eps = ln 1.2 is {0}: Q(0) - 1.2 P(0) = 0.02
    CHECK(theory::min_delta(p, q, std::log(1.2)) == doctest::Approx(0.02));
    const auto failing = theory::indist_check(p, q, std::log(1.2), 0.0);
    REQUIRE(failing.witness.size() == 1);
    CHECK(failing.witness[0] == "0");
}

TEST_CASE("indist_check: extremal sets agree with exhaustive enumeration on random pairs") {
    Rng rng(555);
    for (int trial = 0; trial < 500; ++trial) {
        const int support = 2 + static_cast<int>(rng.next_below(5));
        const auto p = random_dist(rng, support);
        const auto q = random_dist(rng, support);
        const double eps = rng.next_unit();
        const double delta = rng.next_unit() * 0.5;
        CHECK(theory::indist_check(p, q, eps, delta).holds == exhaustive_indist(p, q, eps, delta));
    }
}

TEST_CASE("indist_check: disjoint point masses fail below delta = 1") {
    const theory::FiniteDist p{{"a"}, {1.0}};
    const theory::FiniteDist q{{"b"}, {1.0}};
    CHECK_FALSE(theory::indist_check(p, q, 10.0, 0.99).holds);
    CHECK(theory::indist_check(p, q, 10.0, 1.0).holds);
}

TEST_CASE("indist_check verdict is symmetric under swapping the distributions") {
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
        const auto p = random_dist(rng, 4);
        const auto q = random_dist(rng, 4);
        const double eps = rng.next_unit();
        const double delta = rng.next_unit() * 0.3;
        CHECK(theory::indist_check(p, q, eps, delta).holds == theory::indist_check(q, p, eps, delta).holds);
    }
}

TEST_CASE("ratio_violation_mass: direct evaluation on the Bernoulli pair") {
    const auto p = bernoulli(0.6);
    const auto q = bernoulli(0.5);
    CHECK_THROWS_AS(theory::ratio_violation_mass(p, q, 0.0), ConfigError);

    const auto self_mass = theory::ratio_violation_mass(p, p, 0.3);
    CHECK(self_mass.mass_p == 0.0);
    CHECK(self_mass.mass_q == 0.0);

    // eps = ln 1.05: the band is [1/1.1025, 1.1025]; both support points
    // violate it (ratios 0.8 and 1.2), so the whole mass is violating
    const auto mass = theory::ratio_violation_mass(p, q, std::log(1.05));
    CHECK(mass.mass_p == doctest::Approx(1.0));
    CHECK(mass.mass_q == doctest::Approx(1.0));
    // and the violation-mass bound is vacuous here: 2 delta / (1 - e^-eps) > 1
    const double delta = theory::min_delta(p, q, std::log(1.05));
    CHECK(2.0 * delta / (1.0 - std::exp(-std::log(1.05))) > 1.0);
}

TEST_CASE("violation-mass sweep: mass never exceeds 2 delta / (1 - e^-eps)") {
    Rng rng(999);
    for (int trial = 0; trial < 2000; ++trial) {
        const int support = 2 + static_cast<int>(rng.next_below(5));
        const auto p = random_dist(rng, support);
        const auto q = random_dist(rng, support);
        const double eps = 0.01 + rng.next_unit();
        const double delta = theory::min_delta(p, q, eps);
        REQUIRE(theory::indist_check(p, q, eps, delta).holds);
        const auto mass = theory::ratio_violation_mass(p, q, eps);
        const double bound = 2.0 * delta / (1.0 - std::exp(-eps));
        CHECK(mass.mass_p <= bound);
        CHECK(mass.mass_q <= bound);
    }
}

TEST_CASE("hemisphere expansion: tau = 0 recovers the hemisphere measure") {
    const auto result = theory::hemisphere_expansion(20, 0.0, 50000, 8);
    const double sigma = std::sqrt(0.25 / result.n_samples);
    CHECK(std::abs(result.empirical - 0.5) < 3.0 * sigma);
    CHECK(result.bound == doctest::Approx(1.0 - std::sqrt(3.14159265358979323846 / 8.0)));
}

TEST_CASE("hemisphere expansion: d=100 tau=0.3 bound value and 3-sigma dominance") {
    const auto result = theory::hemisphere_expansion(100, 0.3, 100000, 12);
    CHECK(result.bound == doctest::Approx(0.992718).epsilon(1e-4));
    CHECK(std::abs(result.bound - 0.99271) < 2e-5);
    const double sigma = std::sqrt(result.bound * (1.0 - result.bound) / result.n_samples);
    CHECK(result.empirical >= result.bound - 3.0 * sigma);
}

TEST_CASE("hemisphere expansion is exactly monotone in tau on shared samples") {
    const std::vector<double> taus = {0.0, 0.1, 0.2, 0.3, 0.5, 1.0};
    const auto results = theory::hemisphere_expansion_grid(50, taus, 20000, 31);
    for (std::size_t i = 1; i < results.size(); ++i) {
        CHECK(results[i].empirical >= results[i - 1].empirical);
    }
    CHECK_THROWS_AS(theory::hemisphere_expansion(2, 0.1, 20000, 1), ConfigError);
    CHECK_THROWS_AS(theory::hemisphere_expansion(10, 0.1, 100, 1), ConfigError);
}

TEST_CASE("disagreement_probability_bound: limits and direct evaluation") {
    CHECK(theory::disagreement_probability_bound(0.0, 0.0, 0.1, 100) == 0.0);
    CHECK(std::abs(theory::disagreement_probability_bound(1000.0, 0.05, 0.1, 100) - 0.1) < 1e-6);

    // direct formula evaluation at (eps=1, delta=0.05, tau=0.1, d=100)
    const double prefactor = 2.0 * 0.05 / (1.0 - std::exp(-1.0));
    const double brace = 1.0 - std::sqrt(3.14159265358979323846 / 8.0) * std::exp(-2.0 - 0.5 * 99.0 * 0.01);
    CHECK(theory::disagreement_probability_bound(1.0, 0.05, 0.1, 100) == doctest::Approx(prefactor * brace).epsilon(1e-12));
}

TEST_CASE("disagreement_probability_bound is non-decreasing in delta and tau") {
    double prev = -1.0;
    for (double delta : {0.0, 0.01, 0.05, 0.1, 0.2}) {
        const double value = theory::disagreement_probability_bound(0.5, delta, 0.1, 50);
        CHECK(value >= prev);
        prev = value;
    }
    prev = -1.0;
    for (double tau : {0.0, 0.1, 0.2, 0.4, 0.8}) {
        const double value = theory::disagreement_probability_bound(0.5, 0.05, tau, 50);
        CHECK(value >= prev);
        prev = value;
    }
}

TEST_CASE("min_l2_readout: closed-form value") {
    nn::MlpModel model;
    model.layer_dims = {2, 2};
    model.activation = nn::Activation::relu;
    Matrix w(2, 2);
    w(1, 0) = 1.0;
    w(1, 1) = -1.0;
    model.weights.push_back(w);
    model.biases.push_back({0.0, 0.0});
    // g = x - (x.x) w / ||w||^2 with w = (1,-1), x = (1,1): x.x = 2, ||w||^2 = 2
    const std::vector<double> x = {1.0, 1.0};
    const auto g = theory::min_l2_readout(model, x);
    CHECK(g[0] == doctest::Approx(0.0));
    CHECK(g[1] == doctest::Approx(2.0));
}

TEST_CASE("readout_ratio_experiment: identical ensembles give unit ratios") {
    Rng rng(2);
    std::vector<nn::MlpModel> ensemble;
    for (int i = 0; i < 120; ++i) {
        ensemble.push_back(nn::init_params({2, 2}, nn::Activation::relu, rng.next_u64()));
    }
    const std::vector<double> x = {0.4, 0.7};
    const auto result = theory::readout_ratio_experiment(ensemble, ensemble, x, 8);
    CHECK(result.eps_hat == doctest::Approx(0.0));
    CHECK(result.bins_outside_amplified == 0);
    for (const auto& bin : result.bins) {
        if (bin.count_m > 0 && bin.count_a > 0) {
            CHECK(bin.ratio == doctest::Approx(1.0));
        }
    }

    std::vector<nn::MlpModel> tiny(ensemble.begin(), ensemble.begin() + 50);
    CHECK_THROWS_AS(theory::readout_ratio_experiment(tiny, ensemble, x, 8), ConfigError);
}

TEST_CASE("readout_ratio_experiment: disjoint seed ranges of one pipeline stay near unit ratios") {
    const data::Dataset ds = data::gen_blobs(2, 20, 2, 0.15, 61);
    std::vector<int> all(ds.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
        all[i] = static_cast<int>(i);
    }
    const auto train_one = [&](std::uint64_t seed) {
        train::TrainConfig cfg;
        cfg.lr0 = 0.05;
        cfg.batch_size = 10;
        cfg.epochs = 10;
        cfg.seed = seed;
        return train::train(nn::init_params({2, 2}, nn::Activation::relu, seed), ds, all, cfg).model;
    };
    std::vector<nn::MlpModel> first, second;
    for (std::uint64_t s = 0; s < 100; ++s) {
        first.push_back(train_one(s));
        second.push_back(train_one(1000 + s));
    }
    const std::vector<double> x = {0.5, 0.5};
    const auto result = theory::readout_ratio_experiment(first, second, x, 6);
    CHECK(result.defined_ratio_bins > 0);
    // sanity only: same-pipeline ensembles should not be wildly distinguishable
    double median_abs_log = 0.0;
    std::vector<double> logs;
    for (const auto& bin : result.bins) {
        if (bin.count_m > 0 && bin.count_a > 0) {
            logs.push_back(std::abs(std::log(bin.ratio)));
        }
    }
    std::sort(logs.begin(), logs.end());
    median_abs_log = logs[logs.size() / 2];
    CHECK(median_abs_log < std::log(3.0));
}
