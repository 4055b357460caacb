#include <doctest.h>

#include <cmath>

#include "ulab/attacks.hpp"
#include "ulab/nn.hpp"
#include "ulab/rng.hpp"

using namespace ulab;

namespace {

nn::MlpModel binary_logistic(double w0, double w1) {
    nn::MlpModel model;
    model.layer_dims = {2, 2};
    model.activation = nn::Activation::relu;
    Matrix w(2, 2);
    w(1, 0) = w0;
    w(1, 1) = w1;
    model.weights.push_back(w);
    model.biases.push_back({0.0, 0.0});
    return model;
}

nn::MlpModel constant_head(int num_classes, int winner, std::size_t dim) {
    nn::MlpModel model;
    model.layer_dims = {static_cast<int>(dim), num_classes};
    model.activation = nn::Activation::relu;
    model.weights.emplace_back(static_cast<std::size_t>(num_classes), dim);
    std::vector<double> bias(static_cast<std::size_t>(num_classes), 0.0);
    bias[static_cast<std::size_t>(winner)] = 100.0;
    model.biases.push_back(std::move(bias));
    return model;
}

}  // namespace

TEST_CASE("sample_gaussian: zero radius is the identity") {
    Rng rng(1);
    const std::vector<double> x = {0.2, 0.8, 0.5};
    const auto xp = attack::sample_gaussian(x, 0.0, true, rng);
    CHECK(xp == x);
}

TEST_CASE("sample_gaussian: squared displacement matches d*tau^2") {
    // chi-square moment oracle: E||eps||^2 = d tau^2, Var(||eps||^2) = 2 d tau^4
    Rng rng(99);
    const std::vector<double> x = {0.3, 0.5, 0.7, 0.4};
    const double tau = 0.01;
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto xp = attack::sample_gaussian(x, tau, true, rng);
        double d2 = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
            d2 += (xp[j] - x[j]) * (xp[j] - x[j]);
        }
        sum += d2;
    }
    const double mean = sum / n;
    const double expected = 4.0 * tau * tau;
    const double se = std::sqrt(2.0 * 4.0) * tau * tau / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(mean - expected) < 3.0 * se);
}

TEST_CASE("sample_gaussian: clamp keeps boundary coordinates inside [0,1]") {
    Rng rng(5);
    const std::vector<double> x = {1.0, 0.0, 0.5};
    for (int i = 0; i < 1000; ++i) {
        const auto xp = attack::sample_gaussian(x, 0.3, true, rng);
        CHECK(xp[0] <= 1.0);
        CHECK(xp[1] >= 0.0);
        CHECK(xp[2] >= 0.0);
        CHECK(xp[2] <= 1.0);
    }
}

TEST_CASE("fgsm: analytic logistic case") {
    // grad_x loss = (-0.5, 0.5) at x=(0.5,0.5), so the untargeted step is
    // x + tau * sign(grad) = (0.4, 0.6)
    const nn::MlpModel model = binary_logistic(1.0, -1.0);
    const std::vector<double> x = {0.5, 0.5};
    const auto xp = attack::fgsm(model, x, 1, 0.1, false, 0, true);
    CHECK(xp[0] == doctest::Approx(0.4).epsilon(1e-12));
    CHECK(xp[1] == doctest::Approx(0.6).epsilon(1e-12));

    const auto same = attack::fgsm(model, x, 1, 0.0, false, 0, true);
    CHECK(same == x);

    CHECK_THROWS_AS(attack::fgsm(model, x, 1, 0.1, true, 1, true), ConfigError);
}

TEST_CASE("fgsm: untargeted step increases the true-label loss on a logistic model") {
    const nn::MlpModel model = binary_logistic(1.5, -0.7);
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x = {rng.next_unit(), rng.next_unit()};
        const int y = static_cast<int>(rng.next_below(2));
        const auto xp = attack::fgsm(model, x, y, 0.05, false, 0, false);
        nn::Batch before{Matrix(1, 2), {y}};
        nn::Batch after{Matrix(1, 2), {y}};
        std::copy(x.begin(), x.end(), before.inputs.row(0).begin());
        std::copy(xp.begin(), xp.end(), after.inputs.row(0).begin());
        const double loss_before = nn::grad_params(model, before).first;
        const double loss_after = nn::grad_params(model, after).first;
        CHECK(loss_after > loss_before);
        for (std::size_t j = 0; j < x.size(); ++j) {
            CHECK(std::abs(xp[j] - x[j]) <= 0.05 + 1e-12);
        }
    }
}

TEST_CASE("pgd: zero steps is a uniform draw inside the ball") {
    const nn::MlpModel model = binary_logistic(1.0, -1.0);
    Rng rng(7);
    const std::vector<double> x = {0.5, 0.5};
    for (int i = 0; i < 1000; ++i) {
        const auto xp = attack::pgd(model, x, 1, 0.1, 0.01, 0, false, 0, rng, true);
        for (std::size_t j = 0; j < x.size(); ++j) {
            CHECK(std::abs(xp[j] - x[j]) <= 0.1 + 1e-12);
        }
    }
}

TEST_CASE("pgd: zero radius returns x regardless of steps") {
    const nn::MlpModel model = binary_logistic(1.0, -1.0);
    Rng rng(11);
    const std::vector<double> x = {0.4, 0.6};
    const auto xp = attack::pgd(model, x, 1, 0.0, 0.01, 25, false, 0, rng, true);
    CHECK(xp == x);
}

TEST_CASE("pgd: on a linear model enough steps reach the fgsm corner") {
    const nn::MlpModel model = binary_logistic(2.0, -1.0);
    const std::vector<double> x = {0.5, 0.5};
    const double tau = 0.08;
    const double step = 0.01;
    const int steps = static_cast<int>(std::ceil(2.0 * tau / step)) + 2;
    const auto corner = attack::fgsm(model, x, 1, tau, false, 0, true);
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const auto xp = attack::pgd(model, x, 1, tau, step, steps, false, 0, rng, true);
        for (std::size_t j = 0; j < x.size(); ++j) {
            CHECK(xp[j] == doctest::Approx(corner[j]).epsilon(1e-9));
        }
    }
}

TEST_CASE("pgd determinism under a fixed stream") {
    const nn::MlpModel model = binary_logistic(1.0, -1.0);
    const std::vector<double> x = {0.5, 0.5};
    Rng a(21), b(21);
    const auto xa = attack::pgd(model, x, 1, 0.05, 0.01, 5, false, 0, a, true);
    const auto xb = attack::pgd(model, x, 1, 0.05, 0.01, 5, false, 0, b, true);
    CHECK(xa == xb);
}

TEST_CASE("find_vulnerable: ball method matches plain gaussian draws") {
    const nn::MlpModel model = binary_logistic(1.0, -1.0);
    const std::vector<double> x = {0.5, 0.5};
    attack::PerturbationSpec spec;
    spec.tau = 0.03;
    Rng a(31), b(31);
    const auto points = attack::find_vulnerable(model, x, 1, spec, 3, attack::VulnMethod::ball, a);
    REQUIRE(points.size() == 3);
    for (const auto& p : points) {
        CHECK(p == attack::sample_gaussian(x, 0.03, true, b));
    }
}

TEST_CASE("find_vulnerable: targeted attacks stay inside the linf ball") {
    const nn::MlpModel model = binary_logistic(1.0, -1.0);
    const std::vector<double> x = {0.5, 0.5};
    attack::PerturbationSpec spec;
    spec.kind = attack::Kind::pgd;
    spec.p = attack::Norm::linf;
    spec.tau = 0.04;
    spec.step_size = 0.01;
    spec.steps = 8;
    Rng rng(41);
    const auto points = attack::find_vulnerable(model, x, 1, spec, 5, attack::VulnMethod::targeted_attack, rng);
    for (const auto& p : points) {
        for (std::size_t j = 0; j < x.size(); ++j) {
            CHECK(std::abs(p[j] - x[j]) <= 0.04 + 1e-12);
        }
    }
}

TEST_CASE("find_vulnerable: a constant head keeps every candidate at the true label") {
    const nn::MlpModel model = constant_head(3, 1, 2);
    const std::vector<double> x = {0.5, 0.5};
    attack::PerturbationSpec ball_spec;
    ball_spec.tau = 0.05;
    attack::PerturbationSpec atk_spec;
    atk_spec.kind = attack::Kind::fgsm;
    atk_spec.p = attack::Norm::linf;
    atk_spec.tau = 0.05;
    Rng rng(51);
    for (const auto method : {attack::VulnMethod::ball, attack::VulnMethod::targeted_attack}) {
        const auto& spec = method == attack::VulnMethod::ball ? ball_spec : atk_spec;
        const auto points = attack::find_vulnerable(model, x, 1, spec, 4, method, rng);
        for (const auto& p : points) {
            CHECK(nn::predict_class(model, p) == 1);
        }
    }
}

TEST_CASE("find_vulnerable rejects single-class models") {
    nn::MlpModel degenerate;
    degenerate.layer_dims = {2, 1};
    degenerate.activation = nn::Activation::relu;
    degenerate.weights.emplace_back(1, 2);
    degenerate.biases.push_back({0.0});
    const std::vector<double> x = {0.5, 0.5};
    attack::PerturbationSpec spec;
    spec.kind = attack::Kind::fgsm;
    spec.p = attack::Norm::linf;
    Rng rng(61);
    CHECK_THROWS_AS(attack::find_vulnerable(degenerate, x, 0, spec, 1, attack::VulnMethod::targeted_attack, rng),
                    ConfigError);
}

TEST_CASE("perturbation spec validation") {
    attack::PerturbationSpec spec;
    spec.kind = attack::Kind::gaussian;
    spec.p = attack::Norm::linf;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.kind = attack::Kind::fgsm;
    spec.p = attack::Norm::l2;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
    spec.p = attack::Norm::linf;
    spec.tau = -0.1;
    CHECK_THROWS_AS(spec.validate(), ConfigError);
}
