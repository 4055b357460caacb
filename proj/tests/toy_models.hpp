#pragma once

// Hand-built 1-D classifiers whose exact behavior under uniform-ball
// perturbation is computable by interval enumeration. Shared between the
// evaluation unit tests and the acceptance suite.

#include "ulab/attacks.hpp"
#include "ulab/dataset.hpp"
#include "ulab/nn.hpp"

namespace toy {

// Predicts class 1 iff x > threshold (logit difference s * (x - threshold)).
inline ulab::nn::MlpModel threshold_model(double threshold, double s = 50.0) {
    ulab::nn::MlpModel model;
    model.layer_dims = {1, 2};
    model.activation = ulab::nn::Activation::relu;
    ulab::Matrix w(2, 1);
    w(1, 0) = s;
    model.weights.push_back(w);
    model.biases.push_back({0.0, -s * threshold});
    return model;
}

// Predicts class 1 exactly on the open interval (lo, hi): a tent-shaped
// hidden representation relu(x-a) - 2 relu(x-mid) + relu(x-b) crosses delta
// at lo = a + delta and hi = b - delta.
inline ulab::nn::MlpModel interval_model(double lo, double hi, double delta = 0.01, double s = 200.0) {
    const double a = lo - delta;
    const double b = hi + delta;
    const double mid = (a + b) / 2.0;
    ulab::nn::MlpModel model;
    model.layer_dims = {1, 3, 2};
    model.activation = ulab::nn::Activation::relu;
    ulab::Matrix w1(3, 1);
    w1(0, 0) = 1.0;
    w1(1, 0) = 1.0;
    w1(2, 0) = 1.0;
    model.weights.push_back(w1);
    model.biases.push_back({-a, -mid, -b});
    ulab::Matrix w2(2, 3);
    w2(1, 0) = s;
    w2(1, 1) = -2.0 * s;
    w2(1, 2) = s;
    model.weights.push_back(w2);
    model.biases.push_back({0.0, -s * delta});
    return model;
}

// One sample x = 0.55 of class 1; with a tau = 0.1 linf ball the draws are
// uniform on [0.45, 0.65] and interval probabilities are lengths / 0.2.
inline ulab::data::Dataset one_sample_dataset() {
    ulab::data::Dataset ds;
    ds.features = ulab::Matrix(1, 1);
    ds.features(0, 0) = 0.55;
    ds.labels = {1};
    ds.num_classes = 2;
    return ds;
}

// pgd with zero steps draws uniformly inside the linf ball.
inline ulab::attack::PerturbationSpec uniform_ball_spec(int c, double tau = 0.1) {
    ulab::attack::PerturbationSpec spec;
    spec.kind = ulab::attack::Kind::pgd;
    spec.p = ulab::attack::Norm::linf;
    spec.tau = tau;
    spec.steps = 0;
    spec.mc_count = c;
    return spec;
}

}  // namespace toy
