#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ulab/common.hpp"

namespace ulab::nn {

enum class Activation { relu, tanh };

Activation activation_from_string(const std::string& name);
const char* activation_to_string(Activation act);

// Feed-forward classifier h_w. weights[l] maps layer l activations to layer
// l+1 pre-activations (rows = fan-out, cols = fan-in); softmax is applied at
// evaluation time and never stored.
struct MlpModel {
    std::vector<int> layer_dims;
    Activation activation = Activation::relu;
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;

    int input_dim() const { return layer_dims.front(); }
    int num_classes() const { return layer_dims.back(); }
    std::size_t num_layers() const { return weights.size(); }

    bool operator==(const MlpModel& other) const = default;
};

// Shape-congruent with MlpModel parameters.
struct Gradient {
    std::vector<Matrix> dw;
    std::vector<std::vector<double>> db;
};

struct Batch {
    Matrix inputs;            // m x d, entries in [0,1]
    std::vector<int> labels;  // m entries in [0, K)
};

MlpModel init_params(const std::vector<int>& layer_dims, Activation activation, std::uint64_t seed);

Gradient zero_gradient(const MlpModel& model);

// into += scale * g. Callers that need bit-exact no-ops must skip the call
// when scale is zero instead of relying on x + 0*g.
void accumulate(Gradient& into, const Gradient& g, double scale);

std::size_t param_count(const MlpModel& model);
std::vector<double> flatten_params(const MlpModel& model);
void set_params(MlpModel& model, std::span<const double> flat);
std::vector<double> flatten_gradient(const Gradient& g);

double global_norm(const Gradient& g);

Matrix forward_logits(const MlpModel& model, const Matrix& inputs);
Matrix softmax_rows(const Matrix& logits);

struct ForwardResult {
    Matrix logits;
    Matrix probs;
};
ForwardResult forward(const MlpModel& model, const Matrix& inputs);

int predict_class(const MlpModel& model, std::span<const double> x);

double cross_entropy(const Matrix& probs, std::span<const int> labels);

// Hidden activations kept from a forward pass, for backward passes and for
// methods that treat the last hidden layer as a frozen feature extractor.
struct ForwardCache {
    std::vector<Matrix> pre_activations;  // one per layer
    std::vector<Matrix> activations;      // post-activation, hidden layers only
};

Matrix forward_cached(const MlpModel& model, const Matrix& inputs, ForwardCache& cache);

// Reverse pass from an arbitrary d(loss)/d(logits) matrix. Fine-tuning
// objectives (plain CE, negated forget terms, KL-to-teacher) only differ in
// this delta, so they all share one backward implementation.
Gradient backward_from_logit_delta(const MlpModel& model, const ForwardCache& cache, const Matrix& inputs,
                                   const Matrix& delta, Matrix* input_grad = nullptr);

// delta rows for mean cross-entropy: (softmax - onehot) / m
Matrix cross_entropy_delta(const Matrix& probs, std::span<const int> labels);

std::pair<double, Gradient> grad_params(const MlpModel& model, const Batch& batch);

std::vector<double> grad_input(const MlpModel& model, std::span<const double> x, int label);

// Hidden-layer features of the last hidden layer (inputs themselves for a
// single-layer model).
Matrix hidden_features(const MlpModel& model, const Matrix& inputs);

void checkpoint_save(const MlpModel& model, const std::string& path);
MlpModel checkpoint_load(const std::string& path);

constexpr double kProbFloor = 1e-12;

}  // namespace ulab::nn
