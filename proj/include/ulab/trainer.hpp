#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ulab/dataset.hpp"
#include "ulab/nn.hpp"

namespace ulab::train {

struct TrainConfig {
    double lr0 = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0;
    int batch_size = 128;
    int epochs = 10;
    std::optional<double> clip_norm = 1.0;
    int schedule_T = 200;
    std::uint64_t seed = 7;
};

// lr0 * (1 + cos(pi * step / T)) / 2, with step clamped to T.
double cosine_lr(int step, int T, double lr0);

// Scales all entries by clip_norm / ||g||_2 when the global norm exceeds
// clip_norm; identity otherwise.
void clip_gradient(nn::Gradient& grad, double clip_norm);

using StepObserver = std::function<void(int step, const nn::MlpModel& model)>;

// One SGD update path shared by the trainer and every fine-tuning unlearning
// method: clip(raw gradient) -> + weight_decay * params -> momentum buffer
// -> params -= cosine_lr(step) * buffer. Methods that must coincide exactly
// in their zero-hyperparameter limits (RURK vs GD, NGD vs GD, ...) get that
// for free by feeding identical gradients through one driver.
class SgdDriver {
public:
    using GradTweak = std::function<void(nn::Gradient&)>;

    SgdDriver(const TrainConfig& config, const nn::MlpModel& model);

    // post_clip runs after clipping and before weight decay (ngd noise).
    void apply(nn::MlpModel& model, nn::Gradient grad, const GradTweak& post_clip = {});

    // Restricts updates to the marked parameter groups; masked-out groups
    // are left untouched entirely (no decay, no momentum).
    void set_group_mask(std::vector<char> mask);

    int step() const { return step_; }

private:
    TrainConfig config_;
    nn::Gradient momentum_buf_;
    std::vector<char> group_mask_;
    int step_ = 0;
};

// Deterministic shuffled mini-batch order over indices for one epoch.
std::vector<std::vector<int>> make_batches(std::span<const int> indices, int batch_size, std::uint64_t seed,
                                           int epoch, std::uint64_t stream_tag);

struct TrainResult {
    nn::MlpModel model;
    std::vector<double> loss_history;  // mean batch loss per epoch
};

TrainResult train(nn::MlpModel model, const data::Dataset& dataset, std::span<const int> indices,
                  const TrainConfig& config, const StepObserver& observer = {});

void write_loss_history_csv(const std::vector<double>& history, const std::string& path);

}  // namespace ulab::train
