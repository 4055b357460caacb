#include "ulab/trainer.hpp"

#include <cmath>
#include <fstream>

#include "ulab/kernels.hpp"
#include "ulab/rng.hpp"

namespace ulab::train {

double cosine_lr(int step, int T, double lr0) {
    if (step < 0) {
        throw ConfigError("cosine_lr: step must be non-negative");
    }
    if (T < 1) {
        throw ConfigError("cosine_lr: schedule length must be positive");
    }
    const int s = step > T ? T : step;
    const double pi = 3.14159265358979323846;
    return lr0 * (1.0 + std::cos(pi * static_cast<double>(s) / static_cast<double>(T))) / 2.0;
}

void clip_gradient(nn::Gradient& grad, double clip_norm) {
    if (!(clip_norm > 0.0)) {
        throw ConfigError("clip_gradient: clip_norm must be positive");
    }
    const double norm = nn::global_norm(grad);
    if (norm > clip_norm) {
        const double factor = clip_norm / norm;
        for (std::size_t l = 0; l < grad.dw.size(); ++l) {
            kernels::scale(factor, grad.dw[l].flat());
            kernels::scale(factor, std::span<double>(grad.db[l]));
        }
    }
}

SgdDriver::SgdDriver(const TrainConfig& config, const nn::MlpModel& model)
    : config_(config), momentum_buf_(nn::zero_gradient(model)) {}

void SgdDriver::set_group_mask(std::vector<char> mask) { group_mask_ = std::move(mask); }

void SgdDriver::apply(nn::MlpModel& model, nn::Gradient grad, const GradTweak& post_clip) {
    if (config_.clip_norm) {
        clip_gradient(grad, *config_.clip_norm);
    }
    if (post_clip) {
        post_clip(grad);
    }
    if (config_.weight_decay != 0.0) {
        for (std::size_t l = 0; l < grad.dw.size(); ++l) {
            if (!group_mask_.empty() && !group_mask_[l]) {
                continue;
            }
            kernels::axpy(config_.weight_decay, model.weights[l].flat(), grad.dw[l].flat());
            kernels::axpy(config_.weight_decay, std::span<const double>(model.biases[l]),
                          std::span<double>(grad.db[l]));
        }
    }
    const double lr = cosine_lr(step_, config_.schedule_T, config_.lr0);
    for (std::size_t l = 0; l < grad.dw.size(); ++l) {
        if (!group_mask_.empty() && !group_mask_[l]) {
            continue;
        }
        kernels::momentum_update(momentum_buf_.dw[l].flat(), grad.dw[l].flat(), config_.momentum);
        kernels::momentum_update(std::span<double>(momentum_buf_.db[l]), std::span<const double>(grad.db[l]),
                                 config_.momentum);
        kernels::weight_step(model.weights[l].flat(), momentum_buf_.dw[l].flat(), lr);
        kernels::weight_step(std::span<double>(model.biases[l]), std::span<const double>(momentum_buf_.db[l]), lr);
    }
    ++step_;
}

std::vector<std::vector<int>> make_batches(std::span<const int> indices, int batch_size, std::uint64_t seed,
                                           int epoch, std::uint64_t stream_tag) {
    std::vector<int> order(indices.begin(), indices.end());
    Rng rng(Rng::mix(Rng::mix(seed, stream_tag), static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    std::vector<std::vector<int>> batches;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(stop));
    }
    return batches;
}

TrainResult train(nn::MlpModel model, const data::Dataset& dataset, std::span<const int> indices,
                  const TrainConfig& config, const StepObserver& observer) {
    if (indices.empty()) {
        throw ConfigError("train: empty index set");
    }
    if (config.batch_size < 1 || config.epochs < 0) {
        throw ConfigError("train: batch_size must be positive and epochs non-negative");
    }

    TrainResult result;
    SgdDriver driver(config, model);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto batches = make_batches(indices, config.batch_size, config.seed, epoch, /*stream_tag=*/0x7261);
        double loss_sum = 0.0;
        for (const auto& batch_idx : batches) {
            nn::Batch batch;
            batch.inputs = data::gather_rows(dataset.features, batch_idx);
            batch.labels = data::gather_labels(dataset.labels, batch_idx);
            auto [loss, grad] = nn::grad_params(model, batch);
            if (!std::isfinite(loss)) {
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch));
            }
            loss_sum += loss;
            driver.apply(model, std::move(grad));
            if (observer) {
                observer(driver.step(), model);
            }
        }
        result.loss_history.push_back(loss_sum / static_cast<double>(batches.size()));
    }
    result.model = std::move(model);
    return result;
}

void write_loss_history_csv(const std::vector<double>& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw ParseError("cannot open '" + path + "' for writing");
    }
    out << "epoch,loss\n";
    char buf[64];
    for (std::size_t e = 0; e < history.size(); ++e) {
        std::snprintf(buf, sizeof(buf), "%.17g", history[e]);
        out << e << ',' << buf << '\n';
    }
}

}  // namespace ulab::train
