#include <cmath>
#include <memory>

#include "ulab/kernels.hpp"
#include "ulab/rng.hpp"
#include "ulab/unlearn.hpp"

// Fine-tuning unlearning family. Stream layout: retain-batch shuffles use
// stream tag 0x7261 (matching train()), forget-batch cycling 0x666f, ngd
// noise 0x6e67, rurk attack draws 0x7675. Keeping the streams disjoint means
// a method that consumes extra randomness (forget batches, perturbations)
// still walks the exact retain-batch sequence of plain gd.

namespace ulab::unlearn {

namespace {

constexpr std::uint64_t kRetainStream = 0x7261;
constexpr std::uint64_t kForgetStream = 0x666f;
constexpr std::uint64_t kNoiseStream = 0x6e67;
constexpr std::uint64_t kAttackStream = 0x7675;
constexpr std::uint64_t kReinitStream = 0x6575;

// Cyclic mini-batches over the forget set; reshuffles on wraparound.
class ForgetCycler {
public:
    ForgetCycler(std::span<const int> indices, int batch_size, std::uint64_t seed)
        : indices_(indices.begin(), indices.end()), batch_size_(batch_size), seed_(seed) {
        if (indices_.empty()) {
            throw ConfigError("forget-batch cycling needs a non-empty forget set");
        }
        refill();
    }

    const std::vector<int>& next() {
        if (pos_ == batches_.size()) {
            ++cycle_;
            refill();
        }
        return batches_[pos_++];
    }

private:
    void refill() {
        batches_ = train::make_batches(indices_, batch_size_, seed_, cycle_, kForgetStream);
        pos_ = 0;
    }

    std::vector<int> indices_;
    int batch_size_;
    std::uint64_t seed_;
    int cycle_ = 0;
    std::vector<std::vector<int>> batches_;
    std::size_t pos_ = 0;
};

nn::Batch make_nn_batch(const data::Dataset& dataset, const std::vector<int>& idx) {
    nn::Batch batch;
    batch.inputs = data::gather_rows(dataset.features, idx);
    batch.labels = data::gather_labels(dataset.labels, idx);
    return batch;
}

// d/dlogits of mean KL(teacher || student) over the batch: (p_S - p_T) / m.
Matrix kl_delta(const Matrix& student_probs, const Matrix& teacher_probs) {
    Matrix delta = student_probs;
    const double inv_m = 1.0 / static_cast<double>(student_probs.rows());
    for (std::size_t i = 0; i < delta.rows(); ++i) {
        auto d = delta.row(i);
        const auto t = teacher_probs.row(i);
        for (std::size_t j = 0; j < d.size(); ++j) {
            d[j] = (d[j] - t[j]) * inv_m;
        }
    }
    return delta;
}

nn::Gradient ce_gradient(const nn::MlpModel& model, const nn::Batch& batch) {
    auto [loss, grad] = nn::grad_params(model, batch);
    (void)loss;
    return grad;
}

void zero_masked_groups(nn::Gradient& grad, std::span<const char> trainable) {
    for (std::size_t l = 0; l < grad.dw.size(); ++l) {
        if (!trainable[l]) {
            kernels::scale(0.0, grad.dw[l].flat());
            kernels::scale(0.0, std::span<double>(grad.db[l]));
        }
    }
}

struct EngineOptions {
    std::vector<char> trainable_groups;  // empty = all trainable
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
};

using BatchGradient = std::function<nn::Gradient(const nn::MlpModel&, const std::vector<int>&)>;

nn::MlpModel run_epochs(nn::MlpModel model, std::span<const int> driving_indices,
                        const train::TrainConfig& config, const EngineOptions& options,
                        const BatchGradient& batch_gradient, const train::StepObserver& observer) {
    if (driving_indices.empty()) {
        throw ConfigError("finetune: empty driving index set");
    }
    train::SgdDriver driver(config, model);
    if (!options.trainable_groups.empty()) {
        driver.set_group_mask(options.trainable_groups);
    }
    Rng noise_rng(Rng::mix(Rng::mix(options.seed, kNoiseStream), 1));
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto batches =
            train::make_batches(driving_indices, config.batch_size, config.seed, epoch, kRetainStream);
        for (const auto& batch_idx : batches) {
            nn::Gradient grad = batch_gradient(model, batch_idx);
            if (!options.trainable_groups.empty()) {
                zero_masked_groups(grad, options.trainable_groups);
            }
            if (options.noise_sigma > 0.0) {
                driver.apply(model, std::move(grad), [&](nn::Gradient& g) {
                    for (std::size_t l = 0; l < g.dw.size(); ++l) {
                        if (!options.trainable_groups.empty() && !options.trainable_groups[l]) {
                            continue;
                        }
                        for (double& v : g.dw[l].flat()) {
                            v += options.noise_sigma * noise_rng.next_normal();
                        }
                        for (double& v : g.db[l]) {
                            v += options.noise_sigma * noise_rng.next_normal();
                        }
                    }
                });
            } else {
                driver.apply(model, std::move(grad));
            }
            if (observer) {
                observer(driver.step(), model);
            }
        }
    }
    return model;
}

std::vector<char> last_k_groups_mask(const nn::MlpModel& model, int k_layers) {
    if (k_layers < 1) {
        throw ConfigError("eu_k/cf_k: k_layers must be positive");
    }
    const std::size_t layers = model.num_layers();
    std::vector<char> mask(layers, 0);
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(k_layers), layers);
    for (std::size_t i = 0; i < k; ++i) {
        mask[layers - 1 - i] = 1;
    }
    return mask;
}

void reinit_groups(nn::MlpModel& model, std::span<const char> groups, std::uint64_t seed) {
    const nn::MlpModel fresh = nn::init_params(model.layer_dims, model.activation, Rng::mix(seed, kReinitStream));
    for (std::size_t l = 0; l < model.num_layers(); ++l) {
        if (groups[l]) {
            model.weights[l] = fresh.weights[l];
            model.biases[l] = fresh.biases[l];
        }
    }
}

}  // namespace

nn::MlpModel retrain_oracle(const data::UnlearnTask& task, const std::vector<int>& layer_dims,
                            nn::Activation activation, std::uint64_t init_seed, const train::TrainConfig& config) {
    nn::MlpModel model = nn::init_params(layer_dims, activation, init_seed);
    return train::train(std::move(model), task.dataset, task.retain_idx, config).model;
}

nn::MlpModel finetune_unlearn(const nn::MlpModel& original, const data::UnlearnTask& task, const MethodHyper& hyper,
                              std::uint64_t seed, const train::StepObserver& observer) {
    train::TrainConfig config = hyper.optim;
    config.seed = seed;
    EngineOptions options;
    options.seed = seed;
    const data::Dataset& ds = task.dataset;

    switch (hyper.method) {
        case Method::gd: {
            return run_epochs(
                original, task.retain_idx, config, options,
                [&](const nn::MlpModel& m, const std::vector<int>& idx) { return ce_gradient(m, make_nn_batch(ds, idx)); },
                observer);
        }
        case Method::ngd: {
            options.noise_sigma = hyper.sigma;
            return run_epochs(
                original, task.retain_idx, config, options,
                [&](const nn::MlpModel& m, const std::vector<int>& idx) { return ce_gradient(m, make_nn_batch(ds, idx)); },
                observer);
        }
        case Method::ga: {
            if (task.forget_idx.empty()) {
                throw ConfigError("ga: empty forget set");
            }
            return run_epochs(
                original, task.forget_idx, config, options,
                [&](const nn::MlpModel& m, const std::vector<int>& idx) {
                    nn::Gradient grad = ce_gradient(m, make_nn_batch(ds, idx));
                    for (std::size_t l = 0; l < grad.dw.size(); ++l) {
                        kernels::scale(-1.0, grad.dw[l].flat());
                        kernels::scale(-1.0, std::span<double>(grad.db[l]));
                    }
                    return grad;
                },
                observer);
        }
        case Method::neggrad_plus: {
            auto cycler = std::make_shared<ForgetCycler>(task.forget_idx, config.batch_size, seed);
            const double beta = hyper.beta;
            return run_epochs(
                original, task.retain_idx, config, options,
                [&, cycler, beta](const nn::MlpModel& m, const std::vector<int>& idx) {
                    nn::Gradient grad = ce_gradient(m, make_nn_batch(ds, idx));
                    if (beta != 0.0) {
                        const nn::Gradient forget_grad = ce_gradient(m, make_nn_batch(ds, cycler->next()));
                        nn::accumulate(grad, forget_grad, -beta);
                    }
                    return grad;
                },
                observer);
        }
        case Method::eu_k:
        case Method::cf_k: {
            options.trainable_groups = last_k_groups_mask(original, hyper.k_layers);
            nn::MlpModel model = original;
            if (hyper.method == Method::eu_k) {
                reinit_groups(model, options.trainable_groups, hyper.init_seed);
            }
            return run_epochs(
                std::move(model), task.retain_idx, config, options,
                [&](const nn::MlpModel& m, const std::vector<int>& idx) { return ce_gradient(m, make_nn_batch(ds, idx)); },
                observer);
        }
        case Method::scrub: {
            auto cycler = std::make_shared<ForgetCycler>(task.forget_idx, config.batch_size, seed);
            const nn::MlpModel teacher = original;
            const double alpha = hyper.scrub_alpha;
            const double gamma = hyper.scrub_gamma;
            return run_epochs(
                original, task.retain_idx, config, options,
                [&, cycler, alpha, gamma](const nn::MlpModel& student, const std::vector<int>& idx) {
                    // retain: alpha * KL(teacher||student) + gamma * CE
                    const nn::Batch retain_batch = make_nn_batch(ds, idx);
                    nn::ForwardCache cache;
                    const Matrix logits = nn::forward_cached(student, retain_batch.inputs, cache);
                    const Matrix probs = nn::softmax_rows(logits);
                    const Matrix teacher_probs = nn::softmax_rows(nn::forward_logits(teacher, retain_batch.inputs));
                    Matrix delta = kl_delta(probs, teacher_probs);
                    kernels::scale(alpha, delta.flat());
                    if (gamma != 0.0) {
                        const Matrix ce = nn::cross_entropy_delta(probs, retain_batch.labels);
                        kernels::axpy(gamma, ce.flat(), delta.flat());
                    }
                    nn::Gradient grad = nn::backward_from_logit_delta(student, cache, retain_batch.inputs, delta);
                    // forget: - KL(teacher||student)
                    const nn::Batch forget_batch = make_nn_batch(ds, cycler->next());
                    nn::ForwardCache fcache;
                    const Matrix flogits = nn::forward_cached(student, forget_batch.inputs, fcache);
                    const Matrix fprobs = nn::softmax_rows(flogits);
                    const Matrix fteacher = nn::softmax_rows(nn::forward_logits(teacher, forget_batch.inputs));
                    Matrix fdelta = kl_delta(fprobs, fteacher);
                    kernels::scale(-1.0, fdelta.flat());
                    const nn::Gradient fgrad =
                        nn::backward_from_logit_delta(student, fcache, forget_batch.inputs, fdelta);
                    nn::accumulate(grad, fgrad, 1.0);
                    return grad;
                },
                observer);
        }
        default:
            throw ConfigError(std::string("finetune_unlearn: method '") + method_to_string(hyper.method) +
                              "' is not in the fine-tuning family");
    }
}

nn::MlpModel rurk_unlearn(const nn::MlpModel& original, const data::UnlearnTask& task, const MethodHyper& hyper,
                          std::uint64_t seed, const train::StepObserver& observer) {
    if (task.forget_idx.empty()) {
        throw ConfigError("rurk: empty forget set");
    }
    train::TrainConfig config = hyper.optim;
    config.seed = seed;
    EngineOptions options;
    options.seed = seed;
    const data::Dataset& ds = task.dataset;
    const RurkHyper& rk = hyper.rurk;
    if (rk.v < 1) {
        throw ConfigError("rurk: v must be positive");
    }

    attack::PerturbationSpec spec;
    spec.tau = rk.tau;
    spec.clamp = rk.clamp;
    spec.step_size = rk.step_size;
    spec.steps = rk.steps;
    if (rk.vuln_method == attack::VulnMethod::targeted_attack) {
        spec.kind = rk.attack_kind == attack::Kind::gaussian ? attack::Kind::fgsm : rk.attack_kind;
        spec.p = attack::Norm::linf;
    }

    auto cycler = std::make_shared<ForgetCycler>(task.forget_idx, config.batch_size, seed);
    auto attack_rng = std::make_shared<Rng>(Rng::mix(Rng::mix(seed, kAttackStream), 1));

    return run_epochs(
        original, task.retain_idx, config, options,
        [&, cycler, attack_rng](const nn::MlpModel& model, const std::vector<int>& idx) {
            // Loss = RLoss - lambda_f * FLoss - lambda_a * AdvFLoss; terms
            // with zero weight are skipped so the gd limit is bit-exact.
            nn::Gradient grad = ce_gradient(model, make_nn_batch(ds, idx));
            if (rk.lambda_f == 0.0 && rk.lambda_a == 0.0) {
                return grad;
            }
            const std::vector<int>& forget_idx = cycler->next();
            const nn::Batch forget_batch = make_nn_batch(ds, forget_idx);
            if (rk.lambda_f != 0.0) {
                const nn::Gradient fgrad = ce_gradient(model, forget_batch);
                nn::accumulate(grad, fgrad, -rk.lambda_f);
            }
            if (rk.lambda_a != 0.0) {
                // vulnerable perturbations for every forget sample in the batch
                const std::size_t m = forget_batch.labels.size();
                Matrix adv_inputs(m * static_cast<std::size_t>(rk.v), ds.features.cols());
                std::vector<int> adv_labels(m * static_cast<std::size_t>(rk.v));
                std::size_t row = 0;
                for (std::size_t i = 0; i < m; ++i) {
                    const auto points = attack::find_vulnerable(model, forget_batch.inputs.row(i),
                                                                forget_batch.labels[i], spec, rk.v, rk.vuln_method,
                                                                *attack_rng);
                    for (const auto& point : points) {
                        std::copy(point.begin(), point.end(), adv_inputs.row(row).begin());
                        adv_labels[row] = forget_batch.labels[i];
                        ++row;
                    }
                }
                nn::Batch adv_batch{std::move(adv_inputs), std::move(adv_labels)};
                const nn::Gradient agrad = ce_gradient(model, adv_batch);
                nn::accumulate(grad, agrad, -rk.lambda_a);
            }
            return grad;
        },
        observer);
}

}  // namespace ulab::unlearn
