#include "ulab/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <thread>

#include "ulab/rng.hpp"

namespace ulab::eval {

namespace {

constexpr std::uint64_t kDrawStream = 0x6d63;

int env_thread_cap() {
    const char* env = std::getenv("UNLEARN_LAB_THREADS");
    if (env == nullptr) {
        return 0;
    }
    const int v = std::atoi(env);
    return v < 0 ? 0 : v;
}

// Deterministic parallel map: results land in preallocated slots keyed by
// index, so scheduling cannot change any output.
template <typename Fn>
void parallel_for(std::size_t n, const Fn& fn) {
    const int cap = env_thread_cap();
    const unsigned hw = std::thread::hardware_concurrency();
    const std::size_t workers = cap == 0 ? 1 : std::min<std::size_t>({static_cast<std::size_t>(cap), hw, n});
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w]() {
            for (std::size_t i = w; i < n; i += workers) {
                fn(i);
            }
        });
    }
    for (auto& t : threads) {
        t.join();
    }
}

}  // namespace

double accuracy(const nn::MlpModel& model, const data::Dataset& dataset, std::span<const int> indices) {
    if (indices.empty()) {
        throw ConfigError("accuracy: empty index set");
    }
    const Matrix inputs = data::gather_rows(dataset.features, indices);
    const Matrix logits = nn::forward_logits(model, inputs);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto z = logits.row(i);
        std::size_t best = 0;
        for (std::size_t j = 1; j < z.size(); ++j) {
            if (z[j] > z[best]) {
                best = j;
            }
        }
        if (static_cast<int>(best) == dataset.labels[static_cast<std::size_t>(indices[i])]) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(indices.size());
}

namespace {

// 1-D logistic attacker on the correct-class confidence, fit by Newton.
struct ScalarLogistic {
    double w = 0.0;
    double b = 0.0;

    void fit(std::span<const double> x, std::span<const char> y, double l2 = 1e-3, int iters = 50) {
        const std::size_t n = x.size();
        for (int it = 0; it < iters; ++it) {
            double gw = 0.0, gb = 0.0;
            double hww = 0.0, hwb = 0.0, hbb = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double z = w * x[i] + b;
                const double s = 1.0 / (1.0 + std::exp(-z));
                const double r = s - static_cast<double>(y[i]);
                gw += r * x[i];
                gb += r;
                const double v = s * (1.0 - s);
                hww += v * x[i] * x[i];
                hwb += v * x[i];
                hbb += v;
            }
            const double inv_n = 1.0 / static_cast<double>(n);
            gw = gw * inv_n + l2 * w;
            gb = gb * inv_n + l2 * b;
            hww = hww * inv_n + l2;
            hwb = hwb * inv_n;
            hbb = hbb * inv_n + l2;
            const double det = hww * hbb - hwb * hwb;
            if (std::abs(det) < 1e-300) {
                break;
            }
            const double dw = (hbb * gw - hwb * gb) / det;
            const double db = (hww * gb - hwb * gw) / det;
            w -= dw;
            b -= db;
            if (std::abs(dw) < 1e-12 && std::abs(db) < 1e-12) {
                break;
            }
        }
    }

    bool predict_seen(double x) const { return w * x + b > 0.0; }
};

std::vector<double> correct_class_confidence(const nn::MlpModel& model, const data::Dataset& dataset,
                                             std::span<const int> indices) {
    const Matrix inputs = data::gather_rows(dataset.features, indices);
    const Matrix probs = nn::softmax_rows(nn::forward_logits(model, inputs));
    std::vector<double> conf(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        conf[i] = probs(i, static_cast<std::size_t>(dataset.labels[static_cast<std::size_t>(indices[i])]));
    }
    return conf;
}

}  // namespace

double mia_accuracy(const nn::MlpModel& model, const data::UnlearnTask& task, std::uint64_t attacker_seed) {
    if (task.retain_idx.empty() || task.forget_idx.empty() || task.test_idx.empty()) {
        throw ConfigError("mia: retain, forget and test sets must be non-empty");
    }
    std::vector<double> features;
    std::vector<char> labels;
    std::vector<int> eval_idx;

    if (task.mode == data::SplitMode::sample) {
        const auto seen = correct_class_confidence(model, task.dataset, task.retain_idx);
        const auto unseen = correct_class_confidence(model, task.dataset, task.test_idx);
        features.insert(features.end(), seen.begin(), seen.end());
        labels.insert(labels.end(), seen.size(), 1);
        features.insert(features.end(), unseen.begin(), unseen.end());
        labels.insert(labels.end(), unseen.size(), 0);
        eval_idx = task.forget_idx;
    } else {
        // class mode: retain(1) vs half the forget set(0); evaluate held-out half
        std::vector<int> forget = task.forget_idx;
        Rng rng(Rng::mix(attacker_seed, 0x6d69));
        rng.shuffle(forget);
        const std::size_t half = forget.size() / 2;
        if (half == 0) {
            throw ConfigError("mia: class mode needs at least 2 forget samples");
        }
        const std::vector<int> attacker_train(forget.begin(), forget.begin() + static_cast<std::ptrdiff_t>(half));
        eval_idx.assign(forget.begin() + static_cast<std::ptrdiff_t>(half), forget.end());
        const auto seen = correct_class_confidence(model, task.dataset, task.retain_idx);
        const auto unseen = correct_class_confidence(model, task.dataset, attacker_train);
        features.insert(features.end(), seen.begin(), seen.end());
        labels.insert(labels.end(), seen.size(), 1);
        features.insert(features.end(), unseen.begin(), unseen.end());
        labels.insert(labels.end(), unseen.size(), 0);
    }

    bool has_pos = false, has_neg = false;
    for (char label : labels) {
        (label ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) {
        throw ConfigError("mia: degenerate single-class attacker training set");
    }

    ScalarLogistic attacker;
    attacker.fit(features, labels);

    const auto eval_conf = correct_class_confidence(model, task.dataset, eval_idx);
    std::size_t classified_unseen = 0;
    for (double conf : eval_conf) {
        if (!attacker.predict_seen(conf)) {
            ++classified_unseen;
        }
    }
    return static_cast<double>(classified_unseen) / static_cast<double>(eval_conf.size());
}

RelearnResult relearn_time(const nn::MlpModel& model, const nn::MlpModel& original, const data::UnlearnTask& task,
                           double eta, const train::TrainConfig& finetune_config, int max_epochs) {
    if (max_epochs < 0) {
        throw ConfigError("relearn_time: max_epochs must be non-negative");
    }
    const Matrix forget_inputs = data::gather_rows(task.dataset.features, task.forget_idx);
    const std::vector<int> forget_labels = data::gather_labels(task.dataset.labels, task.forget_idx);

    const auto forget_loss = [&](const nn::MlpModel& m) {
        const Matrix probs = nn::softmax_rows(nn::forward_logits(m, forget_inputs));
        return nn::cross_entropy(probs, forget_labels);
    };
    const double threshold = (1.0 + eta) * forget_loss(original);

    if (forget_loss(model) <= threshold) {
        return {0, false};
    }
    const std::vector<int> train_idx = task.train_idx();
    nn::MlpModel current = model;
    train::TrainConfig config = finetune_config;
    config.epochs = 1;
    for (int epoch = 1; epoch <= max_epochs; ++epoch) {
        config.seed = Rng::mix(finetune_config.seed, static_cast<std::uint64_t>(epoch));
        current = train::train(std::move(current), task.dataset, train_idx, config).model;
        if (forget_loss(current) <= threshold) {
            return {epoch, false};
        }
    }
    return {max_epochs, true};
}

namespace {

RkEstimate estimate_shared(const nn::MlpModel& m, const nn::MlpModel& a, const data::Dataset& dataset,
                           int sample_idx, const attack::PerturbationSpec& spec, std::uint64_t seed,
                           bool swap_model_eval_order) {
    spec.validate();
    const auto x = dataset.features.row(static_cast<std::size_t>(sample_idx));
    const int y = dataset.labels[static_cast<std::size_t>(sample_idx)];

    RkEstimate est;
    est.count = spec.mc_count;
    std::vector<char> m_hits(static_cast<std::size_t>(spec.mc_count));
    std::vector<char> a_hits(static_cast<std::size_t>(spec.mc_count));
    std::vector<char> disagree(static_cast<std::size_t>(spec.mc_count));

    parallel_for(static_cast<std::size_t>(spec.mc_count), [&](std::size_t i) {
        // one substream per draw: results do not depend on scheduling
        Rng rng(Rng::mix(Rng::mix(seed, kDrawStream), static_cast<std::uint64_t>(i)));
        const std::vector<double> xp = attack::draw_perturbation(m, x, y, spec, rng);
        int pred_m, pred_a;
        if (swap_model_eval_order) {
            pred_a = nn::predict_class(a, xp);
            pred_m = nn::predict_class(m, xp);
        } else {
            pred_m = nn::predict_class(m, xp);
            pred_a = nn::predict_class(a, xp);
        }
        m_hits[i] = pred_m == y;
        a_hits[i] = pred_a == y;
        disagree[i] = pred_m != pred_a;
    });

    for (int i = 0; i < spec.mc_count; ++i) {
        est.numerator += m_hits[static_cast<std::size_t>(i)];
        est.denominator += a_hits[static_cast<std::size_t>(i)];
        est.disagreements += disagree[static_cast<std::size_t>(i)];
    }
    est.k_hat = static_cast<double>(est.disagreements) / static_cast<double>(est.count);
    est.p_a_hat = static_cast<double>(est.denominator) / static_cast<double>(est.count);
    if (est.denominator == 0) {
        est.denominator_zero = true;
        est.r_hat = std::numeric_limits<double>::infinity();
    } else {
        est.r_hat = static_cast<double>(est.numerator) / static_cast<double>(est.denominator);
    }
    return est;
}

}  // namespace

RkEstimate residual_knowledge(const nn::MlpModel& m, const nn::MlpModel& a, const data::Dataset& dataset,
                              int sample_idx, const attack::PerturbationSpec& spec, std::uint64_t seed) {
    return estimate_shared(m, a, dataset, sample_idx, spec, seed, /*swap_model_eval_order=*/false);
}

double adversarial_disagreement(const nn::MlpModel& m, const nn::MlpModel& a, const data::Dataset& dataset,
                                int sample_idx, const attack::PerturbationSpec& spec, std::uint64_t seed) {
    return estimate_shared(m, a, dataset, sample_idx, spec, seed, /*swap_model_eval_order=*/true).k_hat;
}

bool rk_bounds_check(double r_hat, double p_a_hat, double k_hat, double slack, RkBounds* bounds) {
    if (r_hat < 0.0 || p_a_hat < 0.0 || p_a_hat > 1.0 || k_hat < 0.0 || k_hat > 1.0) {
        throw ConfigError("rk_bounds_check: arguments out of range");
    }
    RkBounds b;
    b.r_hat = r_hat;
    b.p_a = p_a_hat;
    b.lower = r_hat * p_a_hat * (1.0 - p_a_hat);
    b.upper = 1.0 - r_hat * p_a_hat * p_a_hat;
    if (bounds != nullptr) {
        *bounds = b;
    }
    return b.lower - slack <= k_hat && k_hat <= b.upper + slack;
}

std::vector<RkCurvePoint> rk_curve(const nn::MlpModel& m, const nn::MlpModel& a, const data::UnlearnTask& task,
                                   std::span<const double> tau_grid, const attack::PerturbationSpec& spec_template,
                                   std::uint64_t seed) {
    if (tau_grid.empty()) {
        throw ConfigError("rk_curve: empty tau grid");
    }
    std::vector<RkCurvePoint> curve;
    curve.reserve(tau_grid.size());
    for (std::size_t ti = 0; ti < tau_grid.size(); ++ti) {
        attack::PerturbationSpec spec = spec_template;
        spec.tau = tau_grid[ti];
        RkCurvePoint point;
        point.tau = spec.tau;
        double r_sum = 0.0;
        double k_sum = 0.0;
        int r_count = 0;
        int prevalent = 0;
        for (std::size_t si = 0; si < task.forget_idx.size(); ++si) {
            const std::uint64_t sample_seed = Rng::mix(Rng::mix(seed, static_cast<std::uint64_t>(ti)),
                                                       static_cast<std::uint64_t>(si));
            const RkEstimate est =
                residual_knowledge(m, a, task.dataset, task.forget_idx[si], spec, sample_seed);
            k_sum += est.k_hat;
            if (est.denominator_zero) {
                ++point.denominator_zero_count;
                // a never recognizes the neighborhood; residual knowledge is
                // exhibited whenever m still does
                if (est.numerator > 0) {
                    ++prevalent;
                }
            } else {
                r_sum += est.r_hat;
                ++r_count;
                if (est.r_hat > 1.0) {
                    ++prevalent;
                }
            }
        }
        point.k_hat_mean = k_sum / static_cast<double>(task.forget_idx.size());
        point.r_hat_mean = r_count > 0 ? r_sum / static_cast<double>(r_count) : 0.0;
        point.prevalence = static_cast<double>(prevalent) / static_cast<double>(task.forget_idx.size());
        curve.push_back(point);
    }
    return curve;
}

double mean_absolute_gap(std::span<const double> gaps_pp) {
    double sum = 0.0;
    for (double g : gaps_pp) {
        sum += std::abs(g);
    }
    return sum / static_cast<double>(gaps_pp.size());
}

double avg_gap(const EvalReport& report, const EvalReport& retrain_report) {
    const double gaps[4] = {
        100.0 * (report.retain_acc - retrain_report.retain_acc),
        100.0 * (report.unlearn_acc - retrain_report.unlearn_acc),
        100.0 * (report.test_acc - retrain_report.test_acc),
        100.0 * (report.mia_acc - retrain_report.mia_acc),
    };
    return mean_absolute_gap(gaps);
}

void write_rk_curve_csv(std::span<const RkCurvePoint> curve, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw ParseError("cannot open '" + path + "' for writing");
    }
    out << "tau,r_hat,k_hat,prevalence,denominator_zero_count\n";
    char buf[160];
    for (const auto& p : curve) {
        std::snprintf(buf, sizeof(buf), "%.6g,%.6g,%.6g,%.6g,%d\n", p.tau, p.r_hat_mean, p.k_hat_mean, p.prevalence,
                      p.denominator_zero_count);
        out << buf;
    }
}

}  // namespace ulab::eval
