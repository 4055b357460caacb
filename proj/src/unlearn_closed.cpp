#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>

#include "ulab/rng.hpp"
#include "ulab/unlearn.hpp"

// Closed-form / noise unlearning family. Eigen handles the dense Cholesky
// solves (CR Hessians, NTK kernel blocks); everything else is explicit.

namespace ulab::unlearn {

namespace {

constexpr double kFisherFloor = 1e-8;
constexpr double kSsdFloor = 1e-12;
constexpr double kKernelRidge = 1e-6;

std::vector<double> squared_grad_mean(const nn::MlpModel& model, const data::Dataset& dataset,
                                      std::span<const int> indices) {
    std::vector<double> acc(nn::param_count(model), 0.0);
    nn::Batch batch;
    batch.inputs = Matrix(1, dataset.dim());
    batch.labels.resize(1);
    for (int idx : indices) {
        const auto row = dataset.features.row(static_cast<std::size_t>(idx));
        std::copy(row.begin(), row.end(), batch.inputs.row(0).begin());
        batch.labels[0] = dataset.labels[static_cast<std::size_t>(idx)];
        const auto [loss, grad] = nn::grad_params(model, batch);
        (void)loss;
        const std::vector<double> flat = nn::flatten_gradient(grad);
        for (std::size_t i = 0; i < flat.size(); ++i) {
            acc[i] += flat[i] * flat[i];
        }
    }
    const double inv = 1.0 / static_cast<double>(indices.size());
    for (double& v : acc) {
        v *= inv;
    }
    return acc;
}

}  // namespace

std::vector<double> diag_fisher(const nn::MlpModel& model, const data::Dataset& dataset,
                                std::span<const int> indices) {
    if (indices.empty()) {
        throw ConfigError("diag_fisher: empty index set");
    }
    return squared_grad_mean(model, dataset, indices);
}

void apply_fisher_noise(nn::MlpModel& model, std::span<const double> fisher, double alpha, Rng& rng) {
    if (alpha < 0.0) {
        throw ConfigError("fisher: alpha must be non-negative");
    }
    if (alpha == 0.0) {
        return;
    }
    std::vector<double> params = nn::flatten_params(model);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double variance = alpha / std::max(fisher[i], kFisherFloor);
        params[i] += std::sqrt(variance) * rng.next_normal();
    }
    nn::set_params(model, params);
}

nn::MlpModel fisher_noise_unlearn(const nn::MlpModel& original, const data::UnlearnTask& task, double fisher_alpha,
                                  std::uint64_t seed) {
    nn::MlpModel model = original;
    if (fisher_alpha == 0.0) {
        return model;
    }
    const std::vector<double> fisher = diag_fisher(model, task.dataset, task.retain_idx);
    Rng rng(Rng::mix(seed, 0xf15e));
    apply_fisher_noise(model, fisher, fisher_alpha, rng);
    return model;
}

nn::MlpModel ssd_dampen(const nn::MlpModel& original, const data::UnlearnTask& task, double ssd_alpha,
                        double ssd_lambda) {
    if (!(ssd_alpha > 0.0) || !(ssd_lambda > 0.0)) {
        throw ConfigError("ssd: alpha and lambda must be positive");
    }
    if (task.forget_idx.empty()) {
        return original;
    }
    const std::vector<double> fisher_r = diag_fisher(original, task.dataset, task.retain_idx);
    const std::vector<double> fisher_f = diag_fisher(original, task.dataset, task.forget_idx);

    nn::MlpModel model = original;
    std::vector<double> params = nn::flatten_params(model);
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (fisher_f[i] > ssd_alpha * fisher_r[i]) {
            const double beta = std::min(ssd_lambda * fisher_r[i] / std::max(fisher_f[i], kSsdFloor), 1.0);
            params[i] *= beta;
        }
    }
    nn::set_params(model, params);
    return model;
}

LogisticHead train_logistic_head(const Matrix& features, std::span<const char> targets, double l2_reg,
                                 int max_iters, double tol) {
    if (!(l2_reg > 0.0)) {
        throw ConfigError("logistic head: l2_reg must be positive for a positive-definite Hessian");
    }
    const std::size_t n = features.rows();
    const std::size_t d = features.cols();
    const std::size_t dim = d + 1;  // bias folded in as the last coordinate

    Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    Eigen::VectorXd grad(static_cast<Eigen::Index>(dim));
    Eigen::MatrixXd hess(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    Eigen::VectorXd phi(static_cast<Eigen::Index>(dim));

    for (int iter = 0; iter < max_iters; ++iter) {
        grad.setZero();
        hess.setZero();
        for (std::size_t i = 0; i < n; ++i) {
            const auto x = features.row(i);
            for (std::size_t j = 0; j < d; ++j) {
                phi(static_cast<Eigen::Index>(j)) = x[j];
            }
            phi(static_cast<Eigen::Index>(d)) = 1.0;
            const double z = w.dot(phi);
            const double sigma = 1.0 / (1.0 + std::exp(-z));
            grad += (sigma - static_cast<double>(targets[i])) * phi;
            hess += sigma * (1.0 - sigma) * phi * phi.transpose();
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        grad *= inv_n;
        hess *= inv_n;
        grad += l2_reg * w;
        hess += l2_reg * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));

        const Eigen::VectorXd delta = hess.llt().solve(grad);
        w -= delta;
        if (delta.lpNorm<Eigen::Infinity>() < tol) {
            break;
        }
    }

    LogisticHead head;
    head.w.assign(w.data(), w.data() + d);
    head.b = w(static_cast<Eigen::Index>(d));
    return head;
}

void newton_removal_step(LogisticHead& head, const Matrix& features, std::span<const char> targets, double l2_reg,
                         double step_lambda) {
    if (!(l2_reg > 0.0)) {
        throw ConfigError("newton_removal: l2_reg must be positive");
    }
    const std::size_t n = features.rows();
    const std::size_t d = features.cols();
    const std::size_t dim = d + 1;

    Eigen::VectorXd w(static_cast<Eigen::Index>(dim));
    for (std::size_t j = 0; j < d; ++j) {
        w(static_cast<Eigen::Index>(j)) = head.w[j];
    }
    w(static_cast<Eigen::Index>(d)) = head.b;

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
    Eigen::VectorXd phi(static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = features.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            phi(static_cast<Eigen::Index>(j)) = x[j];
        }
        phi(static_cast<Eigen::Index>(d)) = 1.0;
        const double z = w.dot(phi);
        const double sigma = 1.0 / (1.0 + std::exp(-z));
        grad += (sigma - static_cast<double>(targets[i])) * phi;
        hess += sigma * (1.0 - sigma) * phi * phi.transpose();
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    grad *= inv_n;
    hess *= inv_n;
    grad += l2_reg * w;
    hess += l2_reg * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));

    Eigen::LLT<Eigen::MatrixXd> llt(hess);
    if (llt.info() != Eigen::Success) {
        throw NumericError("newton_removal: Hessian factorization failed despite regularization");
    }
    w -= step_lambda * llt.solve(grad);
    for (std::size_t j = 0; j < d; ++j) {
        head.w[j] = w(static_cast<Eigen::Index>(j));
    }
    head.b = w(static_cast<Eigen::Index>(d));
}

nn::MlpModel cr_unlearn(const nn::MlpModel& original, const data::UnlearnTask& task, double cr_lambda,
                        double l2_reg) {
    const data::Dataset& ds = task.dataset;
    const std::vector<int> train_idx = task.train_idx();
    const Matrix train_inputs = data::gather_rows(ds.features, train_idx);
    const std::vector<int> train_labels = data::gather_labels(ds.labels, train_idx);
    const Matrix features = nn::hidden_features(original, train_inputs);

    const Matrix retain_inputs = data::gather_rows(ds.features, task.retain_idx);
    const std::vector<int> retain_labels = data::gather_labels(ds.labels, task.retain_idx);
    const Matrix retain_features = nn::hidden_features(original, retain_inputs);

    const int num_classes = original.num_classes();
    nn::MlpModel model = original;
    Matrix& out_w = model.weights.back();
    auto& out_b = model.biases.back();
    for (int k = 0; k < num_classes; ++k) {
        std::vector<char> targets(train_labels.size());
        for (std::size_t i = 0; i < train_labels.size(); ++i) {
            targets[i] = train_labels[i] == k ? 1 : 0;
        }
        LogisticHead head = train_logistic_head(features, targets, l2_reg);

        std::vector<char> retain_targets(retain_labels.size());
        for (std::size_t i = 0; i < retain_labels.size(); ++i) {
            retain_targets[i] = retain_labels[i] == k ? 1 : 0;
        }
        newton_removal_step(head, retain_features, retain_targets, l2_reg, cr_lambda);

        auto row = out_w.row(static_cast<std::size_t>(k));
        std::copy(head.w.begin(), head.w.end(), row.begin());
        out_b[static_cast<std::size_t>(k)] = head.b;
    }
    return model;
}

namespace {

// Rows of the parameter Jacobian, one per (sample, output-class) pair.
Eigen::MatrixXd parameter_jacobian(const nn::MlpModel& model, const Matrix& inputs) {
    const std::size_t m = inputs.rows();
    const int k = model.num_classes();
    const std::size_t p = nn::param_count(model);
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(m * static_cast<std::size_t>(k)), static_cast<Eigen::Index>(p));

    Matrix one(1, inputs.cols());
    for (std::size_t i = 0; i < m; ++i) {
        const auto src = inputs.row(i);
        std::copy(src.begin(), src.end(), one.row(0).begin());
        nn::ForwardCache cache;
        nn::forward_cached(model, one, cache);
        for (int c = 0; c < k; ++c) {
            Matrix delta(1, static_cast<std::size_t>(k));
            delta(0, static_cast<std::size_t>(c)) = 1.0;
            const nn::Gradient grad = nn::backward_from_logit_delta(model, cache, one, delta);
            const std::vector<double> flat = nn::flatten_gradient(grad);
            for (std::size_t j = 0; j < p; ++j) {
                jac(static_cast<Eigen::Index>(i * static_cast<std::size_t>(k) + static_cast<std::size_t>(c)),
                    static_cast<Eigen::Index>(j)) = flat[j];
            }
        }
    }
    return jac;
}

Eigen::VectorXd label_residual(const nn::MlpModel& reference, const Matrix& inputs, std::span<const int> labels) {
    const Matrix logits = nn::forward_logits(reference, inputs);
    const int k = reference.num_classes();
    Eigen::VectorXd residual(static_cast<Eigen::Index>(inputs.rows() * static_cast<std::size_t>(k)));
    for (std::size_t i = 0; i < inputs.rows(); ++i) {
        for (int c = 0; c < k; ++c) {
            const double onehot = labels[i] == c ? 1.0 : 0.0;
            residual(static_cast<Eigen::Index>(i * static_cast<std::size_t>(k) + static_cast<std::size_t>(c))) =
                onehot - logits(i, static_cast<std::size_t>(c));
        }
    }
    return residual;
}

// Solves K z = b through the ridge factorization with iterative refinement,
// which drives the projector annihilation P J_r^T to machine precision even
// though the factorization itself is of K + ridge*I.
Eigen::VectorXd refined_solve(const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::MatrixXd& kernel,
                              const Eigen::VectorXd& b, int refinements = 3) {
    Eigen::VectorXd z = llt.solve(b);
    for (int i = 0; i < refinements; ++i) {
        const Eigen::VectorXd residual = b - kernel * z;
        z += llt.solve(residual);
    }
    return z;
}

}  // namespace

NtkResult ntk_removal(const nn::MlpModel& original, const nn::MlpModel& init_reference,
                      const data::UnlearnTask& task, NtkDiagnostics* diagnostics) {
    NtkResult result;
    result.model = original;
    if (task.forget_idx.empty()) {
        return result;
    }
    const data::Dataset& ds = task.dataset;
    const Matrix retain_inputs = data::gather_rows(ds.features, task.retain_idx);
    const Matrix forget_inputs = data::gather_rows(ds.features, task.forget_idx);
    const std::vector<int> retain_labels = data::gather_labels(ds.labels, task.retain_idx);
    const std::vector<int> forget_labels = data::gather_labels(ds.labels, task.forget_idx);

    const Eigen::MatrixXd jac_r = parameter_jacobian(original, retain_inputs);
    const Eigen::MatrixXd jac_f = parameter_jacobian(original, forget_inputs);

    const Eigen::MatrixXd k_rr = jac_r * jac_r.transpose();
    const Eigen::MatrixXd k_fr = jac_f * jac_r.transpose();
    const Eigen::MatrixXd k_ff = jac_f * jac_f.transpose();

    const Eigen::Index nr = k_rr.rows();
    Eigen::MatrixXd k_rr_ridge = k_rr;
    k_rr_ridge.diagonal().array() += kKernelRidge;
    const Eigen::LLT<Eigen::MatrixXd> llt(k_rr_ridge);
    if (llt.info() != Eigen::Success) {
        throw NumericError("ntk: retain kernel factorization failed");
    }

    // rough condition estimate from the Cholesky diagonal
    const Eigen::VectorXd ldiag = llt.matrixL().toDenseMatrix().diagonal();
    const double cond_estimate =
        std::pow(ldiag.maxCoeff() / std::max(ldiag.minCoeff(), 1e-300), 2.0);
    if (diagnostics != nullptr) {
        diagnostics->cond_estimate = cond_estimate;
    }
    if (cond_estimate > 1e12) {
        result.warning = "ntk: retain kernel condition estimate exceeds 1e12";
    }

    const Eigen::VectorXd u_r = label_residual(init_reference, retain_inputs, retain_labels);
    const Eigen::VectorXd u_f = label_residual(init_reference, forget_inputs, forget_labels);

    // V = K_fr K_rr^{-1} u_r - u_f
    const Eigen::VectorXd v = k_fr * refined_solve(llt, k_rr, u_r) - u_f;

    // M = (K_ff - K_fr K_rr^{-1} K_rf)^{-1}
    Eigen::MatrixXd k_rr_inv_k_rf(nr, k_fr.rows());
    for (Eigen::Index c = 0; c < k_fr.rows(); ++c) {
        k_rr_inv_k_rf.col(c) = refined_solve(llt, k_rr, k_fr.row(c).transpose());
    }
    const Eigen::MatrixXd schur = k_ff - k_fr * k_rr_inv_k_rf;
    Eigen::MatrixXd schur_ridge = schur;
    schur_ridge.diagonal().array() += kKernelRidge;
    const Eigen::LLT<Eigen::MatrixXd> schur_llt(schur_ridge);
    if (schur_llt.info() != Eigen::Success) {
        throw NumericError("ntk: Schur complement factorization failed");
    }
    const Eigen::VectorXd mv = refined_solve(schur_llt, schur, v);

    // P = I - J_r^T K_rr^{-1} J_r is the orthogonal projector onto the
    // complement of row(J_r); applying it through an orthonormal basis of
    // J_r^T keeps the annihilation P J_r^T = 0 at machine precision, which
    // the ridged kernel inverse cannot.
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(jac_r.transpose());
    const Eigen::Index rank = qr.rank();
    const Eigen::MatrixXd q_basis =
        qr.householderQ() * Eigen::MatrixXd::Identity(jac_r.cols(), rank);
    const auto apply_projector = [&](const Eigen::VectorXd& u) -> Eigen::VectorXd {
        return u - q_basis * (q_basis.transpose() * u);
    };

    // update = P J_f^T M V
    const Eigen::VectorXd pu = apply_projector(jac_f.transpose() * mv);

    if (diagnostics != nullptr) {
        // projector annihilation residual: max |(P J_r^T)_{ij}|
        double worst = 0.0;
        for (Eigen::Index row = 0; row < jac_r.rows(); ++row) {
            const Eigen::VectorXd pcol = apply_projector(jac_r.row(row).transpose());
            worst = std::max(worst, pcol.lpNorm<Eigen::Infinity>());
        }
        diagnostics->projector_residual_inf = worst;
    }

    std::vector<double> params = nn::flatten_params(result.model);
    for (std::size_t i = 0; i < params.size(); ++i) {
        params[i] += pu(static_cast<Eigen::Index>(i));
    }
    nn::set_params(result.model, params);
    return result;
}

}  // namespace ulab::unlearn
