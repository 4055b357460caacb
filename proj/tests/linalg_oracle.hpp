#pragma once

// Test-local dense linear algebra: the independent route for checking the
// closed-form kernel update. Gaussian elimination only, no shared code with
// the implementation under test.

#include <cmath>
#include <span>
#include <vector>

#include "ulab/common.hpp"

namespace linalg_oracle {

inline std::vector<double> solve_dense(std::vector<std::vector<double>> a, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t row = col + 1; row < n; ++row) {
            if (std::abs(a[row][col]) > std::abs(a[pivot][col])) {
                pivot = row;
            }
        }
        std::swap(a[col], a[pivot]);
        std::swap(b[col], b[pivot]);
        const double diag = a[col][col];
        for (std::size_t row = col + 1; row < n; ++row) {
            const double factor = a[row][col] / diag;
            for (std::size_t k = col; k < n; ++k) {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t row = n; row-- > 0;) {
        double acc = b[row];
        for (std::size_t k = row + 1; k < n; ++k) {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    return x;
}

// Parameter Jacobian of a single linear layer, from the closed form: row
// (i, k) carries x_i in the W_k block and 1 in the b_k slot, matching the
// library's row-major weights-then-biases flattening.
inline std::vector<std::vector<double>> linear_jacobian(const ulab::Matrix& inputs, int num_classes) {
    const std::size_t d = inputs.cols();
    const std::size_t p = static_cast<std::size_t>(num_classes) * d + static_cast<std::size_t>(num_classes);
    std::vector<std::vector<double>> jac;
    for (std::size_t i = 0; i < inputs.rows(); ++i) {
        for (int k = 0; k < num_classes; ++k) {
            std::vector<double> row(p, 0.0);
            for (std::size_t j = 0; j < d; ++j) {
                row[static_cast<std::size_t>(k) * d + j] = inputs(i, j);
            }
            row[static_cast<std::size_t>(num_classes) * d + static_cast<std::size_t>(k)] = 1.0;
            jac.push_back(std::move(row));
        }
    }
    return jac;
}

// Minimum-norm kernel fit from a base point: params + J^T (J J^T)^{-1} r.
inline std::vector<double> kernel_fit_params(const std::vector<std::vector<double>>& jac,
                                             const std::vector<double>& base_params,
                                             const std::vector<double>& residual) {
    const std::size_t rows = jac.size();
    std::vector<std::vector<double>> kernel(rows, std::vector<double>(rows, 0.0));
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < rows; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < jac[i].size(); ++k) {
                acc += jac[i][k] * jac[j][k];
            }
            kernel[i][j] = acc;
        }
    }
    const std::vector<double> alpha = solve_dense(kernel, residual);
    std::vector<double> params = base_params;
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t k = 0; k < params.size(); ++k) {
            params[k] += jac[i][k] * alpha[i];
        }
    }
    return params;
}

}  // namespace linalg_oracle
