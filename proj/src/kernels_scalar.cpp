#include "ulab/kernels.hpp"

// Scalar reference lane. These loops define the semantics the AVX2 lane is
// tested against: elementwise kernels must match bit-for-bit, reductions to
// a relative tolerance.

namespace ulab::kernels::scalar_impl {

void axpy(double a, std::span<const double> x, std::span<double> y) {
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = y[i] + a * x[i];
    }
}

void scale(double a, std::span<double> x) {
    for (double& v : x) {
        v = a * v;
    }
}

void momentum_update(std::span<double> buf, std::span<const double> g, double momentum) {
    const std::size_t n = buf.size();
    for (std::size_t i = 0; i < n; ++i) {
        buf[i] = momentum * buf[i] + g[i];
    }
}

void weight_step(std::span<double> w, std::span<const double> buf, double lr) {
    const std::size_t n = w.size();
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = w[i] - lr * buf[i];
    }
}

void relu(std::span<const double> z, std::span<double> out) {
    const std::size_t n = z.size();
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = z[i] > 0.0 ? z[i] : 0.0;
    }
}

void relu_grad_mask(std::span<const double> z, std::span<double> g) {
    const std::size_t n = z.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (!(z[i] > 0.0)) {
            g[i] = 0.0;
        }
    }
}

void clamp01(std::span<double> x) {
    for (double& v : x) {
        if (v < 0.0) {
            v = 0.0;
        } else if (v > 1.0) {
            v = 1.0;
        }
    }
}

void sign_step(std::span<double> x, std::span<const double> g, double tau) {
    const std::size_t n = x.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double s = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
        x[i] = x[i] + tau * s;
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

double sumsq(std::span<const double> a) {
    double acc = 0.0;
    for (double v : a) {
        acc += v * v;
    }
    return acc;
}

}  // namespace ulab::kernels::scalar_impl
