#pragma once

#include <cstddef>
#include <span>

// Data-parallel inner loops used by the network engine, the trainer and the
// attack generators. Every kernel has a scalar reference implementation and
// an AVX2 variant; the active lane is resolved once at runtime from CPU
// capabilities and the UNLEARN_LAB_SIMD environment variable
// (auto | scalar | avx2).
//
// Elementwise kernels are bit-identical across lanes (no FMA contraction,
// same per-element operation order). Reductions accumulate in a different
// order per lane and are equivalence-tested to a relative tolerance instead.
namespace ulab::kernels {

enum class Lane { scalar, avx2 };

Lane active_lane();
const char* lane_name(Lane lane);
bool avx2_available();

// Test hook: force a lane for the current process. Passing Lane::avx2 on a
// machine without AVX2 throws.
void force_lane_for_testing(Lane lane);
void reset_lane_for_testing();

// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);
// x *= a
void scale(double a, std::span<double> x);
// buf = momentum * buf + g
void momentum_update(std::span<double> buf, std::span<const double> g, double momentum);
// w -= lr * buf
void weight_step(std::span<double> w, std::span<const double> buf, double lr);
// out[i] = max(z[i], 0)
void relu(std::span<const double> z, std::span<double> out);
// g[i] = z[i] > 0 ? g[i] : 0
void relu_grad_mask(std::span<const double> z, std::span<double> g);
// x[i] = min(max(x[i], 0), 1)
void clamp01(std::span<double> x);
// x[i] += tau * sign(g[i]), sign(0) = 0
void sign_step(std::span<double> x, std::span<const double> g, double tau);

double dot(std::span<const double> a, std::span<const double> b);
double sumsq(std::span<const double> a);

namespace scalar_impl {
void axpy(double a, std::span<const double> x, std::span<double> y);
void scale(double a, std::span<double> x);
void momentum_update(std::span<double> buf, std::span<const double> g, double momentum);
void weight_step(std::span<double> w, std::span<const double> buf, double lr);
void relu(std::span<const double> z, std::span<double> out);
void relu_grad_mask(std::span<const double> z, std::span<double> g);
void clamp01(std::span<double> x);
void sign_step(std::span<double> x, std::span<const double> g, double tau);
double dot(std::span<const double> a, std::span<const double> b);
double sumsq(std::span<const double> a);
}  // namespace scalar_impl

#if defined(__x86_64__) || defined(_M_X64)
#define ULAB_HAVE_AVX2_LANE 1
namespace avx2_impl {
void axpy(double a, std::span<const double> x, std::span<double> y);
void scale(double a, std::span<double> x);
void momentum_update(std::span<double> buf, std::span<const double> g, double momentum);
void weight_step(std::span<double> w, std::span<const double> buf, double lr);
void relu(std::span<const double> z, std::span<double> out);
void relu_grad_mask(std::span<const double> z, std::span<double> g);
void clamp01(std::span<double> x);
void sign_step(std::span<double> x, std::span<const double> g, double tau);
double dot(std::span<const double> a, std::span<const double> b);
double sumsq(std::span<const double> a);
}  // namespace avx2_impl
#else
#define ULAB_HAVE_AVX2_LANE 0
#endif

}  // namespace ulab::kernels
