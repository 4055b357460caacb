#include "ulab/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace ulab::kernels {

namespace {

Lane detect_lane() {
#if ULAB_HAVE_AVX2_LANE
    const char* env = std::getenv("UNLEARN_LAB_SIMD");
    if (env != nullptr) {
        if (std::strcmp(env, "scalar") == 0) {
            return Lane::scalar;
        }
        if (std::strcmp(env, "avx2") == 0) {
            if (!avx2_available()) {
                throw std::runtime_error("UNLEARN_LAB_SIMD=avx2 requested but CPU lacks AVX2");
            }
            return Lane::avx2;
        }
        // anything else, including "auto", falls through to detection
    }
    return avx2_available() ? Lane::avx2 : Lane::scalar;
#else
    return Lane::scalar;
#endif
}

Lane& lane_slot() {
    static Lane lane = detect_lane();
    return lane;
}

}  // namespace

bool avx2_available() {
#if ULAB_HAVE_AVX2_LANE
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Lane active_lane() { return lane_slot(); }

const char* lane_name(Lane lane) { return lane == Lane::avx2 ? "avx2" : "scalar"; }

void force_lane_for_testing(Lane lane) {
    if (lane == Lane::avx2 && !avx2_available()) {
        throw std::runtime_error("cannot force avx2 lane: not available on this CPU");
    }
    lane_slot() = lane;
}

void reset_lane_for_testing() { lane_slot() = detect_lane(); }

#if ULAB_HAVE_AVX2_LANE
#define ULAB_DISPATCH(fn, ...)                  \
    if (active_lane() == Lane::avx2) {          \
        return avx2_impl::fn(__VA_ARGS__);      \
    }                                           \
    return scalar_impl::fn(__VA_ARGS__)
#else
#define ULAB_DISPATCH(fn, ...) return scalar_impl::fn(__VA_ARGS__)
#endif

void axpy(double a, std::span<const double> x, std::span<double> y) { ULAB_DISPATCH(axpy, a, x, y); }
void scale(double a, std::span<double> x) { ULAB_DISPATCH(scale, a, x); }
void momentum_update(std::span<double> buf, std::span<const double> g, double momentum) {
    ULAB_DISPATCH(momentum_update, buf, g, momentum);
}
void weight_step(std::span<double> w, std::span<const double> buf, double lr) {
    ULAB_DISPATCH(weight_step, w, buf, lr);
}
void relu(std::span<const double> z, std::span<double> out) { ULAB_DISPATCH(relu, z, out); }
void relu_grad_mask(std::span<const double> z, std::span<double> g) { ULAB_DISPATCH(relu_grad_mask, z, g); }
void clamp01(std::span<double> x) { ULAB_DISPATCH(clamp01, x); }
void sign_step(std::span<double> x, std::span<const double> g, double tau) {
    ULAB_DISPATCH(sign_step, x, g, tau);
}
double dot(std::span<const double> a, std::span<const double> b) { ULAB_DISPATCH(dot, a, b); }
double sumsq(std::span<const double> a) { ULAB_DISPATCH(sumsq, a); }

#undef ULAB_DISPATCH

}  // namespace ulab::kernels
