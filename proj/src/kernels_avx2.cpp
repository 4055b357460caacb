#include "ulab/kernels.hpp"

#if ULAB_HAVE_AVX2_LANE

#include <immintrin.h>

// AVX2 lane, 4 doubles per step with scalar remainder loops. Elementwise
// kernels use separate mul/add (no FMA) so each element goes through the
// exact operation sequence of the scalar lane. The dot/sumsq reductions use
// four independent accumulators plus a horizontal sum, which changes the
// rounding order; FMA is fine there.

namespace ulab::kernels::avx2_impl {

namespace {

double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d shuf = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

}  // namespace

void axpy(double a, std::span<const double> x, std::span<double> y) {
    const std::size_t n = x.size();
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d xv = _mm256_loadu_pd(x.data() + i);
        const __m256d yv = _mm256_loadu_pd(y.data() + i);
        _mm256_storeu_pd(y.data() + i, _mm256_add_pd(yv, _mm256_mul_pd(av, xv)));
    }
    for (; i < n; ++i) {
        y[i] = y[i] + a * x[i];
    }
}

void scale(double a, std::span<double> x) {
    const std::size_t n = x.size();
    const __m256d av = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(x.data() + i, _mm256_mul_pd(av, _mm256_loadu_pd(x.data() + i)));
    }
    for (; i < n; ++i) {
        x[i] = a * x[i];
    }
}

void momentum_update(std::span<double> buf, std::span<const double> g, double momentum) {
    const std::size_t n = buf.size();
    const __m256d mv = _mm256_set1_pd(momentum);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d bv = _mm256_loadu_pd(buf.data() + i);
        const __m256d gv = _mm256_loadu_pd(g.data() + i);
        _mm256_storeu_pd(buf.data() + i, _mm256_add_pd(_mm256_mul_pd(mv, bv), gv));
    }
    for (; i < n; ++i) {
        buf[i] = momentum * buf[i] + g[i];
    }
}

void weight_step(std::span<double> w, std::span<const double> buf, double lr) {
    const std::size_t n = w.size();
    const __m256d lv = _mm256_set1_pd(lr);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d wv = _mm256_loadu_pd(w.data() + i);
        const __m256d bv = _mm256_loadu_pd(buf.data() + i);
        _mm256_storeu_pd(w.data() + i, _mm256_sub_pd(wv, _mm256_mul_pd(lv, bv)));
    }
    for (; i < n; ++i) {
        w[i] = w[i] - lr * buf[i];
    }
}

void relu(std::span<const double> z, std::span<double> out) {
    const std::size_t n = z.size();
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out.data() + i, _mm256_max_pd(_mm256_loadu_pd(z.data() + i), zero));
    }
    for (; i < n; ++i) {
        out[i] = z[i] > 0.0 ? z[i] : 0.0;
    }
}

void relu_grad_mask(std::span<const double> z, std::span<double> g) {
    const std::size_t n = z.size();
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d zv = _mm256_loadu_pd(z.data() + i);
        const __m256d gv = _mm256_loadu_pd(g.data() + i);
        const __m256d mask = _mm256_cmp_pd(zv, zero, _CMP_GT_OQ);
        _mm256_storeu_pd(g.data() + i, _mm256_and_pd(gv, mask));
    }
    for (; i < n; ++i) {
        if (!(z[i] > 0.0)) {
            g[i] = 0.0;
        }
    }
}

void clamp01(std::span<double> x) {
    const std::size_t n = x.size();
    const __m256d zero = _mm256_setzero_pd();
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_loadu_pd(x.data() + i);
        v = _mm256_min_pd(_mm256_max_pd(v, zero), one);
        _mm256_storeu_pd(x.data() + i, v);
    }
    for (; i < n; ++i) {
        if (x[i] < 0.0) {
            x[i] = 0.0;
        } else if (x[i] > 1.0) {
            x[i] = 1.0;
        }
    }
}

void sign_step(std::span<double> x, std::span<const double> g, double tau) {
    const std::size_t n = x.size();
    const __m256d zero = _mm256_setzero_pd();
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d neg_one = _mm256_set1_pd(-1.0);
    const __m256d tv = _mm256_set1_pd(tau);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gv = _mm256_loadu_pd(g.data() + i);
        const __m256d pos = _mm256_and_pd(_mm256_cmp_pd(gv, zero, _CMP_GT_OQ), one);
        const __m256d neg = _mm256_and_pd(_mm256_cmp_pd(gv, zero, _CMP_LT_OQ), neg_one);
        const __m256d sign = _mm256_add_pd(pos, neg);
        const __m256d xv = _mm256_loadu_pd(x.data() + i);
        _mm256_storeu_pd(x.data() + i, _mm256_add_pd(xv, _mm256_mul_pd(tv, sign)));
    }
    for (; i < n; ++i) {
        const double s = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
        x[i] = x[i] + tau * s;
    }
}

double dot(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i + 4), _mm256_loadu_pd(b.data() + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i), _mm256_loadu_pd(b.data() + i), acc0);
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

double sumsq(std::span<const double> a) {
    const std::size_t n = a.size();
    __m256d acc0 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(a.data() + i);
        acc0 = _mm256_fmadd_pd(v, v, acc0);
    }
    double acc = hsum(acc0);
    for (; i < n; ++i) {
        acc += a[i] * a[i];
    }
    return acc;
}

}  // namespace ulab::kernels::avx2_impl

#endif  // ULAB_HAVE_AVX2_LANE
