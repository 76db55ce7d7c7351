#include "fcb/simd.hpp"

#include <immintrin.h>

#include <cmath>
#include <limits>

namespace fcb::simd {

double dot_ref(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_ref(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double abs_sum_ref(const double* v, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::fabs(v[i]);
  return acc;
}

MinMax minmax_ref(const double* v, std::size_t n) {
  MinMax r{std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < n; ++i) {
    if (v[i] < r.mn) r.mn = v[i];
    if (v[i] > r.mx) r.mx = v[i];
  }
  return r;
}

void sqdiff_acc_ref(double* acc, const double* src, double shift, double scale,
                    std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    double d = src[i] - shift;
    acc[i] += scale * d * d;
  }
}

namespace {

__attribute__((target("avx2,fma"))) double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

__attribute__((target("avx2,fma"))) double dot_avx2(const double* a,
                                                    const double* b,
                                                    std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                           acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                           acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  return acc + dot_ref(a + i, b + i, n - i);
}

__attribute__((target("avx2,fma"))) void axpy_avx2(double alpha,
                                                   const double* x, double* y,
                                                   std::size_t n) {
  __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  axpy_ref(alpha, x + i, y + i, n - i);
}

__attribute__((target("avx2,fma"))) double abs_sum_avx2(const double* v,
                                                        std::size_t n) {
  const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_and_pd(mask, _mm256_loadu_pd(v + i)));
    acc1 = _mm256_add_pd(acc1, _mm256_and_pd(mask, _mm256_loadu_pd(v + i + 4)));
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_add_pd(acc0, _mm256_and_pd(mask, _mm256_loadu_pd(v + i)));
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  return acc + abs_sum_ref(v + i, n - i);
}

__attribute__((target("avx2,fma"))) MinMax minmax_avx2(const double* v,
                                                       std::size_t n) {
  if (n < 8) return minmax_ref(v, n);
  __m256d vmn = _mm256_loadu_pd(v);
  __m256d vmx = vmn;
  std::size_t i = 4;
  for (; i + 4 <= n; i += 4) {
    __m256d x = _mm256_loadu_pd(v + i);
    vmn = _mm256_min_pd(vmn, x);
    vmx = _mm256_max_pd(vmx, x);
  }
  alignas(32) double buf[4];
  MinMax r{std::numeric_limits<double>::infinity(),
           -std::numeric_limits<double>::infinity()};
  _mm256_store_pd(buf, vmn);
  for (double x : buf) r.mn = x < r.mn ? x : r.mn;
  _mm256_store_pd(buf, vmx);
  for (double x : buf) r.mx = x > r.mx ? x : r.mx;
  MinMax tail = minmax_ref(v + i, n - i);
  r.mn = tail.mn < r.mn ? tail.mn : r.mn;
  r.mx = tail.mx > r.mx ? tail.mx : r.mx;
  return r;
}

__attribute__((target("avx2,fma"))) void sqdiff_acc_avx2(double* acc,
                                                         const double* src,
                                                         double shift,
                                                         double scale,
                                                         std::size_t n) {
  __m256d vshift = _mm256_set1_pd(shift);
  __m256d vscale = _mm256_set1_pd(scale);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(src + i), vshift);
    __m256d va = _mm256_loadu_pd(acc + i);
    va = _mm256_fmadd_pd(_mm256_mul_pd(d, d), vscale, va);
    _mm256_storeu_pd(acc + i, va);
  }
  sqdiff_acc_ref(acc + i, src + i, shift, scale, n - i);
}

Isa g_active = detect();

}  // namespace

Isa detect() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")
             ? Isa::avx2
             : Isa::scalar;
}

Isa active() { return g_active; }

void force(Isa isa) { g_active = isa; }

double dot(const double* a, const double* b, std::size_t n) {
  return g_active == Isa::avx2 ? dot_avx2(a, b, n) : dot_ref(a, b, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  if (g_active == Isa::avx2)
    axpy_avx2(alpha, x, y, n);
  else
    axpy_ref(alpha, x, y, n);
}

double abs_sum(const double* v, std::size_t n) {
  return g_active == Isa::avx2 ? abs_sum_avx2(v, n) : abs_sum_ref(v, n);
}

MinMax minmax(const double* v, std::size_t n) {
  return g_active == Isa::avx2 ? minmax_avx2(v, n) : minmax_ref(v, n);
}

void sqdiff_acc(double* acc, const double* src, double shift, double scale,
                std::size_t n) {
  if (g_active == Isa::avx2)
    sqdiff_acc_avx2(acc, src, shift, scale, n);
  else
    sqdiff_acc_ref(acc, src, shift, scale, n);
}

}  // namespace fcb::simd
