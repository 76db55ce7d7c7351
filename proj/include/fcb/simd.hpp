#pragma once

#include <cstddef>
#include <utility>

// Vectorized primitives for the hot loops: constraint pricing dot products,
// dense lattice extrema scans, absolute kernel sums, and squared-distance
// accumulation for Gram rows. Each primitive has a scalar reference
// implementation (the _ref functions) and an AVX2 variant; which one runs is
// decided once at startup from CPUID. force() exists so the equivalence tests
// can pin either path.

namespace fcb::simd {

enum class Isa { scalar, avx2 };

Isa active();
void force(Isa isa);
Isa detect();

struct MinMax {
  double mn;
  double mx;
};

double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double abs_sum(const double* v, std::size_t n);
MinMax minmax(const double* v, std::size_t n);
// acc[i] += scale * (src[i] - shift)^2
void sqdiff_acc(double* acc, const double* src, double shift, double scale,
                std::size_t n);

double dot_ref(const double* a, const double* b, std::size_t n);
void axpy_ref(double alpha, const double* x, double* y, std::size_t n);
double abs_sum_ref(const double* v, std::size_t n);
MinMax minmax_ref(const double* v, std::size_t n);
void sqdiff_acc_ref(double* acc, const double* src, double shift, double scale,
                    std::size_t n);

}  // namespace fcb::simd
