#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fcb/geometry.hpp"

namespace fcb {

// Deterministic bounds for trigonometric fields from their values on a
// sampling lattice. C is the global tightening coefficient; A_map holds one
// local leakage coefficient per constraint family, keyed by the family's
// label.
struct TighteningCoefficients {
  double C = 1.0;
  std::map<std::string, double> A_map;
  int f_max = 0;
  int Q = 0;
  int n = 0;

  // C >= 1, every A >= 0, and every denominator C - 2A + 1 > 0. The last
  // one is what the constraint branches divide by; a violation means the
  // lattice is too coarse or the split buffer too thin for that family.
  void validate() const;
};

// Global coefficient (1 - 2*f_max/Q)^(-n/2) relating lattice extremes of a
// trigonometric field of per-axis degree <= f_max to its true range.
// Requires Q >= 2*f_max + 1; decreasing in Q, increasing in f_max and n.
double c_coefficient(int f_max, int Q, int n);

// Vallee-Poussin kernel, product over components:
//   (1/(b-a)^n) * prod_i sin((b+a) z_i / 2) sin((b-a) z_i / 2) / sin^2(z_i/2)
// with the removable singularities at z_i in 2*pi*Z evaluated by a series.
// With a = f_max and b = Q - f_max it reproduces degree-<=a fields from
// their values on the Q-per-axis lattice, which is what every bound in this
// module leans on. D(0) = (a+b)^n and D is even.
double vallee_poussin(const Eigen::VectorXd& z, int a, int b);

// Search policy for the local leakage coefficient. `region` is the set the
// supremum is taken over — already inflated by the caller, so the same
// geometry feeds the lattice split and the coefficient. The search scans a
// dense grid at `refine` times the lattice resolution over the region's
// bounding box, polishes the best candidate by coordinate descent, and
// inflates the result by `safety` to cover what a finite scan misses.
// Over-estimation only adds conservatism, never unsoundness.
struct SearchConfig {
  Region region;
  int refine = 8;
  int descent_rounds = 3;
  double safety = 1.05;
};

// Upper bound on
//   sup_{x in region} (1/Ntot) * sum_{l in outside_indices} |D(x - x_l)|
// where D is the Vallee-Poussin kernel with a = f_max, b = Q - f_max in the
// lattice's phase coordinates. The absolute sum is deliberate: it bounds
// the leakage term regardless of the signs the kernel takes, so the local
// interval below stays valid for any values the outside points carry.
// outside_indices must be exactly the out-half of the lattice split the
// constraints use. Empty outside set gives 0.
double a_coefficient(const Lattice& lattice,
                     const std::vector<std::int64_t>& outside_indices,
                     int f_max, int Q, const SearchConfig& search);

struct Extremes {
  double minimum = 0.0;
  double maximum = 0.0;
};

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

// Extremes of values(i) over the listed indices; the list must be nonempty.
Extremes extremes_over(const Eigen::VectorXd& values,
                       const std::vector<std::int64_t>& indices);

// Interval containing B(x) for every x in the region behind A, for any
// trigonometric field B of per-axis degree <= f_max, given B's extremes
// over the in-split lattice points (inside) and over the out-split points
// (outside). Writing ctr and hr for the center and half-range of the inside
// extremes, the reproduction identity splits B(x) into ctr, an in-sum the
// absolute kernel row sum bounds by C*hr, and an out-sum bounded by A times
// the largest deviation of the outside values from ctr. Hence
//   |B(x) - ctr| <= C*hr + A*max(out_max - ctr, ctr - out_min, 0).
// With A = 0 this is exactly the global-extremes bound; equal extremes
// everywhere collapse the interval to the constant. The outside extremes
// are ignored when A = 0, so callers with an empty out-split need not
// fabricate values.
Interval local_bounds(const Extremes& inside, const Extremes& outside,
                      double C, double A);

}  // namespace fcb
