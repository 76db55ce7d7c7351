#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "fcb/bounds.hpp"
#include "fcb/geometry.hpp"
#include "fcb/spectral.hpp"

namespace fcb {

// Dense-row linear program: minimize objective . x subject to the stored
// rows (relation '<' means <=, '>' means >=) and per-variable bounds
// (-inf / +inf for unbounded sides, lb == ub pins a variable).
struct LPModel {
  std::int64_t nvars = 0;
  std::vector<std::string> var_names;
  Eigen::VectorXd lb, ub;
  Eigen::VectorXd objective;
  std::vector<double> coefs;  // row-major, rows() x nvars
  std::vector<double> rhs;
  std::vector<char> rel;
  std::vector<std::string> row_names;

  std::int64_t rows() const { return static_cast<std::int64_t>(rhs.size()); }
  double* row(std::int64_t r) { return coefs.data() + r * nvars; }
  const double* row(std::int64_t r) const { return coefs.data() + r * nvars; }

  // Appends a zero row and returns a pointer to its coefficients.
  double* add_row(std::string name, char relation, double rhs_value);

  void validate() const;
};

// Verification problem: certify that trajectories started in x0 stay out of
// xu for `horizon` steps while remaining in `domain`. epsilon is the
// ambiguity radius around the data-estimated transition map (RKHS units),
// norm_cap the coefficient-norm bound the radius is priced against, kappa
// the kernel sup (input-kernel sigma_f; exact for translation-invariant
// kernels). inflation and split_buffer_spacings control how regions are
// grown before lattice splits and bound-coefficient searches: the relative
// inflation keeps faith with the certified sets, the absolute buffer (in
// lattice spacings) keeps out-split points away from the region so the
// local coefficients stay small.
struct ProblemSpec {
  Domain domain;
  Region x0;
  Region xu;
  int horizon = 1;
  double epsilon = 0.0;
  double norm_cap = 1.0;
  double kappa = 1.0;
  double inflation = 0.02;
  double split_buffer_spacings = 2.0;

  void validate() const;
};

// One lattice partition per constraint family. The x family covers the
// whole state domain (as a box); x0 and xu are the initial and unsafe
// regions. All three partition the same lattice.
struct FamilySplits {
  Partition x0;
  Partition xu;
  Partition x;
};

enum class Family { x0, xu, x };

// Region the named family's constraints are certified over: the problem
// region (domain as a box for Family::x) inflated by spec.inflation. This
// is the supremum domain for the local bound-coefficient search.
Region family_region(const ProblemSpec& spec, Family family);

// Lattice splits for all three families: each family's in-split collects
// the lattice points inside family_region grown by an extra absolute buffer
// of split_buffer_spacings lattice steps. The buffer only moves points
// between the splits — the bound stays valid for any split — but pushing
// the out-split away from the region is what keeps its leakage coefficient
// usefully small.
FamilySplits split_families(const ProblemSpec& spec, const Lattice& lattice);

// Assembles the finite LP whose feasible points are certified barrier
// coefficients. Variables: b (one per basis feature), c, eta, then four
// auxiliaries per constraint family (in-split upper and lower extremes,
// out-split upper and lower extremes); objective minimize eta + c*horizon.
// Every lattice point contributes two rows per scalar family (its field
// value against the family's in- or out-extreme variables, depending on
// which side of the split it is on) and four for the state family, which
// carries both the expected-drift field and the positivity field. Twelve
// relation rows then encode, family by family, that the sound local upper
// (or lower) bound assembled from those extremes meets the certificate
// threshold: eta on the initial set, 1 on the unsafe set, c minus the
// ambiguity offset epsilon*norm_cap*kappa for the drift, 0 for positivity.
// Each of the three rows per family clears the same positive denominator,
// one per branch of the deviation maximum, so feasibility is exactly the
// bound condition. kushner_margin additionally tightens the drift rows'
// right-hand side; synthesis uses it to absorb the measured gap between
// the exact data-driven expectation and its feature-space truncation.
LPModel assemble(const ProblemSpec& spec, const SpectralBasis& basis,
                 const TransferMatrix& transfer, const Lattice& lattice,
                 const FamilySplits& splits,
                 const TighteningCoefficients& tight,
                 double kushner_margin = 0.0);

// Plain-text serialization. Grammar (one item per line, single-space
// separated tokens, numbers printed with 17 significant digits):
//   minimize
//    obj: + c0 var0 - c1 var1 ...
//   subject to            (section omitted when the model has no rows)
//    name: + c var ... <= rhs        (or >=)
//   bounds
//    var free | var = v | lo <= var <= hi    (one line per variable,
//                                             -inf / inf for open sides)
// Zero-coefficient terms are omitted; an all-zero row or objective keeps a
// single "+ 0 firstvar" term. export(parse(export(m))) is byte-identical
// to export(m).
std::string export_lp(const LPModel& model);
LPModel parse_lp(const std::string& text);

}  // namespace fcb
