#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "fcb/common.hpp"
#include "fcb/geometry.hpp"

namespace fcb {

// Squared-exponential kernel parameters. `amplitude` is the output variance
// (the square of the usual signal scale); lengthscales are per-axis, in
// state units.
struct KernelParams {
  double amplitude = 1.0;
  Eigen::VectorXd lengthscales;

  void validate(int n) const;
  double sigma() const { return std::sqrt(amplitude); }
};

double sqexp(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
             const KernelParams& params);

Eigen::MatrixXd gram(const Eigen::MatrixXd& points, const KernelParams& params);

// One observed transition per row.
struct SampleSet {
  Eigen::MatrixXd states;      // N x n
  Eigen::MatrixXd successors;  // N x n

  std::int64_t count() const { return states.rows(); }
  int dim() const { return static_cast<int>(states.cols()); }

  // CSV with header x1,...,xn,xp1,...,xpn and one transition per row.
  void save_csv(const std::string& path) const;
  static SampleSet load_csv(const std::string& path);
  std::string csv_bytes() const;

  // Emits a warning string (empty if none) rather than failing: successors
  // may legitimately fall outside the declared domain.
  std::string validate(const Domain& domain) const;
};

// Empirical conditional-mean-embedding model: the regularized Gram
// factorization shared by every weight evaluation. Immutable once
// factorized; solve/weight calls are safe to run concurrently.
struct CMEModel {
  SampleSet data;
  KernelParams kernel_in;
  KernelParams kernel_out;
  double lambda = 1e-5;

  Eigen::MatrixXd regularized;  // K + N*lambda*I
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::LDLT<Eigen::MatrixXd> ldlt;
  bool used_fallback = false;

  static CMEModel fit(SampleSet data, KernelParams k_in, KernelParams k_out,
                      double lambda);

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;

  // Kernel vector k(x) against the sample states.
  Eigen::VectorXd kernel_row(const Eigen::VectorXd& x) const;
};

// w(x): solution of (K + N*lambda*I) w = k(x). The system matrix is
// symmetric, so this matches the transposed form of the defining equation.
Eigen::VectorXd cme_weights(const Eigen::VectorXd& x, const CMEModel& model);

double cme_expectation(const Eigen::VectorXd& values_at_successors,
                       const Eigen::VectorXd& weights);

// Per-axis median of pairwise absolute coordinate differences; axes whose
// median is zero (duplicated coordinates) fall back to the mean difference.
Eigen::VectorXd median_heuristic(const Eigen::MatrixXd& points);

}  // namespace fcb
