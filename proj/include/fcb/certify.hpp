#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fcb/bounds.hpp"
#include "fcb/geometry.hpp"
#include "fcb/kernels.hpp"
#include "fcb/lp.hpp"
#include "fcb/rng.hpp"
#include "fcb/spectral.hpp"
#include "fcb/systems.hpp"

namespace fcb {

// max(0, 1 - (eta + c*T)). `vacuous` marks a bound that carries no
// information (the raw value was <= 0). When c = 0 the same eta also bounds
// the unbounded-horizon probability by 1 - eta; that claim is only valid
// for c exactly zero and is reported separately by the CLI, never silently
// substituted.
struct SafetyBound {
  double probability = 0.0;
  bool vacuous = false;
};

SafetyBound safety_probability(double eta, double c, int horizon);

// ---------------------------------------------------------------------------
// Certificate
// ---------------------------------------------------------------------------

struct Certificate {
  // Geometry and kernels (enough to rebuild the basis deterministically).
  Domain domain;
  KernelParams kernel_in, kernel_out;
  double lambda = 1e-5;
  int m_per_axis = 0;
  int oversample = 0;
  int hfit_oversample = 0;

  ProblemSpec problem;  // regions, horizon, epsilon, norm cap, kappa, splits

  Eigen::VectorXd b;  // spectral coefficients, length 2M+1
  double eta = 0.0;
  double c = 0.0;
  double p_n = 0.0;
  bool vacuous = false;

  double kushner_margin = 0.0;  // extra decrease headroom baked into the LP
  TighteningCoefficients tight;

  // Provenance and diagnostics.
  std::string dataset_hash;
  std::uint64_t seed = 0;
  std::string config_hash;
  double fit_residual = 0.0;  // spectral-projection reconstruction residual
  double lp_objective = 0.0;
  std::int64_t lp_iterations = 0;

  // Wall-clock seconds per pipeline stage (transient; not serialized).
  std::vector<std::pair<std::string, double>> stage_seconds;

  SpectralBasis rebuild_basis() const;
  double b_norm() const { return b.norm(); }
  void validate() const;

  std::string to_json_text() const;
  static Certificate from_json_text(const std::string& text);
  void save(const std::string& path) const;
  static Certificate load(const std::string& path);
};

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

struct SynthesisSettings {
  int m_per_axis = 4;
  int oversample = 8;        // constraint lattice density multiple
  int hfit_oversample = 4;   // surrogate-fit lattice density multiple
  int memory_budget_mb = 512;
  double lp_tolerance = 1e-8;
  std::int64_t iteration_cap = 200000;
  std::string backend;  // external LP command; empty = built-in simplex
  int bound_refine = 8;  // candidate grid refinement of the bound search

  // The decrease condition is enforced on the truncated surrogate of the
  // empirical embedding. Each margin iteration measures the worst gap
  // between the exact embedding and the surrogate on the fit lattice for
  // the current coefficients and re-solves with the decrease target
  // tightened by headroom * gap, so the final certificate also satisfies
  // the exact condition up to the audited tolerance.
  int margin_iters = 2;
  double margin_headroom = 1.25;
  std::optional<double> fixed_margin;  // bypass measurement (sweep mode)

  // When epsilon > 0 the decrease offset scales with the norm cap, so a
  // solution with |b| above the cap is unsound; synthesis retries with the
  // cap doubled. Zero retries = fail immediately (sweep comparability).
  int norm_retries = 6;

  void validate() const;
};

struct SynthesisInputs {
  ProblemSpec problem;
  KernelParams kernel_in, kernel_out;
  double lambda = 1e-5;
  SampleSet data;
  std::uint64_t seed = 0;        // provenance only
  std::string config_hash;       // provenance only
};

Certificate synthesize(const SynthesisInputs& inputs,
                       const SynthesisSettings& settings);

// Re-synthesizes across ambiguity radii with the decrease margin measured
// once at epsilon = 0 and then held fixed, and the norm cap fixed, so every
// solve shares the same feasible-set geometry: growing epsilon then only
// tightens the decrease target, which makes the certified probability
// non-increasing by construction. Returns one certificate per radius in
// input order.
std::vector<Certificate> synthesize_sweep(const SynthesisInputs& inputs,
                                          const SynthesisSettings& settings,
                                          const std::vector<double>& epsilons);

// ---------------------------------------------------------------------------
// Independent checking
// ---------------------------------------------------------------------------

struct AuditSettings {
  int factor = 10;        // audit lattice density multiple of the LP lattice
  double tolerance = 1e-4;
  int memory_budget_mb = 4096;
};

struct FamilyCheck {
  std::string name;
  double worst = 0.0;      // worst residual (positive = towards violation)
  double threshold = 0.0;  // the value the worst residual is compared against
  std::int64_t points = 0;
  bool pass = false;
};

struct MonteCarloResult {
  double estimate = 0.0;
  double halfwidth = 0.0;
  double lower = 0.0;  // clamped to [0,1]
  double upper = 0.0;
  std::int64_t runs = 0;
  double confidence = 0.0;
  bool degenerate = false;  // single run or saturated estimate
};

struct ValidationReport {
  FamilyCheck init, unsafe_region, kushner, positivity;
  int audit_factor = 0;
  double tolerance = 0.0;
  std::int64_t audit_q = 0;  // per-axis audit lattice count
  bool has_mc = false;
  MonteCarloResult mc;
  double certified_p_n = 0.0;

  bool pass() const;
  std::string to_json_text() const;
  void save(const std::string& path) const;
};

// Re-verifies the barrier conditions on a denser lattice against the exact
// empirical embedding (never the truncated surrogate), over the raw declared
// regions. This independently audits the spectral truncation: a certificate
// whose surrogate hid too much embedding mass fails here with instructions
// to raise m_per_axis or the fit density. Requires the model to match the
// certificate's kernels, regularization, and dataset.
ValidationReport check_certificate(const Certificate& cert,
                                   const CMEModel& model,
                                   const AuditSettings& audit);

// ---------------------------------------------------------------------------
// Monte-Carlo estimation
// ---------------------------------------------------------------------------

// Fraction of `runs` rollouts from x0 that stay clear of the unsafe region
// for `steps` steps, with the distribution-free two-sided interval
// half-width sqrt(p(1-p) / (runs * (1 - confidence))). Run r draws from the
// child stream "mc/r" of the master source.
MonteCarloResult monte_carlo(const SystemSpec& spec, const Eigen::VectorXd& x0,
                             int steps, const Region& unsafe,
                             std::int64_t runs, double confidence,
                             const RandomSource& master);

// Stricter variant: estimates from every point of a grid_per_axis^n grid
// over the initial region (members only) and returns the worst estimate.
MonteCarloResult monte_carlo_region(const SystemSpec& spec, const Region& init,
                                    int grid_per_axis, int steps,
                                    const Region& unsafe, std::int64_t runs,
                                    double confidence,
                                    const RandomSource& master);

}  // namespace fcb
