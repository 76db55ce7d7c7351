#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fcb/certify.hpp"
#include "fcb/kernels.hpp"
#include "fcb/lp.hpp"
#include "fcb/systems.hpp"

namespace fcb {

// Run configuration parsed from a sectioned key-value text file:
//
//   # comment (a '#' starts a comment anywhere on a line)
//   [system]
//   kind = barr3            # barr3 | dubins | user_map
//   tau = 0.1               # defaults come from the chosen kind
//   noise_std = 0.1 0.1     # per-axis standard deviations
//   velocity = 1.0          # dubins forward speed
//   controller = net.json   # dubins: neural steering policy (path relative
//                           # to the config file)
//   policy = steer          # dubins: analytic policy when no controller
//   command = ./map         # user_map: external drift executable
//   samples = 1000          # dataset size for `gen`
//
//   [kernel]
//   amplitude_in = 1.0
//   lengthscales_in = auto  # "auto" = per-axis median heuristic, or a list
//   amplitude_out = 1.0
//   lengthscales_out = auto
//   lambda = 1e-5
//
//   [basis]
//   m_per_axis = 4
//   oversample = 8
//   hfit_oversample = 4
//   memory_budget_mb = 512
//
//   [problem]
//   lower = -2 -2           # state domain (defaults from the system kind)
//   upper = 2 2
//   x0 = {"kind":"box",...} # inline region JSON, or @file.json relative to
//   xu = @unsafe.json       # the config file
//   horizon = 5
//   epsilon = 0.0
//   norm_cap = 12
//   inflation = 0.02
//   split_buffer_spacings = 2
//
//   [solver]
//   tolerance = 1e-8
//   iteration_cap = 200000
//   backend =               # external LP command; empty = built-in
//   bound_refine = 8
//   margin_iters = 2
//   margin_headroom = 1.25
//   norm_retries = 6
//
//   [run]
//   seed = 7
//   start = 1 0.5           # Monte-Carlo / trajectory start state
//   mc_grid_per_axis = 0    # > 0: worst case over a grid in the initial set
//   audit_factor = 10
//   audit_tolerance = 1e-4
//   audit_memory_mb = 4096
//   export_grid = 100
//   export_slice = 2:0.0    # axis:value pairs fixing coordinates for n > 2
//
// Parsing is total: malformed lines, unknown sections or keys, duplicate
// keys, and type errors all fail with the offending line number.
struct RunConfig {
  SystemSpec system;
  std::int64_t samples = 1000;

  double amplitude_in = 1.0;
  double amplitude_out = 1.0;
  // Empty optional = resolve with the per-axis median heuristic on the data.
  std::optional<Eigen::VectorXd> lengthscales_in;
  std::optional<Eigen::VectorXd> lengthscales_out;
  double lambda = 1e-5;

  ProblemSpec problem;  // domain always set; regions only if has_regions
  bool has_regions = false;
  SynthesisSettings settings;

  std::uint64_t seed = 0;
  std::optional<Eigen::VectorXd> start;
  int mc_grid_per_axis = 0;
  AuditSettings audit;
  int export_grid = 100;
  std::vector<std::pair<int, double>> export_slice;

  std::string config_hash;  // sha256 of the raw config bytes

  // Resolve kernel parameters, replacing "auto" lengthscales with the
  // median heuristic over the data's input states.
  KernelParams kernel_in(const SampleSet& data) const;
  KernelParams kernel_out(const SampleSet& data) const;

  // Bundle everything synthesize() needs. Requires [problem] regions.
  SynthesisInputs inputs(const SampleSet& data) const;
};

// `origin` names the source in diagnostics and anchors @file region and
// controller paths (paths resolve relative to its directory).
RunConfig parse_config_text(const std::string& text, const std::string& origin);
RunConfig load_config(const std::string& path);

}  // namespace fcb
