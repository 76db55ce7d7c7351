#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fcb/geometry.hpp"
#include "fcb/kernels.hpp"
#include "fcb/rng.hpp"

namespace fcb {

// ---------------------------------------------------------------------------
// Feedforward network controller.
//
// JSON schema (layer-major, matrices row-major):
//   {
//     "layers": [
//       {"weight": [[w00, w01, ...], ...],   // rows = outputs, cols = inputs
//        "bias":   [b0, ...],
//        "activation": "relu" | "tanh" | "identity"},
//       ...
//     ],
//     "clamp": [lo, hi]                      // optional final output clamp
//   }
// ---------------------------------------------------------------------------

struct MlpLayer {
  Eigen::MatrixXd weight;  // out_dim x in_dim
  Eigen::VectorXd bias;    // out_dim
  std::string activation;  // relu | tanh | identity
};

struct Mlp {
  std::vector<MlpLayer> layers;
  bool has_clamp = false;
  double clamp_lo = 0.0;
  double clamp_hi = 0.0;

  std::int64_t input_dim() const;
  std::int64_t output_dim() const;
  void validate() const;

  static Mlp load_json(const std::string& path);
  static Mlp from_json_text(const std::string& text);
  std::string to_json_text() const;
};

// Affine-activation composition, with the declared clamp applied to the
// final layer's output.
Eigen::VectorXd nn_forward(const Mlp& mlp, const Eigen::VectorXd& x);

// ---------------------------------------------------------------------------
// Benchmark systems.
// ---------------------------------------------------------------------------

enum class SystemKind { barr3, dubins, user_map };

std::string to_string(SystemKind kind);
SystemKind system_kind_from(const std::string& word);

// A discrete-time stochastic system x+ = f(x) + diag(noise_std) * w with
// w ~ N(0, I). For `user_map`, f is an external command `cmd in.csv out.csv`
// mapping a CSV of states to a CSV of successors (same column layout); the
// Gaussian noise is still added on top, so set noise_std to zero when the
// command models its own randomness.
struct SystemSpec {
  SystemKind kind = SystemKind::barr3;
  double tau = 0.1;
  Eigen::VectorXd noise_std;  // per-axis standard deviations
  Domain domain;
  double velocity = 1.0;           // dubins longitudinal speed
  std::optional<Mlp> controller;   // neural steering policy (dubins)
  std::string policy;              // named analytic policy ("steer") or empty
  std::string command;             // user_map external executable

  void validate() const;

  // tau = 0.1, noise std 0.1 per axis (variance 0.01), domain [-2,2]^2.
  static SystemSpec barr3_default();
  // tau = 0.5, v = 1, noise stds (0.01, 0.01, 0.001),
  // domain [0,5] x [-1,1] x [-1,1], analytic "steer" policy.
  static SystemSpec dubins_default();
};

// Steering command for the dubins system: the attached network controller
// when present, otherwise the named analytic policy. The analytic "steer"
// law tracks a Gaussian-bump lane-change path: with target lateral offset
// yt(x) = 0.55 exp(-(x - 2.5)^2 / 2), it aims the heading at the path
// tangent corrected by the lateral error and steers proportionally,
// saturating at [-pi, pi].
double control_input(const SystemSpec& spec, const Eigen::VectorXd& x);

// Deterministic part of the transition (noise-free successor).
Eigen::VectorXd drift(const SystemSpec& spec, const Eigen::VectorXd& x);

// One stochastic transition: drift plus per-axis Gaussian noise (n draws
// from `rng` in axis order).
Eigen::VectorXd step(const SystemSpec& spec, const Eigen::VectorXd& x,
                     RandomSource& rng);

// N i.i.d. uniform states over the domain with one noisy successor each.
// Sample i uses the child stream split("sample/i") of the master source, so
// the dataset is reproducible and independent of evaluation order or thread
// count. user_map drifts are fetched in one batch call.
SampleSet generate_dataset(const SystemSpec& spec, std::int64_t n,
                           const RandomSource& master);

struct RolloutResult {
  Eigen::MatrixXd trajectory;  // (T+1) x n, row t = state at time t
  bool safe = true;            // false iff any state (x0 included) is unsafe
};

RolloutResult rollout(const SystemSpec& spec, const Eigen::VectorXd& x0,
                      int steps, const Region& unsafe, RandomSource& rng);

// CSV `t,x1..xn,safe` with one row per state; safe is 1 when the state is
// outside the unsafe region.
void save_trajectory_csv(const std::string& path,
                         const Eigen::MatrixXd& trajectory,
                         const Region& unsafe, const Domain& domain);

}  // namespace fcb
