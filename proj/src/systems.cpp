#include "fcb/systems.hpp"

#include <fmt/format.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "fcb/common.hpp"

namespace fcb {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Mlp
// ---------------------------------------------------------------------------

std::int64_t Mlp::input_dim() const {
  require(!layers.empty(), "Mlp: no layers");
  return layers.front().weight.cols();
}

std::int64_t Mlp::output_dim() const {
  require(!layers.empty(), "Mlp: no layers");
  return layers.back().weight.rows();
}

void Mlp::validate() const {
  require(!layers.empty(), "Mlp: no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const MlpLayer& l = layers[i];
    require(l.weight.rows() >= 1 && l.weight.cols() >= 1,
            "Mlp: layer {} has an empty weight matrix", i);
    require(l.bias.size() == l.weight.rows(),
            "Mlp: layer {} bias length {} does not match {} outputs", i,
            l.bias.size(), l.weight.rows());
    require(l.weight.allFinite() && l.bias.allFinite(),
            "Mlp: layer {} contains non-finite parameters", i);
    require(l.activation == "relu" || l.activation == "tanh" ||
                l.activation == "identity",
            "Mlp: layer {} has unknown activation '{}' (want relu, tanh or "
            "identity)",
            i, l.activation);
    if (i + 1 < layers.size()) {
      require(layers[i + 1].weight.cols() == l.weight.rows(),
              "Mlp: layer {} emits {} values but layer {} expects {}", i,
              l.weight.rows(), i + 1, layers[i + 1].weight.cols());
    }
  }
  if (has_clamp) {
    require(std::isfinite(clamp_lo) && std::isfinite(clamp_hi) &&
                clamp_lo < clamp_hi,
            "Mlp: clamp range [{}, {}] must be finite and ordered", clamp_lo,
            clamp_hi);
  }
}

Mlp Mlp::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    fail(fmt::format("Mlp: invalid JSON: {}", e.what()));
  }
  require(j.is_object() && j.contains("layers") && j["layers"].is_array(),
          "Mlp: document must be an object with a 'layers' array");
  Mlp mlp;
  for (const json& jl : j["layers"]) {
    require(jl.is_object() && jl.contains("weight") && jl.contains("bias") &&
                jl.contains("activation"),
            "Mlp: each layer needs 'weight', 'bias' and 'activation'");
    const json& jw = jl["weight"];
    require(jw.is_array() && !jw.empty(), "Mlp: 'weight' must be a row list");
    MlpLayer layer;
    const std::int64_t rows = static_cast<std::int64_t>(jw.size());
    const std::int64_t cols = static_cast<std::int64_t>(jw.at(0).size());
    layer.weight.resize(rows, cols);
    for (std::int64_t r = 0; r < rows; ++r) {
      const json& jrow = jw.at(static_cast<std::size_t>(r));
      require(jrow.is_array() &&
                  static_cast<std::int64_t>(jrow.size()) == cols,
              "Mlp: ragged weight matrix (row {} has {} entries, want {})", r,
              jrow.size(), cols);
      for (std::int64_t c = 0; c < cols; ++c) {
        layer.weight(r, c) = jrow.at(static_cast<std::size_t>(c)).get<double>();
      }
    }
    const json& jb = jl["bias"];
    require(jb.is_array(), "Mlp: 'bias' must be an array");
    layer.bias.resize(static_cast<std::int64_t>(jb.size()));
    for (std::int64_t r = 0; r < layer.bias.size(); ++r) {
      layer.bias(r) = jb.at(static_cast<std::size_t>(r)).get<double>();
    }
    layer.activation = jl["activation"].get<std::string>();
    mlp.layers.push_back(std::move(layer));
  }
  if (j.contains("clamp")) {
    const json& jc = j["clamp"];
    require(jc.is_array() && jc.size() == 2,
            "Mlp: 'clamp' must be a [lo, hi] pair");
    mlp.has_clamp = true;
    mlp.clamp_lo = jc.at(0).get<double>();
    mlp.clamp_hi = jc.at(1).get<double>();
  }
  mlp.validate();
  return mlp;
}

Mlp Mlp::load_json(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "Mlp: cannot open '{}'", path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return from_json_text(text);
}

std::string Mlp::to_json_text() const {
  validate();
  json j;
  j["layers"] = json::array();
  for (const MlpLayer& l : layers) {
    json jw = json::array();
    for (std::int64_t r = 0; r < l.weight.rows(); ++r) {
      json jrow = json::array();
      for (std::int64_t c = 0; c < l.weight.cols(); ++c) {
        jrow.push_back(l.weight(r, c));
      }
      jw.push_back(std::move(jrow));
    }
    json jb = json::array();
    for (std::int64_t r = 0; r < l.bias.size(); ++r) jb.push_back(l.bias(r));
    j["layers"].push_back(
        {{"weight", std::move(jw)}, {"bias", std::move(jb)},
         {"activation", l.activation}});
  }
  if (has_clamp) j["clamp"] = {clamp_lo, clamp_hi};
  return j.dump(2);
}

Eigen::VectorXd nn_forward(const Mlp& mlp, const Eigen::VectorXd& x) {
  require(!mlp.layers.empty(), "nn_forward: empty network");
  require(x.size() == mlp.input_dim(),
          "nn_forward: input has {} entries, network expects {}", x.size(),
          mlp.input_dim());
  Eigen::VectorXd h = x;
  for (const MlpLayer& l : mlp.layers) {
    h = (l.weight * h + l.bias).eval();
    if (l.activation == "relu") {
      h = h.cwiseMax(0.0);
    } else if (l.activation == "tanh") {
      h = h.array().tanh().matrix();
    }  // identity: nothing
  }
  if (mlp.has_clamp) {
    h = h.cwiseMax(mlp.clamp_lo).cwiseMin(mlp.clamp_hi);
  }
  require(h.allFinite(), "nn_forward: non-finite network output");
  return h;
}

// ---------------------------------------------------------------------------
// SystemSpec
// ---------------------------------------------------------------------------

std::string to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::barr3: return "barr3";
    case SystemKind::dubins: return "dubins";
    case SystemKind::user_map: return "user-map";
  }
  return "unknown";
}

SystemKind system_kind_from(const std::string& word) {
  if (word == "barr3") return SystemKind::barr3;
  if (word == "dubins") return SystemKind::dubins;
  if (word == "user-map" || word == "user_map") return SystemKind::user_map;
  fail(fmt::format("unknown system kind '{}' (want barr3, dubins or user-map)",
                   word));
}

void SystemSpec::validate() const {
  require(tau > 0.0, "SystemSpec: step size must be positive, got {}", tau);
  const int n = domain.n();
  require(noise_std.size() == n,
          "SystemSpec: {} noise entries for a {}-dimensional domain",
          noise_std.size(), n);
  require((noise_std.array() >= 0.0).all(),
          "SystemSpec: noise standard deviations must be nonnegative");
  switch (kind) {
    case SystemKind::barr3:
      require(n == 2, "SystemSpec: barr3 is 2-dimensional, domain has {}", n);
      break;
    case SystemKind::dubins:
      require(n == 3, "SystemSpec: dubins is 3-dimensional, domain has {}", n);
      require(velocity > 0.0, "SystemSpec: dubins velocity must be positive");
      require(controller.has_value() || policy == "steer",
              "SystemSpec: dubins needs a controller network or the named "
              "'steer' policy");
      break;
    case SystemKind::user_map:
      require(!command.empty(), "SystemSpec: user-map needs a command");
      break;
  }
  if (!policy.empty()) {
    require(policy == "steer",
            "SystemSpec: unknown named policy '{}' (only 'steer' exists)",
            policy);
  }
  if (controller.has_value()) {
    controller->validate();
    require(controller->input_dim() == n,
            "SystemSpec: controller expects {} inputs, state has {}",
            controller->input_dim(), n);
  }
}

SystemSpec SystemSpec::barr3_default() {
  SystemSpec spec;
  spec.kind = SystemKind::barr3;
  spec.tau = 0.1;
  spec.noise_std = Eigen::VectorXd::Constant(2, 0.1);
  spec.domain = Domain::make(Eigen::Vector2d(-2.0, -2.0),
                             Eigen::Vector2d(2.0, 2.0));
  return spec;
}

SystemSpec SystemSpec::dubins_default() {
  SystemSpec spec;
  spec.kind = SystemKind::dubins;
  spec.tau = 0.5;
  spec.velocity = 1.0;
  spec.noise_std = Eigen::Vector3d(0.01, 0.01, 0.001);
  spec.domain = Domain::make(Eigen::Vector3d(0.0, -1.0, -1.0),
                             Eigen::Vector3d(5.0, 1.0, 1.0));
  spec.policy = "steer";
  return spec;
}

namespace {

double steer_policy(const Eigen::VectorXd& x) {
  const double lon = x(0);
  const double lat = x(1);
  const double heading = x(2);
  const double diff = lon - 2.5;
  const double target = 0.55 * std::exp(-diff * diff / 2.0);
  const double slope = -diff * target;  // d(target)/d(lon)
  const double correction =
      std::clamp(1.2 * (target - lat), -0.9, 0.9);
  const double desired = std::atan(slope) + correction;
  return std::clamp(3.2 * (desired - heading), -M_PI, M_PI);
}

// Batch drift for user_map: states go out as the dataset CSV column layout
// (x1..xn), successors come back in the same shape.
Eigen::MatrixXd user_map_drift(const SystemSpec& spec,
                               const Eigen::MatrixXd& states) {
  char tmpl[] = "/tmp/fcb-map-XXXXXX";
  const char* dir = mkdtemp(tmpl);
  require(dir != nullptr, "user-map: cannot create temp directory");
  const std::string in_path = fmt::format("{}/in.csv", dir);
  const std::string out_path = fmt::format("{}/out.csv", dir);
  const int n = static_cast<int>(states.cols());
  {
    std::ofstream out(in_path);
    require(out.good(), "user-map: cannot open {}", in_path);
    for (int d = 0; d < n; ++d) out << (d ? "," : "") << "x" << (d + 1);
    out << "\n";
    for (std::int64_t i = 0; i < states.rows(); ++i) {
      for (int d = 0; d < n; ++d) {
        out << (d ? "," : "") << fmt::format("{:.17g}", states(i, d));
      }
      out << "\n";
    }
  }
  const std::string cmd = fmt::format("{} {} {}", spec.command, in_path,
                                      out_path);
  const int rc = std::system(cmd.c_str());
  require(rc == 0, "user-map: '{}' exited with status {}", cmd, rc);

  std::ifstream in(out_path);
  require(in.good(), "user-map: command produced no output file {}", out_path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)),
          "user-map: empty output file");
  Eigen::MatrixXd next(states.rows(), n);
  for (std::int64_t i = 0; i < states.rows(); ++i) {
    require(static_cast<bool>(std::getline(in, line)),
            "user-map: output has {} rows, expected {}", i, states.rows());
    std::stringstream ss(line);
    std::string cell;
    for (int d = 0; d < n; ++d) {
      require(static_cast<bool>(std::getline(ss, cell, ',')),
              "user-map: row {} has fewer than {} columns", i + 1, n);
      next(i, d) = std::strtod(cell.c_str(), nullptr);
    }
  }
  std::remove(in_path.c_str());
  std::remove(out_path.c_str());
  rmdir(tmpl);
  require(next.allFinite(), "user-map: non-finite successor values");
  return next;
}

}  // namespace

double control_input(const SystemSpec& spec, const Eigen::VectorXd& x) {
  if (spec.controller.has_value()) {
    const Eigen::VectorXd u = nn_forward(*spec.controller, x);
    require(u.size() == 1, "control_input: controller emits {} values, one "
            "steering command expected", u.size());
    return u(0);
  }
  require(spec.policy == "steer",
          "control_input: no controller attached and no named policy set");
  return steer_policy(x);
}

Eigen::VectorXd drift(const SystemSpec& spec, const Eigen::VectorXd& x) {
  require(x.size() == spec.domain.n(),
          "drift: state has {} entries, domain is {}-dimensional", x.size(),
          spec.domain.n());
  switch (spec.kind) {
    case SystemKind::barr3: {
      Eigen::VectorXd next(2);
      next(0) = x(0) + spec.tau * x(1);
      next(1) =
          x(1) + spec.tau * (x(0) * x(0) * x(0) / 3.0 - x(0) - x(1));
      return next;
    }
    case SystemKind::dubins: {
      const double u = control_input(spec, x);
      Eigen::VectorXd next(3);
      next(0) = x(0) + spec.tau * spec.velocity * std::cos(x(2));
      next(1) = x(1) + spec.tau * spec.velocity * std::sin(x(2));
      next(2) = x(2) + spec.tau * u;
      return next;
    }
    case SystemKind::user_map: {
      Eigen::MatrixXd batch(1, x.size());
      batch.row(0) = x.transpose();
      return user_map_drift(spec, batch).row(0).transpose();
    }
  }
  fail("drift: unreachable system kind");
}

Eigen::VectorXd step(const SystemSpec& spec, const Eigen::VectorXd& x,
                     RandomSource& rng) {
  Eigen::VectorXd next = drift(spec, x);
  for (int d = 0; d < spec.domain.n(); ++d) {
    next(d) += spec.noise_std(d) * rng.normal();
  }
  return next;
}

SampleSet generate_dataset(const SystemSpec& spec, std::int64_t n,
                           const RandomSource& master) {
  spec.validate();
  require(n >= 1, "generate_dataset: need at least one sample, got {}", n);
  const int dim = spec.domain.n();
  SampleSet set;
  set.states.resize(n, dim);
  set.successors.resize(n, dim);

  if (spec.kind == SystemKind::user_map) {
    // States and noise from per-sample streams; drifts in one batch call.
    std::vector<RandomSource> streams;
    streams.reserve(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
      streams.push_back(master.split(fmt::format("sample/{}", i)));
      for (int d = 0; d < dim; ++d) {
        set.states(i, d) =
            streams.back().uniform(spec.domain.lower(d), spec.domain.upper(d));
      }
    }
    set.successors = user_map_drift(spec, set.states);
    for (std::int64_t i = 0; i < n; ++i) {
      for (int d = 0; d < dim; ++d) {
        set.successors(i, d) += spec.noise_std(d) * streams[i].normal();
      }
    }
    return set;
  }

  parallel_for(n, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i) {
      RandomSource stream = master.split(fmt::format("sample/{}", i));
      Eigen::VectorXd x(dim);
      for (int d = 0; d < dim; ++d) {
        x(d) = stream.uniform(spec.domain.lower(d), spec.domain.upper(d));
      }
      set.states.row(i) = x.transpose();
      set.successors.row(i) = step(spec, x, stream).transpose();
    }
  });
  return set;
}

RolloutResult rollout(const SystemSpec& spec, const Eigen::VectorXd& x0,
                      int steps, const Region& unsafe, RandomSource& rng) {
  spec.validate();
  require(steps >= 1, "rollout: need at least one step, got {}", steps);
  const int dim = spec.domain.n();
  require(x0.size() == dim, "rollout: initial state has {} entries, want {}",
          x0.size(), dim);
  RolloutResult res;
  res.trajectory.resize(steps + 1, dim);
  res.trajectory.row(0) = x0.transpose();
  res.safe = !unsafe.contains(x0, spec.domain);
  Eigen::VectorXd x = x0;
  for (int t = 1; t <= steps; ++t) {
    x = step(spec, x, rng);
    res.trajectory.row(t) = x.transpose();
    if (unsafe.contains(x, spec.domain)) res.safe = false;
  }
  return res;
}

void save_trajectory_csv(const std::string& path,
                         const Eigen::MatrixXd& trajectory,
                         const Region& unsafe, const Domain& domain) {
  std::ofstream out(path);
  require(out.good(), "save_trajectory_csv: cannot open '{}'", path);
  const int n = static_cast<int>(trajectory.cols());
  out << "t";
  for (int d = 0; d < n; ++d) out << ",x" << (d + 1);
  out << ",safe\n";
  for (std::int64_t t = 0; t < trajectory.rows(); ++t) {
    out << t;
    for (int d = 0; d < n; ++d) {
      out << "," << fmt::format("{:.17g}", trajectory(t, d));
    }
    const bool ok = !unsafe.contains(trajectory.row(t).transpose(), domain);
    out << "," << (ok ? 1 : 0) << "\n";
  }
}

}  // namespace fcb
