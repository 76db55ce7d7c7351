// Command-line front end: dataset generation, certificate synthesis,
// independent checking, Monte-Carlo estimation, and surface export.
//
// Exit codes: 0 success, 1 infeasible problem or failed check,
// 2 usage or configuration error.
#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdio>
#include <optional>
#include <string>

#include "fcb/certify.hpp"
#include "fcb/common.hpp"
#include "fcb/config.hpp"
#include "fcb/kernels.hpp"
#include "fcb/rng.hpp"
#include "fcb/systems.hpp"

namespace {

using namespace fcb;

struct Options {
  std::string config_path;
  std::string data_path;
  std::string out_path;
  std::string cert_path;  // positional for check / export / mc
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::int64_t runs = 10000;
  double confidence = 0.9;
};

void apply_overrides(const Options& opt, RunConfig& cfg) {
  if (opt.seed.has_value()) cfg.seed = *opt.seed;
  if (opt.threads.has_value()) set_thread_count(*opt.threads);
}

int usage_error(const Error& e) {
  fmt::print(stderr, "error: {}\n", e.what());
  return 2;
}

int run_error(const Error& e) {
  fmt::print(stderr, "error: {}\n", e.what());
  return 1;
}

std::string domain_text(const Domain& domain) {
  std::string out;
  for (int d = 0; d < domain.n(); ++d) {
    out += fmt::format("{}[{:g}, {:g}]", d == 0 ? "" : " x ",
                       domain.lower(d), domain.upper(d));
  }
  return out;
}

SampleSet load_data(const RunConfig& cfg, const std::string& path) {
  SampleSet data = SampleSet::load_csv(path);
  const std::string warning = data.validate(cfg.problem.domain);
  if (!warning.empty()) fmt::print(stderr, "{}\n", warning);
  return data;
}

int cmd_gen(const Options& opt) {
  RunConfig cfg;
  try {
    cfg = load_config(opt.config_path);
    apply_overrides(opt, cfg);
  } catch (const Error& e) {
    return usage_error(e);
  }
  try {
    const RandomSource master(cfg.seed);
    const SampleSet data = generate_dataset(cfg.system, cfg.samples, master);
    const std::string out =
        opt.out_path.empty() ? std::string("data.csv") : opt.out_path;
    data.save_csv(out);
    fmt::print("wrote {} samples to {}\n", data.count(), out);
    fmt::print("seed   = {}\n", cfg.seed);
    fmt::print("domain = {}\n", domain_text(cfg.problem.domain));
    return 0;
  } catch (const Error& e) {
    return run_error(e);
  }
}

int cmd_certify(const Options& opt) {
  RunConfig cfg;
  SampleSet data;
  try {
    cfg = load_config(opt.config_path);
    apply_overrides(opt, cfg);
    require(!opt.data_path.empty(), "certify needs --data <samples.csv>");
    data = load_data(cfg, opt.data_path);
  } catch (const Error& e) {
    return usage_error(e);
  }
  try {
    const SynthesisInputs inputs = cfg.inputs(data);
    const Certificate cert = synthesize(inputs, cfg.settings);
    const std::string out =
        opt.out_path.empty() ? std::string("certificate.json") : opt.out_path;
    cert.save(out);

    fmt::print("eta     = {:.9f}\n", cert.eta);
    fmt::print("c       = {:.9e}\n", cert.c);
    fmt::print("p_N     = {:.9f}  (horizon T = {}){}\n", cert.p_n,
               cert.problem.horizon,
               cert.vacuous ? "  [vacuous: eta + c*T >= 1]" : "");
    if (cert.c == 0.0) {
      fmt::print("p_inf   = {:.9f}  (infinite horizon, 1 - eta; valid iff "
                 "c = 0 exactly, which holds here)\n",
                 1.0 - cert.eta);
    }
    fmt::print("|b|_2   = {:.6f}  (cap {:g})\n", cert.b_norm(),
               cert.problem.norm_cap);
    fmt::print("decrease margin = {:.3e}, surrogate fit residual = {:.3e}\n",
               cert.kushner_margin, cert.fit_residual);
    fmt::print("LP: objective = {:.9f}, iterations = {}\n", cert.lp_objective,
               cert.lp_iterations);
    for (const auto& [name, seconds] : cert.stage_seconds) {
      fmt::print("  {:<22} {:9.2f} s\n", name, seconds);
    }
    fmt::print("certificate written to {}\n", out);
    return 0;
  } catch (const Error& e) {
    return run_error(e);
  }
}

int cmd_check(const Options& opt) {
  AuditSettings audit;
  SampleSet data;
  Certificate cert;
  try {
    require(!opt.data_path.empty(), "check needs --data <samples.csv>");
    if (!opt.config_path.empty()) {
      RunConfig cfg = load_config(opt.config_path);
      if (opt.threads.has_value()) set_thread_count(*opt.threads);
      audit = cfg.audit;
    } else if (opt.threads.has_value()) {
      set_thread_count(*opt.threads);
    }
  } catch (const Error& e) {
    return usage_error(e);
  }
  try {
    cert = Certificate::load(opt.cert_path);
    data = SampleSet::load_csv(opt.data_path);
    const CMEModel model =
        CMEModel::fit(data, cert.kernel_in, cert.kernel_out, cert.lambda);
    const ValidationReport report = check_certificate(cert, model, audit);
    const std::string out =
        opt.out_path.empty() ? std::string("report.json") : opt.out_path;
    report.save(out);
    for (const FamilyCheck* f :
         {&report.init, &report.unsafe_region, &report.kushner,
          &report.positivity}) {
      fmt::print("{:<18} worst residual = {:+.3e}  (tolerance {:g})  {}\n",
                 f->name, f->worst, report.tolerance,
                 f->pass ? "pass" : "FAIL");
    }
    fmt::print("audit lattice: {} points per axis ({}x the LP lattice)\n",
               report.audit_q, report.audit_factor);
    fmt::print("certified p_N = {:.9f}\n", report.certified_p_n);
    fmt::print("report written to {}\n", out);
    if (!report.pass()) {
      fmt::print(stderr,
                 "check FAILED: raise m_per_axis or the fit density and "
                 "re-synthesize\n");
      return 1;
    }
    fmt::print("check passed\n");
    return 0;
  } catch (const Error& e) {
    return run_error(e);
  }
}

int cmd_mc(const Options& opt) {
  RunConfig cfg;
  try {
    cfg = load_config(opt.config_path);
    apply_overrides(opt, cfg);
    require(opt.runs >= 1, "--runs must be >= 1");
    require(opt.confidence > 0.0 && opt.confidence < 1.0,
            "--confidence must lie in (0, 1)");
    require(cfg.has_regions,
            "config error: [problem] x0 and xu are required for mc");
    require(cfg.start.has_value() || cfg.mc_grid_per_axis > 0,
            "config error: [run] start (or mc_grid_per_axis) is required "
            "for mc");
  } catch (const Error& e) {
    return usage_error(e);
  }
  try {
    const RandomSource master(cfg.seed);
    MonteCarloResult r;
    if (cfg.mc_grid_per_axis > 0) {
      r = monte_carlo_region(cfg.system, cfg.problem.x0, cfg.mc_grid_per_axis,
                             cfg.problem.horizon, cfg.problem.xu, opt.runs,
                             opt.confidence, master);
      fmt::print("worst grid start over the initial region "
                 "({} points per axis)\n",
                 cfg.mc_grid_per_axis);
    } else {
      r = monte_carlo(cfg.system, *cfg.start, cfg.problem.horizon,
                      cfg.problem.xu, opt.runs, opt.confidence, master);
    }
    fmt::print("estimate   = {:.6f}  ({} runs, horizon {})\n", r.estimate,
               r.runs, cfg.problem.horizon);
    fmt::print("interval   = [{:.6f}, {:.6f}]  (Chebyshev, confidence "
               "{:g})\n",
               r.lower, r.upper, r.confidence);
    if (r.degenerate) {
      fmt::print(stderr,
                 "warning: degenerate interval (too few runs or saturated "
                 "estimate); the bound carries no confidence weight\n");
    }
    if (!opt.cert_path.empty()) {
      const Certificate cert = Certificate::load(opt.cert_path);
      fmt::print("certificate p_N = {:.6f}  (estimate - p_N = {:+.6f})\n",
                 cert.p_n, r.estimate - cert.p_n);
      if (r.lower < cert.p_n) {
        fmt::print(stderr,
                   "warning: interval lower end {:.6f} sits below the "
                   "certified bound; more runs may separate them\n",
                   r.lower);
      }
    }
    return 0;
  } catch (const Error& e) {
    return run_error(e);
  }
}

int cmd_export(const Options& opt) {
  int grid = 100;
  std::vector<std::pair<int, double>> slice;
  try {
    if (!opt.config_path.empty()) {
      const RunConfig cfg = load_config(opt.config_path);
      grid = cfg.export_grid;
      slice = cfg.export_slice;
    }
  } catch (const Error& e) {
    return usage_error(e);
  }
  try {
    const Certificate cert = Certificate::load(opt.cert_path);
    const SpectralBasis basis = cert.rebuild_basis();
    const int n = cert.domain.n();
    require(n >= 2, "export needs a state dimension of at least 2");

    std::vector<bool> fixed(static_cast<std::size_t>(n), false);
    Eigen::VectorXd point = Eigen::VectorXd::Zero(n);
    for (const auto& [axis, value] : slice) {
      require(axis >= 0 && axis < n,
              "invalid slice: axis {} out of range for dimension {}", axis, n);
      require(!fixed[static_cast<std::size_t>(axis)],
              "invalid slice: axis {} fixed twice", axis);
      fixed[static_cast<std::size_t>(axis)] = true;
      point(axis) = value;
    }
    std::vector<int> free_axes;
    for (int d = 0; d < n; ++d) {
      if (!fixed[static_cast<std::size_t>(d)]) free_axes.push_back(d);
    }
    require(static_cast<int>(free_axes.size()) == 2,
            "invalid slice: fix exactly n - 2 = {} coordinates (got {})",
            n - 2, static_cast<int>(slice.size()));

    const int a0 = free_axes[0];
    const int a1 = free_axes[1];
    const auto coord = [&](int axis, int k) {
      return cert.domain.lower(axis) +
             (cert.domain.upper(axis) - cert.domain.lower(axis)) *
                 static_cast<double>(k) / static_cast<double>(grid - 1);
    };

    Eigen::MatrixXd values(grid, grid);
    for (int i = 0; i < grid; ++i) {
      for (int j = 0; j < grid; ++j) {
        Eigen::VectorXd x = point;
        x(a0) = coord(a0, i);
        x(a1) = coord(a1, j);
        values(i, j) = barrier_eval(cert.b, basis, x);
      }
    }
    // A cell crosses a level when the value minus the level changes sign
    // towards the +i or +j neighbor.
    const auto crosses = [&](int i, int j, double level) {
      const double here = values(i, j) - level;
      if (i + 1 < grid && here * (values(i + 1, j) - level) <= 0.0) return 1;
      if (j + 1 < grid && here * (values(i, j + 1) - level) <= 0.0) return 1;
      return 0;
    };

    const std::string out =
        opt.out_path.empty() ? std::string("surface.csv") : opt.out_path;
    std::FILE* f = std::fopen(out.c_str(), "w");
    require(f != nullptr, "cannot open '{}'", out);
    fmt::print(f, "x1,x2,B,cross_eta,cross_one\n");
    for (int i = 0; i < grid; ++i) {
      for (int j = 0; j < grid; ++j) {
        fmt::print(f, "{:.17g},{:.17g},{:.17g},{},{}\n", coord(a0, i),
                   coord(a1, j), values(i, j), crosses(i, j, cert.eta),
                   crosses(i, j, 1.0));
      }
    }
    std::fclose(f);
    fmt::print("wrote {} x {} barrier surface (axes {}, {}) to {}\n", grid,
               grid, a0, a1, out);
    return 0;
  } catch (const Error& e) {
    return run_error(e);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Data-driven safety certificates for stochastic systems: kernel "
      "distribution embeddings, trigonometric barriers, and a verified "
      "linear-program pipeline"};
  app.require_subcommand(1);
  Options opt;

  CLI::App* gen = app.add_subcommand("gen", "draw a sample set from a system");
  gen->add_option("--config", opt.config_path, "run configuration file")
      ->required();
  gen->add_option("--out", opt.out_path, "output CSV (default data.csv)");

  CLI::App* certify =
      app.add_subcommand("certify", "synthesize a safety certificate");
  certify->add_option("--config", opt.config_path, "run configuration file")
      ->required();
  certify->add_option("--data", opt.data_path, "sample-set CSV")->required();
  certify->add_option("--out", opt.out_path,
                      "output certificate (default certificate.json)");

  CLI::App* check = app.add_subcommand(
      "check", "re-verify a certificate on a denser lattice");
  check->add_option("certificate", opt.cert_path, "certificate JSON")
      ->required();
  check->add_option("--data", opt.data_path, "sample-set CSV")->required();
  check->add_option("--config", opt.config_path,
                    "run configuration (for audit settings)");
  check->add_option("--out", opt.out_path,
                    "output report (default report.json)");

  CLI::App* mc = app.add_subcommand(
      "mc", "Monte-Carlo estimate of the safety probability");
  mc->add_option("certificate", opt.cert_path,
                 "optional certificate JSON to compare against");
  mc->add_option("--config", opt.config_path, "run configuration file")
      ->required();
  mc->add_option("--runs", opt.runs, "rollout count (default 10000)");
  mc->add_option("--confidence", opt.confidence,
                 "Chebyshev confidence level (default 0.9)");

  CLI::App* exp = app.add_subcommand(
      "export", "write a barrier-surface CSV with level-set markers");
  exp->add_option("certificate", opt.cert_path, "certificate JSON")
      ->required();
  exp->add_option("--config", opt.config_path,
                  "run configuration (grid size and slice)");
  exp->add_option("--out", opt.out_path, "output CSV (default surface.csv)");

  for (CLI::App* sub : {gen, certify, check, mc, exp}) {
    sub->add_option("--seed", opt.seed, "override the configured seed");
    sub->add_option("--threads", opt.threads,
                    "worker threads (default: all cores)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (gen->parsed()) return cmd_gen(opt);
  if (certify->parsed()) return cmd_certify(opt);
  if (check->parsed()) return cmd_check(opt);
  if (mc->parsed()) return cmd_mc(opt);
  if (exp->parsed()) return cmd_export(opt);
  return 2;
}
