#include "fcb/certify.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>

#include "fcb/common.hpp"
#include "fcb/solver.hpp"

namespace fcb {

using nlohmann::json;

namespace {

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (std::int64_t i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Eigen::VectorXd vector_from_json(const json& arr, const char* what) {
  require(arr.is_array(), "certificate json: '{}' must be an array", what);
  Eigen::VectorXd v(static_cast<std::int64_t>(arr.size()));
  for (std::int64_t i = 0; i < v.size(); ++i) {
    v(i) = arr.at(static_cast<std::size_t>(i)).get<double>();
  }
  return v;
}

json kernel_to_json(const KernelParams& k) {
  return {{"amplitude", k.amplitude},
          {"lengthscales", vector_to_json(k.lengthscales)}};
}

KernelParams kernel_from_json(const json& j, const char* what) {
  require(j.is_object() && j.contains("amplitude") &&
              j.contains("lengthscales"),
          "certificate json: '{}' needs amplitude and lengthscales", what);
  KernelParams k;
  k.amplitude = j["amplitude"].get<double>();
  k.lengthscales = vector_from_json(j["lengthscales"], what);
  return k;
}

class StageClock {
 public:
  void lap(std::vector<std::pair<std::string, double>>& out,
           const std::string& name) {
    const auto now = std::chrono::steady_clock::now();
    const double sec = std::chrono::duration<double>(now - last_).count();
    out.emplace_back(name, sec);
    last_ = now;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

bool kernels_match(const KernelParams& a, const KernelParams& b) {
  if (a.lengthscales.size() != b.lengthscales.size()) return false;
  const auto close = [](double x, double y) {
    return std::abs(x - y) <= 1e-12 * (1.0 + std::max(std::abs(x), std::abs(y)));
  };
  if (!close(a.amplitude, b.amplitude)) return false;
  for (std::int64_t i = 0; i < a.lengthscales.size(); ++i) {
    if (!close(a.lengthscales(i), b.lengthscales(i))) return false;
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Safety bound
// ---------------------------------------------------------------------------

SafetyBound safety_probability(double eta, double c, int horizon) {
  require(c >= 0.0, "safety_probability: c must be nonnegative, got {}", c);
  require(eta >= 0.0 && eta < 1.0,
          "safety_probability: eta must lie in [0, 1), got {}", eta);
  require(horizon >= 1, "safety_probability: horizon must be >= 1, got {}",
          horizon);
  const double raw = 1.0 - (eta + c * static_cast<double>(horizon));
  SafetyBound out;
  out.probability = std::max(0.0, raw);
  out.vacuous = raw <= 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Certificate
// ---------------------------------------------------------------------------

SpectralBasis Certificate::rebuild_basis() const {
  return build_basis(m_per_axis, kernel_out, domain);
}

void Certificate::validate() const {
  require(m_per_axis >= 1 && oversample >= 1 && hfit_oversample >= 1,
          "Certificate: basis/lattice settings must be positive");
  const int n = domain.n();
  kernel_in.validate(n);
  kernel_out.validate(n);
  require(lambda > 0.0, "Certificate: lambda must be positive");
  problem.validate();
  std::int64_t count = 1;
  for (int d = 0; d < n; ++d) count *= m_per_axis;
  const std::int64_t dim = 2 * (count - 1) + 1;
  require(b.size() == dim,
          "Certificate: coefficient vector has {} entries, basis wants {}",
          b.size(), dim);
  require(b.allFinite(), "Certificate: non-finite coefficients");
  require(c >= 0.0, "Certificate: c must be nonnegative, got {}", c);
  require(eta >= 0.0 && eta < 1.0, "Certificate: eta must lie in [0, 1)");
  require(b.norm() <= problem.norm_cap * (1.0 + 1e-9) + 1e-12,
          "Certificate: |b| = {} exceeds the recorded norm cap {}", b.norm(),
          problem.norm_cap);
  const SafetyBound sb = safety_probability(eta, c, problem.horizon);
  require(std::abs(p_n - sb.probability) <= 1e-12,
          "Certificate: stored probability {} does not match "
          "max(0, 1 - (eta + c*T)) = {}",
          p_n, sb.probability);
  require(vacuous == sb.vacuous, "Certificate: vacuous flag inconsistent");
  tight.validate();
  require(tight.f_max == m_per_axis - 1 && tight.n == n,
          "Certificate: tightening coefficients disagree with the basis");
  require(kushner_margin >= 0.0 && fit_residual >= 0.0,
          "Certificate: diagnostics must be nonnegative");
}

std::string Certificate::to_json_text() const {
  validate();
  json j;
  j["schema"] = "fcb-certificate";
  j["version"] = 1;
  j["m_per_axis"] = m_per_axis;
  j["oversample"] = oversample;
  j["hfit_oversample"] = hfit_oversample;
  j["domain"] = {{"lower", vector_to_json(domain.lower)},
                 {"upper", vector_to_json(domain.upper)}};
  j["kernel_in"] = kernel_to_json(kernel_in);
  j["kernel_out"] = kernel_to_json(kernel_out);
  j["lambda"] = lambda;
  j["problem"] = {{"x0", json::parse(problem.x0.to_json())},
                  {"xu", json::parse(problem.xu.to_json())},
                  {"horizon", problem.horizon},
                  {"epsilon", problem.epsilon},
                  {"norm_cap", problem.norm_cap},
                  {"kappa", problem.kappa},
                  {"inflation", problem.inflation},
                  {"split_buffer_spacings", problem.split_buffer_spacings}};
  j["b"] = vector_to_json(b);
  j["eta"] = eta;
  j["c"] = c;
  j["p_n"] = p_n;
  j["vacuous"] = vacuous;
  j["kushner_margin"] = kushner_margin;
  json amap = json::object();
  for (const auto& [name, value] : tight.A_map) amap[name] = value;
  j["tight"] = {{"C", tight.C}, {"A", std::move(amap)},
                {"f_max", tight.f_max}, {"Q", tight.Q}, {"n", tight.n}};
  j["provenance"] = {{"dataset_hash", dataset_hash},
                     {"seed", seed},
                     {"config_hash", config_hash},
                     {"fit_residual", fit_residual},
                     {"lp_objective", lp_objective},
                     {"lp_iterations", lp_iterations}};
  return j.dump(2);
}

Certificate Certificate::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    fail(fmt::format("certificate json: parse error: {}", e.what()));
  }
  require(j.is_object() && j.value("schema", std::string()) ==
              "fcb-certificate" && j.value("version", -1) == 1,
          "certificate json: schema-version mismatch (want fcb-certificate "
          "version 1)");
  Certificate cert;
  cert.m_per_axis = j.at("m_per_axis").get<int>();
  cert.oversample = j.at("oversample").get<int>();
  cert.hfit_oversample = j.at("hfit_oversample").get<int>();
  cert.domain = Domain::make(vector_from_json(j.at("domain").at("lower"), "domain"),
                             vector_from_json(j.at("domain").at("upper"), "domain"));
  cert.kernel_in = kernel_from_json(j.at("kernel_in"), "kernel_in");
  cert.kernel_out = kernel_from_json(j.at("kernel_out"), "kernel_out");
  cert.lambda = j.at("lambda").get<double>();
  const json& jp = j.at("problem");
  cert.problem.domain = cert.domain;
  cert.problem.x0 = Region::from_json(jp.at("x0").dump());
  cert.problem.xu = Region::from_json(jp.at("xu").dump());
  cert.problem.horizon = jp.at("horizon").get<int>();
  cert.problem.epsilon = jp.at("epsilon").get<double>();
  cert.problem.norm_cap = jp.at("norm_cap").get<double>();
  cert.problem.kappa = jp.at("kappa").get<double>();
  cert.problem.inflation = jp.at("inflation").get<double>();
  cert.problem.split_buffer_spacings =
      jp.at("split_buffer_spacings").get<double>();
  cert.b = vector_from_json(j.at("b"), "b");
  cert.eta = j.at("eta").get<double>();
  cert.c = j.at("c").get<double>();
  cert.p_n = j.at("p_n").get<double>();
  cert.vacuous = j.at("vacuous").get<bool>();
  cert.kushner_margin = j.at("kushner_margin").get<double>();
  const json& jt = j.at("tight");
  cert.tight.C = jt.at("C").get<double>();
  for (const auto& [name, value] : jt.at("A").items()) {
    cert.tight.A_map[name] = value.get<double>();
  }
  cert.tight.f_max = jt.at("f_max").get<int>();
  cert.tight.Q = jt.at("Q").get<int>();
  cert.tight.n = jt.at("n").get<int>();
  const json& jv = j.at("provenance");
  cert.dataset_hash = jv.at("dataset_hash").get<std::string>();
  cert.seed = jv.at("seed").get<std::uint64_t>();
  cert.config_hash = jv.at("config_hash").get<std::string>();
  cert.fit_residual = jv.at("fit_residual").get<double>();
  cert.lp_objective = jv.at("lp_objective").get<double>();
  cert.lp_iterations = jv.at("lp_iterations").get<std::int64_t>();
  cert.validate();
  return cert;
}

void Certificate::save(const std::string& path) const {
  std::ofstream out(path);
  require(out.good(), "Certificate::save: cannot open '{}'", path);
  out << to_json_text() << "\n";
}

Certificate Certificate::load(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "Certificate::load: cannot open '{}'", path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return from_json_text(text);
}

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

void SynthesisSettings::validate() const {
  require(m_per_axis >= 1, "SynthesisSettings: m_per_axis must be >= 1");
  require(oversample >= 1 && hfit_oversample >= 1,
          "SynthesisSettings: oversample factors must be >= 1");
  require(memory_budget_mb >= 1, "SynthesisSettings: memory budget too small");
  require(lp_tolerance > 0.0, "SynthesisSettings: tolerance must be positive");
  require(iteration_cap >= 1, "SynthesisSettings: iteration cap must be >= 1");
  require(bound_refine >= 1, "SynthesisSettings: bound_refine must be >= 1");
  require(margin_iters >= 0 && margin_headroom >= 1.0,
          "SynthesisSettings: margin iteration settings out of range");
  require(norm_retries >= 0, "SynthesisSettings: norm_retries must be >= 0");
  if (fixed_margin.has_value()) {
    require(*fixed_margin >= 0.0,
            "SynthesisSettings: fixed margin must be nonnegative");
  }
}

namespace {

// Worst one-sided gap between the exact empirical expectation of the
// barrier and its truncated surrogate, over the fit-lattice points inside
// the decrease-condition region. Positive values mean the surrogate
// underestimates the expectation there.
double margin_gap(const TransferMatrix& transfer, const SpectralBasis& basis,
                  const ProblemSpec& problem, const Eigen::VectorXd& b) {
  const Eigen::VectorXd hb = transfer.H * b;
  const Eigen::VectorXd approx =
      barrier_on_lattice(hb, basis, transfer.fit_lattice);
  const Eigen::VectorXd exact = transfer.field_samples * b;
  const Partition part = filter_lattice(
      transfer.fit_lattice, family_region(problem, Family::x), problem.domain);
  double worst = 0.0;
  for (const std::int64_t idx : part.inside) {
    worst = std::max(worst, exact(idx) - approx(idx));
  }
  return worst;
}

struct SolveOutcome {
  Eigen::VectorXd b;
  double c = 0.0;
  double eta = 0.0;
  double margin = 0.0;
  double objective = 0.0;
  std::int64_t iterations = 0;
};

LPSolution run_lp(const LPModel& lp, const SynthesisSettings& settings) {
  if (settings.backend.empty()) {
    return solve(lp, settings.lp_tolerance, settings.iteration_cap);
  }
  return solve_via_backend(lp, settings.backend, settings.lp_tolerance);
}

std::string family_hint(const std::string& note) {
  if (note.find("init") != std::string::npos) return "initial-set";
  if (note.find("unsafe") != std::string::npos) return "unsafe-set";
  if (note.find("kush") != std::string::npos) return "expected-decrease";
  if (note.find("pos") != std::string::npos) return "positivity";
  return "unnamed";
}

SolveOutcome solve_with_margin(const ProblemSpec& problem,
                               const SpectralBasis& basis,
                               const TransferMatrix& transfer,
                               const Lattice& lattice,
                               const FamilySplits& splits,
                               const TighteningCoefficients& tight,
                               const SynthesisSettings& settings) {
  SolveOutcome out;
  out.margin = settings.fixed_margin.value_or(0.0);
  const std::int64_t dimb = basis.dim();
  for (int it = 0;; ++it) {
    const LPModel lp = assemble(problem, basis, transfer, lattice, splits,
                                tight, out.margin);
    const LPSolution sol = run_lp(lp, settings);
    if (sol.status == SolveStatus::infeasible) {
      fail(fmt::format(
          "synthesize: the linear program is infeasible (binding family: {}; "
          "{}). Remedies: raise the oversample factor or m_per_axis, provide "
          "more data, or reduce epsilon.",
          family_hint(sol.note), sol.note));
    }
    if (sol.status == SolveStatus::iteration_limit) {
      fail(fmt::format(
          "synthesize: LP iteration cap reached after {} iterations; raise "
          "the solver iteration cap",
          sol.iterations));
    }
    require(sol.status == SolveStatus::optimal,
            "synthesize: LP reported {} — {}", to_string(sol.status),
            sol.note);
    out.b = sol.values.head(dimb);
    out.c = std::max(0.0, sol.values(dimb));
    out.eta = std::clamp(sol.values(dimb + 1), 0.0, 1.0 - 1e-9);
    out.objective = sol.objective;
    out.iterations = sol.iterations;
    if (settings.fixed_margin.has_value()) return out;
    const double gap = margin_gap(transfer, basis, problem, out.b);
    if (gap <= out.margin + 1e-12 || it >= settings.margin_iters) return out;
    out.margin = settings.margin_headroom * gap;
  }
}

}  // namespace

Certificate synthesize(const SynthesisInputs& inputs,
                       const SynthesisSettings& settings) {
  settings.validate();
  ProblemSpec problem = inputs.problem;
  const int n = problem.domain.n();
  inputs.kernel_in.validate(n);
  inputs.kernel_out.validate(n);
  require(inputs.lambda > 0.0, "synthesize: lambda must be positive");
  require(inputs.data.count() >= 1, "synthesize: empty data set");
  require(inputs.data.dim() == n,
          "synthesize: data is {}-dimensional, domain is {}-dimensional",
          inputs.data.dim(), n);
  // kappa is the RKHS norm of any input-kernel section, sqrt(k(x, x)).
  problem.kappa = inputs.kernel_in.sigma();
  problem.validate();

  std::vector<std::pair<std::string, double>> stages;
  StageClock clock;

  const CMEModel model = CMEModel::fit(inputs.data, inputs.kernel_in,
                                       inputs.kernel_out, inputs.lambda);
  clock.lap(stages, "embedding-fit");

  const SpectralBasis basis =
      build_basis(settings.m_per_axis, inputs.kernel_out, problem.domain);
  const Lattice fit_lattice = build_lattice(basis, settings.hfit_oversample,
                                            settings.memory_budget_mb);
  const TransferMatrix transfer = project_cme(model, basis, fit_lattice);
  clock.lap(stages, "surrogate-projection");

  const Lattice lattice =
      build_lattice(basis, settings.oversample, settings.memory_budget_mb);
  const FamilySplits splits = split_families(problem, lattice);
  TighteningCoefficients tight;
  tight.C = c_coefficient(basis.f_max, lattice.Q, n);
  tight.f_max = basis.f_max;
  tight.Q = lattice.Q;
  tight.n = n;
  const std::array<std::pair<Family, const char*>, 3> families = {
      {{Family::x0, "x0"}, {Family::xu, "xu"}, {Family::x, "x"}}};
  for (const auto& [fam, name] : families) {
    SearchConfig search;
    search.region = family_region(problem, fam);
    search.refine = settings.bound_refine;
    const Partition& part = (fam == Family::x0)   ? splits.x0
                            : (fam == Family::xu) ? splits.xu
                                                  : splits.x;
    tight.A_map[name] =
        a_coefficient(lattice, part.outside, basis.f_max, lattice.Q, search);
  }
  tight.validate();
  clock.lap(stages, "bound-coefficients");

  SolveOutcome out;
  for (int attempt = 0;; ++attempt) {
    out = solve_with_margin(problem, basis, transfer, lattice, splits, tight,
                            settings);
    const double bnorm = out.b.norm();
    if (bnorm <= problem.norm_cap * (1.0 + 1e-12)) break;
    if (problem.epsilon == 0.0) {
      // The cap does not enter the LP at epsilon = 0 (the ambiguity offset
      // vanishes), so re-solving after doubling would reproduce the same
      // coefficients; apply the doubling schedule to the recorded cap
      // directly.
      double cap = problem.norm_cap;
      int doublings = 0;
      while (cap * (1.0 + 1e-12) < bnorm && doublings < settings.norm_retries) {
        cap *= 2.0;
        ++doublings;
      }
      require(bnorm <= cap * (1.0 + 1e-12),
              "synthesize: norm check exhausted after {} retries: |b| = {} "
              "still exceeds the cap {}; raise norm_cap",
              settings.norm_retries, bnorm, cap);
      problem.norm_cap = cap;
      break;
    }
    require(attempt < settings.norm_retries,
            "synthesize: norm check exhausted after {} retries: |b| = {} "
            "exceeds the cap {} that priced the ambiguity offset; raise "
            "norm_cap or reduce epsilon",
            settings.norm_retries, out.b.norm(), problem.norm_cap);
    problem.norm_cap *= 2.0;
  }
  clock.lap(stages, "lp-solve");

  Certificate cert;
  cert.domain = problem.domain;
  cert.kernel_in = inputs.kernel_in;
  cert.kernel_out = inputs.kernel_out;
  cert.lambda = inputs.lambda;
  cert.m_per_axis = settings.m_per_axis;
  cert.oversample = settings.oversample;
  cert.hfit_oversample = settings.hfit_oversample;
  cert.problem = problem;
  cert.b = out.b;
  cert.eta = out.eta;
  cert.c = out.c;
  const SafetyBound sb = safety_probability(out.eta, out.c, problem.horizon);
  cert.p_n = sb.probability;
  cert.vacuous = sb.vacuous;
  cert.kushner_margin = out.margin;
  cert.tight = tight;
  cert.dataset_hash = sha256_hex(inputs.data.csv_bytes());
  cert.seed = inputs.seed;
  cert.config_hash = inputs.config_hash;
  cert.fit_residual = transfer.residual;
  cert.lp_objective = out.objective;
  cert.lp_iterations = out.iterations;
  cert.stage_seconds = std::move(stages);
  cert.validate();
  return cert;
}

std::vector<Certificate> synthesize_sweep(const SynthesisInputs& inputs,
                                          const SynthesisSettings& settings,
                                          const std::vector<double>& epsilons) {
  require(!epsilons.empty(), "synthesize_sweep: no ambiguity radii given");
  for (const double eps : epsilons) {
    require(eps >= 0.0, "synthesize_sweep: radii must be nonnegative");
  }
  // Measure the decrease margin once, at radius zero.
  SynthesisInputs base = inputs;
  base.problem.epsilon = 0.0;
  const Certificate anchor = synthesize(base, settings);

  SynthesisSettings fixed = settings;
  fixed.fixed_margin = anchor.kushner_margin;
  fixed.norm_retries = 0;  // the cap must stay identical across the sweep
  std::vector<Certificate> out;
  out.reserve(epsilons.size());
  for (const double eps : epsilons) {
    SynthesisInputs point = inputs;
    point.problem.epsilon = eps;
    point.problem.norm_cap = anchor.problem.norm_cap;
    out.push_back(synthesize(point, fixed));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checking
// ---------------------------------------------------------------------------

bool ValidationReport::pass() const {
  return init.pass && unsafe_region.pass && kushner.pass && positivity.pass;
}

std::string ValidationReport::to_json_text() const {
  const auto family = [](const FamilyCheck& f) {
    return json{{"name", f.name},
                {"worst_residual", f.worst},
                {"threshold", f.threshold},
                {"points", f.points},
                {"pass", f.pass}};
  };
  json j;
  j["schema"] = "fcb-report";
  j["version"] = 1;
  j["families"] = {family(init), family(unsafe_region), family(kushner),
                   family(positivity)};
  j["audit"] = {{"factor", audit_factor},
                {"tolerance", tolerance},
                {"lattice_per_axis", audit_q}};
  j["certified_p_n"] = certified_p_n;
  j["pass"] = pass();
  if (has_mc) {
    j["monte_carlo"] = {{"estimate", mc.estimate},
                        {"halfwidth", mc.halfwidth},
                        {"lower", mc.lower},
                        {"upper", mc.upper},
                        {"runs", mc.runs},
                        {"confidence", mc.confidence},
                        {"degenerate", mc.degenerate}};
  }
  return j.dump(2);
}

void ValidationReport::save(const std::string& path) const {
  std::ofstream out(path);
  require(out.good(), "ValidationReport::save: cannot open '{}'", path);
  out << to_json_text() << "\n";
}

ValidationReport check_certificate(const Certificate& cert,
                                   const CMEModel& model,
                                   const AuditSettings& audit) {
  cert.validate();
  require(audit.factor >= 1, "check_certificate: audit factor must be >= 1");
  require(audit.tolerance > 0.0,
          "check_certificate: audit tolerance must be positive");
  require(kernels_match(cert.kernel_in, model.kernel_in) &&
              kernels_match(cert.kernel_out, model.kernel_out),
          "check_certificate: kernel parameters differ between certificate "
          "and model — refit the model with the certificate's kernels");
  require(std::abs(cert.lambda - model.lambda) <=
              1e-12 * (1.0 + cert.lambda),
          "check_certificate: regularization differs between certificate and "
          "model");
  require(model.data.dim() == cert.domain.n(),
          "check_certificate: model data dimension {} does not match the "
          "certificate domain dimension {}",
          model.data.dim(), cert.domain.n());
  require(sha256_hex(model.data.csv_bytes()) == cert.dataset_hash,
          "check_certificate: data set hash mismatch — the certificate was "
          "synthesized from different data");

  const SpectralBasis basis = cert.rebuild_basis();
  const Lattice lattice = build_lattice(basis, cert.oversample * audit.factor,
                                        audit.memory_budget_mb);
  const Eigen::VectorXd bvals = barrier_on_lattice(cert.b, basis, lattice);

  const Region xbox = Region::box(cert.domain.lower, cert.domain.upper);
  const Partition p0 = filter_lattice(lattice, cert.problem.x0, cert.domain);
  const Partition pu = filter_lattice(lattice, cert.problem.xu, cert.domain);
  const Partition px = filter_lattice(lattice, xbox, cert.domain);

  ValidationReport report;
  report.audit_factor = audit.factor;
  report.tolerance = audit.tolerance;
  report.audit_q = lattice.Q;
  report.certified_p_n = cert.p_n;

  const auto extremum = [&](const std::vector<std::int64_t>& idx, bool maximum) {
    double value = maximum ? -std::numeric_limits<double>::infinity()
                           : std::numeric_limits<double>::infinity();
    for (const std::int64_t i : idx) {
      value = maximum ? std::max(value, bvals(i)) : std::min(value, bvals(i));
    }
    return value;
  };

  report.init.name = "initial-set";
  report.init.points = static_cast<std::int64_t>(p0.inside.size());
  report.init.threshold = cert.eta;
  report.init.worst =
      p0.inside.empty() ? 0.0 : extremum(p0.inside, true) - cert.eta;
  report.init.pass = report.init.worst <= audit.tolerance;

  report.unsafe_region.name = "unsafe-set";
  report.unsafe_region.points = static_cast<std::int64_t>(pu.inside.size());
  report.unsafe_region.threshold = 1.0;
  report.unsafe_region.worst =
      pu.inside.empty() ? 0.0 : 1.0 - extremum(pu.inside, false);
  report.unsafe_region.pass = report.unsafe_region.worst <= audit.tolerance;

  report.positivity.name = "positivity";
  report.positivity.points = static_cast<std::int64_t>(px.inside.size());
  report.positivity.threshold = 0.0;
  report.positivity.worst =
      px.inside.empty() ? 0.0 : -extremum(px.inside, false);
  report.positivity.pass = report.positivity.worst <= audit.tolerance;

  // Expected decrease against the exact empirical embedding: with
  // u = (K + N lambda I)^{-1} B(successors), the embedded expectation at x
  // is k(x)^T u, so the surrogate H never enters this audit.
  const std::int64_t count = model.data.count();
  Eigen::VectorXd b_succ(count);
  parallel_for(count, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i) {
      b_succ(i) = feature_map(model.data.successors.row(i).transpose(), basis)
                      .dot(cert.b);
    }
  });
  const Eigen::VectorXd u = model.solve(b_succ);
  const double offset =
      cert.problem.epsilon * cert.problem.norm_cap * cert.problem.kappa;
  const double target = cert.c - offset;

  const std::int64_t nx = static_cast<std::int64_t>(px.inside.size());
  const int chunks = std::max(1, thread_count());
  std::vector<double> chunk_worst(static_cast<std::size_t>(chunks),
                                  -std::numeric_limits<double>::infinity());
  std::atomic<int> chunk_counter{0};
  parallel_for(nx, [&](std::int64_t begin, std::int64_t end) {
    const int slot = chunk_counter.fetch_add(1);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::int64_t k = begin; k < end; ++k) {
      const std::int64_t idx = px.inside[static_cast<std::size_t>(k)];
      const Eigen::VectorXd x = lattice.point(idx);
      const double drift_value = model.kernel_row(x).dot(u) - bvals(idx);
      worst = std::max(worst, drift_value - target);
    }
    if (slot < chunks) chunk_worst[static_cast<std::size_t>(slot)] = worst;
  });
  double kworst = -std::numeric_limits<double>::infinity();
  for (const double w : chunk_worst) kworst = std::max(kworst, w);

  report.kushner.name = "expected-decrease";
  report.kushner.points = nx;
  report.kushner.threshold = target;
  report.kushner.worst = nx == 0 ? 0.0 : kworst;
  report.kushner.pass = report.kushner.worst <= audit.tolerance;

  return report;
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

namespace {

MonteCarloResult finish_mc(std::int64_t safe, std::int64_t runs,
                           double confidence) {
  MonteCarloResult out;
  out.runs = runs;
  out.confidence = confidence;
  out.estimate = static_cast<double>(safe) / static_cast<double>(runs);
  out.halfwidth = std::sqrt(out.estimate * (1.0 - out.estimate) /
                            (static_cast<double>(runs) * (1.0 - confidence)));
  out.lower = std::max(0.0, out.estimate - out.halfwidth);
  out.upper = std::min(1.0, out.estimate + out.halfwidth);
  out.degenerate = out.halfwidth == 0.0;
  return out;
}

std::int64_t count_safe(const SystemSpec& spec, const Eigen::VectorXd& x0,
                        int steps, const Region& unsafe, std::int64_t runs,
                        const RandomSource& master,
                        const std::string& label_prefix) {
  std::atomic<std::int64_t> safe{0};
  parallel_for(runs, [&](std::int64_t begin, std::int64_t end) {
    std::int64_t local = 0;
    for (std::int64_t r = begin; r < end; ++r) {
      RandomSource stream =
          master.split(fmt::format("{}{}", label_prefix, r));
      if (rollout(spec, x0, steps, unsafe, stream).safe) ++local;
    }
    safe.fetch_add(local);
  });
  return safe.load();
}

}  // namespace

MonteCarloResult monte_carlo(const SystemSpec& spec, const Eigen::VectorXd& x0,
                             int steps, const Region& unsafe,
                             std::int64_t runs, double confidence,
                             const RandomSource& master) {
  spec.validate();
  require(runs >= 1, "monte_carlo: need at least one run");
  require(confidence > 0.0 && confidence < 1.0,
          "monte_carlo: confidence must lie in (0, 1), got {}", confidence);
  require(steps >= 1, "monte_carlo: need at least one step");
  const std::int64_t safe =
      count_safe(spec, x0, steps, unsafe, runs, master, "mc/");
  return finish_mc(safe, runs, confidence);
}

MonteCarloResult monte_carlo_region(const SystemSpec& spec, const Region& init,
                                    int grid_per_axis, int steps,
                                    const Region& unsafe, std::int64_t runs,
                                    double confidence,
                                    const RandomSource& master) {
  spec.validate();
  require(grid_per_axis >= 1, "monte_carlo_region: grid_per_axis must be >= 1");
  require(runs >= 1, "monte_carlo_region: need at least one run");
  require(confidence > 0.0 && confidence < 1.0,
          "monte_carlo_region: confidence must lie in (0, 1)");
  const int n = spec.domain.n();
  Eigen::VectorXd lo(n), hi(n);
  init.bounding_box(spec.domain, lo, hi);

  std::vector<Eigen::VectorXd> starts;
  std::int64_t total = 1;
  for (int d = 0; d < n; ++d) total *= grid_per_axis;
  require(total <= 100000,
          "monte_carlo_region: {}^{} grid points is too many; lower "
          "grid_per_axis",
          grid_per_axis, n);
  for (std::int64_t flat = 0; flat < total; ++flat) {
    Eigen::VectorXd x(n);
    std::int64_t rest = flat;
    for (int d = n - 1; d >= 0; --d) {
      const int k = static_cast<int>(rest % grid_per_axis);
      rest /= grid_per_axis;
      x(d) = grid_per_axis == 1
                 ? 0.5 * (lo(d) + hi(d))
                 : lo(d) + (hi(d) - lo(d)) * static_cast<double>(k) /
                               static_cast<double>(grid_per_axis - 1);
    }
    if (init.contains(x, spec.domain)) starts.push_back(std::move(x));
  }
  require(!starts.empty(),
          "monte_carlo_region: no grid point lies inside the initial region; "
          "raise grid_per_axis");

  MonteCarloResult best;
  bool first = true;
  for (std::size_t g = 0; g < starts.size(); ++g) {
    const std::int64_t safe =
        count_safe(spec, starts[g], steps, unsafe, runs, master,
                   fmt::format("mc/{}/", g));
    const MonteCarloResult r = finish_mc(safe, runs, confidence);
    if (first || r.estimate < best.estimate) {
      best = r;
      first = false;
    }
  }
  return best;
}

}  // namespace fcb
