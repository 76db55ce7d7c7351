#include "fcb/solver.hpp"

#include <fmt/format.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>
#include <vector>

#include "fcb/common.hpp"

namespace fcb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Canonical form: minimize c^T x subject to G x >= h over free x. Rows come
// from the model's constraints ('<=' rows are negated) plus one row per
// finite variable bound, so the simplex core never needs a bound concept.
// ---------------------------------------------------------------------------

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Canonical {
  RowMajorMatrix G;                // m x k, one row per inequality
  Eigen::VectorXd h;               // m
  std::vector<std::string> names;  // m, for diagnostics
};

// Duplicate rows (identical relation and coefficients) are collapsed to the
// tightest right-hand side before canonicalization. The assembled models
// contain large blocks of structurally repeated rows whenever the local
// bound coefficients coincide, and duplicates are pure waste for the
// pricing loop. Byte-exact comparison keeps the feasible set unchanged.
Canonical canonicalize(const LPModel& model) {
  const std::int64_t nv = model.nvars;
  struct Kept {
    std::int64_t row;
    double rhs;
  };
  std::vector<Kept> kept;
  kept.reserve(static_cast<std::size_t>(model.rows()));
  std::unordered_map<std::string, std::size_t> seen;
  seen.reserve(static_cast<std::size_t>(model.rows()) * 2);
  for (std::int64_t r = 0; r < model.rows(); ++r) {
    std::string key;
    key.reserve(static_cast<std::size_t>(nv) * sizeof(double) + 1);
    key.push_back(model.rel[static_cast<std::size_t>(r)]);
    key.append(reinterpret_cast<const char*>(model.row(r)),
               static_cast<std::size_t>(nv) * sizeof(double));
    auto [it, fresh] = seen.try_emplace(std::move(key), kept.size());
    if (fresh) {
      kept.push_back({r, model.rhs[static_cast<std::size_t>(r)]});
    } else {
      Kept& k = kept[it->second];
      const double rhs = model.rhs[static_cast<std::size_t>(r)];
      if (model.rel[static_cast<std::size_t>(r)] == '<') {
        k.rhs = std::min(k.rhs, rhs);
      } else {
        k.rhs = std::max(k.rhs, rhs);
      }
    }
  }

  std::int64_t bound_rows = 0;
  for (std::int64_t j = 0; j < nv; ++j) {
    if (std::isfinite(model.lb(j))) ++bound_rows;
    if (std::isfinite(model.ub(j))) ++bound_rows;
  }

  Canonical can;
  const std::int64_t m = static_cast<std::int64_t>(kept.size()) + bound_rows;
  can.G.setZero(m, nv);
  can.h.resize(m);
  can.names.resize(static_cast<std::size_t>(m));
  std::int64_t out = 0;
  for (const Kept& k : kept) {
    const Eigen::Map<const Eigen::RowVectorXd> row(model.row(k.row), nv);
    if (model.rel[static_cast<std::size_t>(k.row)] == '<') {
      can.G.row(out) = -row;
      can.h(out) = -k.rhs;
    } else {
      can.G.row(out) = row;
      can.h(out) = k.rhs;
    }
    can.names[static_cast<std::size_t>(out)] =
        model.row_names[static_cast<std::size_t>(k.row)];
    ++out;
  }
  for (std::int64_t j = 0; j < nv; ++j) {
    if (std::isfinite(model.lb(j))) {
      can.G(out, j) = 1.0;
      can.h(out) = model.lb(j);
      can.names[static_cast<std::size_t>(out)] =
          fmt::format("lb({})", model.var_names[static_cast<std::size_t>(j)]);
      ++out;
    }
    if (std::isfinite(model.ub(j))) {
      can.G(out, j) = -1.0;
      can.h(out) = -model.ub(j);
      can.names[static_cast<std::size_t>(out)] =
          fmt::format("ub({})", model.var_names[static_cast<std::size_t>(j)]);
      ++out;
    }
  }
  return can;
}

// ---------------------------------------------------------------------------
// Two-phase primal simplex on the dual:  max h^T y  s.t.  G^T y = c, y >= 0.
// Equality rows are scaled so the right-hand side is nonnegative; phase 1
// starts from an all-artificial basis and minimizes the artificial sum,
// phase 2 minimizes -h^T y. The primal point is recovered as x = -S pi from
// the simplex multipliers pi of the optimal basis, which makes the reduced
// cost of dual column j exactly the primal residual G_j x - h_j: optimality
// of the dual run is primal feasibility of x within the pricing threshold.
// ---------------------------------------------------------------------------

enum class CoreStatus {
  optimal,
  dual_infeasible,  // dual has no feasible point (primal unbounded or infeasible)
  dual_unbounded,   // dual objective unbounded => primal infeasible
  cap,
};

struct CoreResult {
  CoreStatus status = CoreStatus::cap;
  Eigen::VectorXd x;            // primal point (size k), valid when optimal/cap
  double dual_objective = 0.0;  // h^T y at the final basis
  std::int64_t iterations = 0;
  std::int64_t unbounded_row = -1;  // canonical row whose dual column diverged
};

class DualSimplex {
 public:
  DualSimplex(const Canonical& can, const Eigen::VectorXd& c, double tolerance,
              std::int64_t cap)
      : can_(can),
        m_(can.h.size()),
        k_(c.size()),
        cap_(cap),
        enter_tol_(std::min(1e-9, tolerance * 0.1)) {
    sign_ = Eigen::VectorXd::Ones(k_);
    for (std::int64_t i = 0; i < k_; ++i) {
      if (c(i) < 0.0) sign_(i) = -1.0;
    }
    rhs_ = sign_.cwiseProduct(c);
    eqs_.resize(static_cast<std::size_t>(k_));
    for (std::int64_t i = 0; i < k_; ++i) eqs_[static_cast<std::size_t>(i)] = i;
    basis_.resize(static_cast<std::size_t>(k_));
    for (std::int64_t i = 0; i < k_; ++i) {
      basis_[static_cast<std::size_t>(i)] = m_ + i;  // artificial of equation i
    }
    feas_tol_ = 1e-7 * (1.0 + rhs_.lpNorm<Eigen::Infinity>());

    // Anti-degeneracy perturbation. The equation right-hand sides are the
    // primal objective coefficients, which are zero for almost every
    // variable here, so the artificial start is massively degenerate and
    // the walk can churn at ratio zero for a very long time. Distinct tiny
    // positive offsets make each pivot strictly productive. Soundness is
    // unaffected: the rhs only enters the ratio test (the pivot path) and
    // the basic values; the pricing that certifies the returned point uses
    // the true costs, the artificial-level threshold dominates the total
    // offset, and the final duality gap is recomputed with the true rhs.
    true_rhs_ = rhs_;
    const double unit =
        0.2 * feas_tol_ / static_cast<double>(k_ * (k_ + 1));
    for (std::int64_t i = 0; i < k_; ++i) {
      rhs_(i) += unit * static_cast<double>(i + 1);
    }
  }

  CoreResult run() {
    CoreResult res;
    if (!iterate(/*phase1=*/true, res)) return res;
    const double art_level = artificial_level();
    if (art_level > feas_tol_) {
      res.status = CoreStatus::dual_infeasible;
      res.iterations = iterations_;
      return res;
    }
    purge_artificials();
    if (!iterate(/*phase1=*/false, res)) return res;
    rhs_ = true_rhs_;  // report the final basis against unperturbed data
    res.status = CoreStatus::optimal;
    res.x = primal_point();
    res.dual_objective = dual_objective();
    res.iterations = iterations_;
    return res;
  }

 private:
  std::int64_t active() const { return static_cast<std::int64_t>(eqs_.size()); }

  // Column of the scaled dual constraint matrix for variable j (gathered on
  // the active equations only).
  Eigen::VectorXd column(std::int64_t j) const {
    Eigen::VectorXd col(active());
    if (j < m_) {
      for (std::int64_t p = 0; p < active(); ++p) {
        const std::int64_t eq = eqs_[static_cast<std::size_t>(p)];
        col(p) = sign_(eq) * can_.G(j, eq);
      }
    } else {
      col.setZero();
      const std::int64_t eq = j - m_;
      for (std::int64_t p = 0; p < active(); ++p) {
        if (eqs_[static_cast<std::size_t>(p)] == eq) col(p) = 1.0;
      }
    }
    return col;
  }

  void refactor() {
    const std::int64_t ka = active();
    Eigen::MatrixXd B(ka, ka);
    for (std::int64_t p = 0; p < ka; ++p) {
      B.col(p) = column(basis_[static_cast<std::size_t>(p)]);
    }
    lu_.compute(B);
    Eigen::VectorXd b(ka);
    for (std::int64_t p = 0; p < ka; ++p) {
      b(p) = rhs_(eqs_[static_cast<std::size_t>(p)]);
    }
    xb_ = lu_.solve(b);
    in_basis_.assign(static_cast<std::size_t>(m_ + k_), 0);
    for (const std::int64_t j : basis_) {
      in_basis_[static_cast<std::size_t>(j)] = 1;
    }
  }

  Eigen::VectorXd multipliers(bool phase1) const {
    const std::int64_t ka = active();
    Eigen::VectorXd cost_b(ka);
    for (std::int64_t p = 0; p < ka; ++p) {
      const std::int64_t j = basis_[static_cast<std::size_t>(p)];
      if (phase1) {
        cost_b(p) = (j >= m_) ? 1.0 : 0.0;
      } else {
        cost_b(p) = (j >= m_) ? 0.0 : -can_.h(j);
      }
    }
    return lu_.transpose().solve(cost_b);
  }

  // Primal point encoded by the current multipliers: x = -S pi scattered to
  // the full equation set (dropped equations contribute 0).
  Eigen::VectorXd primal_from(const Eigen::VectorXd& pi) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(k_);
    for (std::int64_t p = 0; p < active(); ++p) {
      const std::int64_t eq = eqs_[static_cast<std::size_t>(p)];
      x(eq) = -sign_(eq) * pi(p);
    }
    return x;
  }

  Eigen::VectorXd primal_point() {
    refactor();
    return primal_from(multipliers(/*phase1=*/false));
  }

  double artificial_level() const {
    double level = 0.0;
    for (std::int64_t p = 0; p < active(); ++p) {
      if (basis_[static_cast<std::size_t>(p)] >= m_) {
        level += std::max(xb_(p), 0.0);
      }
    }
    return level;
  }

  double dual_objective() const {
    double obj = 0.0;
    for (std::int64_t p = 0; p < active(); ++p) {
      const std::int64_t j = basis_[static_cast<std::size_t>(p)];
      if (j < m_) obj += can_.h(j) * xb_(p);
    }
    return obj;
  }

  // After phase 1 every artificial still in the basis sits at level zero.
  // Each is swapped for a nonbasic structural column with a usable pivot in
  // its basis row; when no such column exists the equation is linearly
  // dependent on the others and is dropped together with the basis slot.
  void purge_artificials() {
    bool changed = true;
    while (changed) {
      changed = false;
      refactor();
      for (std::int64_t p = 0; p < active(); ++p) {
        if (basis_[static_cast<std::size_t>(p)] < m_) continue;
        Eigen::VectorXd unit = Eigen::VectorXd::Zero(active());
        unit(p) = 1.0;
        const Eigen::VectorXd brow = lu_.transpose().solve(unit);
        std::int64_t replacement = -1;
        for (std::int64_t j = 0; j < m_; ++j) {
          if (is_basic(j)) continue;
          double pivot = 0.0;
          for (std::int64_t q = 0; q < active(); ++q) {
            const std::int64_t eq = eqs_[static_cast<std::size_t>(q)];
            pivot += brow(q) * sign_(eq) * can_.G(j, eq);
          }
          if (std::abs(pivot) > 1e-9) {
            replacement = j;
            break;
          }
        }
        if (replacement >= 0) {
          basis_[static_cast<std::size_t>(p)] = replacement;
        } else {
          const std::int64_t eq = basis_[static_cast<std::size_t>(p)] - m_;
          std::size_t eq_pos = 0;
          for (std::size_t q = 0; q < eqs_.size(); ++q) {
            if (eqs_[q] == eq) eq_pos = q;
          }
          eqs_.erase(eqs_.begin() + static_cast<std::ptrdiff_t>(eq_pos));
          basis_.erase(basis_.begin() + static_cast<std::ptrdiff_t>(p));
        }
        changed = true;
        break;  // geometry changed; refactor before touching the next slot
      }
    }
  }

  // Valid after refactor(). Basic columns are never priced: their reduced
  // cost is exactly zero in exact arithmetic, and letting factorization
  // noise push one below the entering threshold makes it pivot against
  // itself forever (ratio zero on its own slot, basis unchanged).
  bool is_basic(std::int64_t j) const {
    return in_basis_[static_cast<std::size_t>(j)] != 0;
  }

  static std::int64_t trace_every() {
    const char* env = std::getenv("FCB_LP_TRACE");
    return env == nullptr ? 0 : std::atoll(env);
  }

  // Runs one phase to its optimum. Returns false when the overall solve is
  // finished early (unbounded dual or iteration cap), with `res` filled in.
  bool iterate(bool phase1, CoreResult& res) {
    const std::int64_t trace = trace_every();
    std::int64_t degenerate_streak = 0;
    while (true) {
      refactor();
      const Eigen::VectorXd pi = multipliers(phase1);
      const Eigen::VectorXd x = primal_from(pi);

      // Reduced costs of all structural columns in one pass: phase 2 prices
      // column j at G_j x - h_j, phase 1 at G_j x (costs are zero there).
      Eigen::VectorXd reduced = can_.G * x;
      if (!phase1) reduced -= can_.h;

      std::int64_t entering = -1;
      const bool bland = degenerate_streak >= 50;
      double best = -enter_tol_;
      for (std::int64_t j = 0; j < m_; ++j) {
        if (reduced(j) < best && !is_basic(j)) {
          entering = j;
          if (bland) break;
          best = reduced(j);
        }
      }
      if (phase1 && entering == -1) {
        // Artificial columns price at 1 - pi(row); they may re-enter only
        // while phase 1 still runs.
        for (std::int64_t p = 0; p < active(); ++p) {
          const std::int64_t j = m_ + eqs_[static_cast<std::size_t>(p)];
          if (is_basic(j)) continue;
          const double d = 1.0 - pi(p);
          if (d < best) {
            entering = j;
            if (bland) break;
            best = d;
          }
        }
      }
      if (entering == -1) return true;  // phase optimum reached

      const Eigen::VectorXd w = lu_.solve(column(entering));
      std::int64_t leave_pos = -1;
      double best_ratio = kInf;
      for (std::int64_t p = 0; p < active(); ++p) {
        if (w(p) <= 1e-9) continue;
        // Clamp tiny numerically negative basics so a noise entry cannot
        // force a backward step.
        const double ratio = std::max(xb_(p), 0.0) / w(p);
        if (ratio < best_ratio ||
            (ratio == best_ratio && leave_pos >= 0 &&
             basis_[static_cast<std::size_t>(p)] <
                 basis_[static_cast<std::size_t>(leave_pos)])) {
          best_ratio = ratio;
          leave_pos = p;
        }
      }
      if (leave_pos == -1) {
        // Dual objective improves forever along this column: the primal row
        // it prices can never be satisfied together with the others.
        res.status = CoreStatus::dual_unbounded;
        res.unbounded_row = (entering < m_) ? entering : -1;
        res.iterations = iterations_;
        return false;
      }

      degenerate_streak = (best_ratio <= 1e-12) ? degenerate_streak + 1 : 0;
      if (trace > 0 && iterations_ % trace == 0) {
        std::fprintf(stderr,
                     "[lp] it=%lld phase=%d level=%.6e obj=%.9e best=%.3e "
                     "ratio=%.3e enter=%lld leave=%lld streak=%lld\n",
                     static_cast<long long>(iterations_), phase1 ? 1 : 2,
                     artificial_level(), dual_objective(), best, best_ratio,
                     static_cast<long long>(entering),
                     static_cast<long long>(basis_[static_cast<std::size_t>(
                         leave_pos)]),
                     static_cast<long long>(degenerate_streak));
      }
      basis_[static_cast<std::size_t>(leave_pos)] = entering;
      ++iterations_;
      if (iterations_ >= cap_) {
        res.status = CoreStatus::cap;
        res.x = primal_point();
        res.dual_objective = dual_objective();
        res.iterations = iterations_;
        return false;
      }
    }
  }

  const Canonical& can_;
  std::int64_t m_ = 0;
  std::int64_t k_ = 0;
  std::int64_t cap_ = 0;
  double enter_tol_ = 1e-9;
  double feas_tol_ = 1e-7;
  Eigen::VectorXd sign_;
  Eigen::VectorXd rhs_;       // perturbed during the walk
  Eigen::VectorXd true_rhs_;  // unperturbed equation right-hand sides
  std::vector<std::int64_t> eqs_;    // active equation indices
  std::vector<std::int64_t> basis_;  // dual variable per basis slot
  std::vector<char> in_basis_;       // flag per dual variable, see is_basic
  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  Eigen::VectorXd xb_;
  std::int64_t iterations_ = 0;
};

LPSolution finish_non_optimal(const LPModel& model, SolveStatus status,
                              std::int64_t iterations, std::string note) {
  LPSolution sol;
  sol.status = status;
  sol.values = Eigen::VectorXd::Zero(model.nvars);
  sol.objective = 0.0;
  sol.max_residual = max_violation(model, sol.values);
  sol.iterations = iterations;
  sol.note = std::move(note);
  return sol;
}

}  // namespace

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::iteration_limit: return "iteration-limit";
  }
  return "unknown";
}

double max_violation(const LPModel& model, const Eigen::VectorXd& x) {
  require(x.size() == model.nvars,
          "max_violation: point has {} entries, model has {} variables",
          x.size(), model.nvars);
  double worst = 0.0;
  for (std::int64_t r = 0; r < model.rows(); ++r) {
    const Eigen::Map<const Eigen::RowVectorXd> row(model.row(r), model.nvars);
    const double lhs = row.dot(x);
    const double rhs = model.rhs[static_cast<std::size_t>(r)];
    const double gap =
        (model.rel[static_cast<std::size_t>(r)] == '<') ? lhs - rhs : rhs - lhs;
    worst = std::max(worst, gap);
  }
  for (std::int64_t j = 0; j < model.nvars; ++j) {
    if (std::isfinite(model.lb(j))) worst = std::max(worst, model.lb(j) - x(j));
    if (std::isfinite(model.ub(j))) worst = std::max(worst, x(j) - model.ub(j));
  }
  return worst;
}

LPSolution solve(const LPModel& model, double tolerance,
                 std::int64_t iteration_cap) {
  model.validate();
  require(tolerance > 0.0, "solve: tolerance must be positive, got {}",
          tolerance);
  require(iteration_cap > 0, "solve: iteration cap must be positive, got {}",
          iteration_cap);

  const Canonical can = canonicalize(model);
  DualSimplex simplex(can, model.objective, tolerance, iteration_cap);
  CoreResult core = simplex.run();

  if (core.status == CoreStatus::dual_unbounded) {
    std::string culprit = "a variable bound";
    if (core.unbounded_row >= 0) {
      culprit = fmt::format(
          "row '{}'", can.names[static_cast<std::size_t>(core.unbounded_row)]);
    }
    return finish_non_optimal(
        model, SolveStatus::infeasible, core.iterations,
        fmt::format("no feasible point: the dual objective grows without "
                    "bound along the multiplier of {}",
                    culprit));
  }
  if (core.status == CoreStatus::dual_infeasible) {
    // The dual has no feasible point, so the primal is unbounded or empty.
    // A zero-objective run keeps the same feasible set and always has a
    // feasible dual (y = 0): it can only end optimal (primal feasible =>
    // original problem unbounded) or dual-unbounded (primal infeasible).
    LPModel probe = model;
    probe.objective.setZero();
    const Canonical probe_can = canonicalize(probe);
    DualSimplex feas(probe_can, probe.objective, tolerance, iteration_cap);
    const CoreResult feas_core = feas.run();
    const std::int64_t total = core.iterations + feas_core.iterations;
    if (feas_core.status == CoreStatus::optimal) {
      return finish_non_optimal(
          model, SolveStatus::unbounded, total,
          "objective decreases without bound over a nonempty feasible set");
    }
    if (feas_core.status == CoreStatus::dual_unbounded) {
      std::string culprit = "a variable bound";
      if (feas_core.unbounded_row >= 0) {
        culprit = fmt::format(
            "row '{}'",
            probe_can.names[static_cast<std::size_t>(feas_core.unbounded_row)]);
      }
      return finish_non_optimal(
          model, SolveStatus::infeasible, total,
          fmt::format("no feasible point: certificate involves {}", culprit));
    }
    return finish_non_optimal(model, SolveStatus::iteration_limit, total,
                              "iteration cap hit while classifying an "
                              "infeasible-or-unbounded model");
  }
  if (core.status == CoreStatus::cap) {
    LPSolution sol;
    sol.status = SolveStatus::iteration_limit;
    sol.values = core.x;
    sol.objective = model.objective.dot(core.x);
    sol.max_residual = max_violation(model, core.x);
    sol.iterations = core.iterations;
    sol.note = fmt::format("iteration cap {} reached; incumbent point kept",
                           iteration_cap);
    return sol;
  }

  LPSolution sol;
  sol.status = SolveStatus::optimal;
  sol.values = core.x;
  sol.objective = model.objective.dot(core.x);
  sol.max_residual = max_violation(model, core.x);
  sol.iterations = core.iterations;
  require(sol.max_residual <= tolerance,
          "solve: numerical breakdown — the optimal basis leaves residual {} "
          "above tolerance {}",
          sol.max_residual, tolerance);
  const double gap = std::abs(sol.objective - core.dual_objective);
  require(gap <= 1e-6 * (1.0 + std::abs(sol.objective)),
          "solve: numerical breakdown — duality gap {} between primal {} and "
          "dual {}",
          gap, sol.objective, core.dual_objective);
  return sol;
}

LPSolution solve_via_backend(const LPModel& model, const std::string& backend,
                             double tolerance) {
  model.validate();
  require(!backend.empty(), "solve_via_backend: no backend command configured");

  char tmpl[] = "/tmp/fcb-lp-XXXXXX";
  const char* dir = mkdtemp(tmpl);
  require(dir != nullptr, "solve_via_backend: cannot create temp directory");
  const std::string in_path = fmt::format("{}/in.lp", dir);
  const std::string out_path = fmt::format("{}/out.sol", dir);

  {
    std::ofstream out(in_path);
    require(out.good(), "solve_via_backend: cannot open {}", in_path);
    out << export_lp(model);
  }

  const std::string cmd = fmt::format("{} {} {}", backend, in_path, out_path);
  const int rc = std::system(cmd.c_str());
  require(rc == 0, "solve_via_backend: '{}' exited with status {}", cmd, rc);

  std::ifstream in(out_path);
  require(in.good(), "solve_via_backend: backend produced no solution file {}",
          out_path);
  std::unordered_map<std::string, double> values;
  std::string status_word;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string name;
    if (!(ss >> name)) continue;  // blank line
    if (name == "status") {
      require(static_cast<bool>(ss >> status_word),
              "solve_via_backend: malformed status line '{}'", line);
      continue;
    }
    double value = 0.0;
    require(static_cast<bool>(ss >> value),
            "solve_via_backend: malformed solution line '{}'", line);
    values[name] = value;
  }
  std::remove(in_path.c_str());
  std::remove(out_path.c_str());
  rmdir(tmpl);
  require(!status_word.empty(),
          "solve_via_backend: solution file has no status line");

  if (status_word != "optimal") {
    SolveStatus st = SolveStatus::iteration_limit;
    if (status_word == "infeasible") {
      st = SolveStatus::infeasible;
    } else if (status_word == "unbounded") {
      st = SolveStatus::unbounded;
    } else {
      require(status_word == "iteration-limit",
              "solve_via_backend: unknown status '{}'", status_word);
    }
    return finish_non_optimal(model, st, 0,
                              fmt::format("backend reported {}", status_word));
  }

  Eigen::VectorXd x(model.nvars);
  for (std::int64_t j = 0; j < model.nvars; ++j) {
    const auto it = values.find(model.var_names[static_cast<std::size_t>(j)]);
    require(it != values.end(),
            "solve_via_backend: solution file is missing variable '{}'",
            model.var_names[static_cast<std::size_t>(j)]);
    x(j) = it->second;
  }
  require(values.size() == static_cast<std::size_t>(model.nvars),
          "solve_via_backend: solution file names {} variables, model has {}",
          values.size(), model.nvars);

  LPSolution sol;
  sol.status = SolveStatus::optimal;
  sol.values = x;
  sol.objective = model.objective.dot(x);
  sol.max_residual = max_violation(model, x);
  sol.iterations = 0;
  require(sol.max_residual <= tolerance,
          "solve_via_backend: rejected — the returned point violates a "
          "constraint by {} (tolerance {})",
          sol.max_residual, tolerance);
  return sol;
}

}  // namespace fcb
