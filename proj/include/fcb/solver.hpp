#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "fcb/lp.hpp"

namespace fcb {

enum class SolveStatus { optimal, infeasible, unbounded, iteration_limit };

std::string to_string(SolveStatus status);

struct LPSolution {
  SolveStatus status = SolveStatus::iteration_limit;
  Eigen::VectorXd values;      // one entry per model variable
  double objective = 0.0;      // recomputed from the model, never trusted
  double max_residual = 0.0;   // worst violation over all rows and bounds
  std::int64_t iterations = 0;
  std::string note;            // human-readable diagnosis for non-optimal runs
};

// Worst constraint violation of x against every row and variable bound of
// the model (0 when feasible). Shared by the solver's self-check, the
// back-end validation gate, and certificate audits.
double max_violation(const LPModel& model, const Eigen::VectorXd& x);

// Dense two-phase revised simplex. The models this library assembles have
// far more rows than variables, so the iteration runs on the dual (one
// dual variable per row, basis of size ~#variables); pricing a dual column
// is exactly evaluating the primal residual of its row, and the optimal
// basis hands back the primal point through the binding rows. Determinism:
// entering variable is the most negative reduced cost with lowest index on
// ties, switching to Bland's rule after a degenerate streak; leaving is the
// lowest-index minimizer of the ratio test. Residuals are always measured
// against the original rows, never the factored system: optimal status
// guarantees max_residual <= tolerance, and a basis that cannot meet that
// is reported as an error, never returned silently.
LPSolution solve(const LPModel& model, double tolerance = 1e-8,
                 std::int64_t iteration_cap = 100000);

// Runs `backend in.lp out.sol` on the exported model. The solution file
// holds one "var value" line per variable plus a "status" line. A returned
// point is accepted only after the same residual validation the built-in
// solver applies to itself; anything violating a row beyond the tolerance
// is rejected with a diagnostic.
LPSolution solve_via_backend(const LPModel& model, const std::string& backend,
                             double tolerance = 1e-8);

}  // namespace fcb
