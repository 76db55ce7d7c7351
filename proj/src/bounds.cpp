#include "fcb/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <vector>

#include <fmt/format.h>

#include "fcb/common.hpp"

namespace fcb {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// One axis factor of the kernel. Near the removable singularities
// (|sin(z/2)| < 1e-7) a 4th-order series in the reduced argument
// u = remainder(z, 2*pi) avoids the 0/0 cancellation; the sign factors the
// reduction introduces in numerator and denominator cancel exactly.
double vp_axis(double z, int a, int b) {
  const double p = 0.5 * (b + a);
  const double q = 0.5 * (b - a);
  const double s = std::sin(0.5 * z);
  if (std::abs(s) < 1e-7) {
    const double u = std::remainder(z, kTwoPi);
    return 4.0 * p * q *
           (1.0 - (2.0 * (p * p + q * q) - 1.0) * u * u / 12.0) /
           static_cast<double>(b - a);
  }
  return std::sin(p * z) * std::sin(q * z) /
         (static_cast<double>(b - a) * s * s);
}

// Absolute kernel values at every lattice phase for one axis coordinate,
// plus prefix sums (prefix[l] = sum of tvals[0..l-1], so a contiguous range
// [lo, hi] sums to prefix[hi+1] - prefix[lo]).
void axis_tables(double phase, int Q, int a, int b, double* tvals,
                 double* prefix) {
  prefix[0] = 0.0;
  for (int l = 0; l < Q; ++l) {
    tvals[l] = std::abs(vp_axis(phase - kTwoPi * l / Q, a, b));
    prefix[l + 1] = prefix[l] + tvals[l];
  }
}

// Run-length view of a lattice-point subset: maximal runs of consecutive
// members along the last axis, each tagged with the leading multi-index.
// Separable kernel sums over the subset then cost O(runs * n) instead of
// O(points * n).
struct RunSet {
  std::vector<int> heads;  // runs * (n-1), row-major
  std::vector<int> lo, hi;
  std::int64_t points = 0;

  std::int64_t runs() const { return static_cast<std::int64_t>(lo.size()); }
};

RunSet decompose(const std::vector<char>& mask, int n, int Q) {
  RunSet rs;
  const std::int64_t total = static_cast<std::int64_t>(mask.size());
  std::vector<int> multi(n, 0);
  int open_lo = -1;
  for (std::int64_t idx = 0; idx < total; ++idx) {
    if (mask[static_cast<std::size_t>(idx)]) {
      if (open_lo < 0) open_lo = multi[n - 1];
      ++rs.points;
    } else if (open_lo >= 0) {
      rs.heads.insert(rs.heads.end(), multi.begin(), multi.end() - 1);
      rs.lo.push_back(open_lo);
      rs.hi.push_back(multi[n - 1] - 1);
      open_lo = -1;
    }
    // Odometer increment; close any open run at the end of the last axis.
    int d = n - 1;
    while (d >= 0 && ++multi[d] == Q) {
      if (d == n - 1 && open_lo >= 0) {
        rs.heads.insert(rs.heads.end(), multi.begin(), multi.end() - 1);
        rs.lo.push_back(open_lo);
        rs.hi.push_back(Q - 1);
        open_lo = -1;
      }
      multi[d] = 0;
      --d;
    }
  }
  return rs;
}

// Sum of prod_d tvals_d over the subset, given per-axis value tables for
// the leading axes and prefix sums for the last axis.
double masked_sum(const RunSet& rs, int n,
                  const std::vector<const double*>& tvals,
                  const double* prefix_last) {
  double total = 0.0;
  const std::int64_t runs = rs.runs();
  for (std::int64_t r = 0; r < runs; ++r) {
    double head = 1.0;
    for (int d = 0; d + 1 < n; ++d) {
      head *= tvals[static_cast<std::size_t>(d)]
                   [rs.heads[static_cast<std::size_t>(r) *
                                 static_cast<std::size_t>(n - 1) +
                             static_cast<std::size_t>(d)]];
    }
    total += head * (prefix_last[rs.hi[static_cast<std::size_t>(r)] + 1] -
                     prefix_last[rs.lo[static_cast<std::size_t>(r)]]);
  }
  return total;
}

}  // namespace

void TighteningCoefficients::validate() const {
  require(C >= 1.0, fmt::format("tightening coefficient C = {:.9g} is below "
                                "1; the lattice parameters are inconsistent",
                                C));
  for (const auto& [label, A] : A_map) {
    require(A >= 0.0,
            fmt::format("constraint family '{}' has negative local "
                        "coefficient A = {:.9g}",
                        label, A));
    require(C - 2.0 * A + 1.0 > 0.0,
            fmt::format("constraint family '{}' has C - 2A + 1 = {:.6g} <= 0 "
                        "(C = {:.6g}, A = {:.6g}); refine the lattice with a "
                        "larger oversample factor or widen the split buffer "
                        "so out-split points sit farther from the region",
                        label, C - 2.0 * A + 1.0, C, A));
  }
}

double c_coefficient(int f_max, int Q, int n) {
  require(f_max >= 0, "c_coefficient: max frequency must be nonnegative");
  require(n >= 1, "c_coefficient: dimension must be positive");
  require(Q >= 2 * f_max + 1,
          fmt::format("c_coefficient: lattice resolution {} violates the "
                      "Nyquist requirement {} for max frequency {}",
                      Q, 2 * f_max + 1, f_max));
  const double ratio = 1.0 - 2.0 * f_max / static_cast<double>(Q);
  return std::pow(ratio, -0.5 * n);
}

double vallee_poussin(const Eigen::VectorXd& z, int a, int b) {
  require(a >= 0 && b > a, "vallee_poussin: parameters must satisfy b > a >= 0");
  require(z.size() >= 1, "vallee_poussin: empty argument");
  double value = 1.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    value *= vp_axis(z(i), a, b);
  }
  return value;
}

Extremes extremes_over(const Eigen::VectorXd& values,
                       const std::vector<std::int64_t>& indices) {
  require(!indices.empty(), "extremes_over: empty index list");
  Extremes e{std::numeric_limits<double>::infinity(),
             -std::numeric_limits<double>::infinity()};
  for (std::int64_t idx : indices) {
    require(idx >= 0 && idx < values.size(),
            "extremes_over: index out of range");
    e.minimum = std::min(e.minimum, values(idx));
    e.maximum = std::max(e.maximum, values(idx));
  }
  return e;
}

Interval local_bounds(const Extremes& inside, const Extremes& outside,
                      double C, double A) {
  require(inside.minimum <= inside.maximum,
          "local_bounds: inside extremes out of order");
  require(C >= 1.0, "local_bounds: C must be at least 1");
  require(A >= 0.0, "local_bounds: A must be nonnegative");
  const double ctr = 0.5 * (inside.maximum + inside.minimum);
  const double hr = 0.5 * (inside.maximum - inside.minimum);
  double dev = 0.0;
  if (A > 0.0) {
    require(outside.minimum <= outside.maximum,
            "local_bounds: outside extremes out of order");
    dev = std::max({outside.maximum - ctr, ctr - outside.minimum, 0.0});
  }
  const double h = C * hr + A * dev;
  return {ctr - h, ctr + h};
}

double a_coefficient(const Lattice& lattice,
                     const std::vector<std::int64_t>& outside_indices,
                     int f_max, int Q, const SearchConfig& search) {
  const std::int64_t total = lattice.size();
  require(total > 0, "a_coefficient: empty lattice");
  require(Q == lattice.Q,
          fmt::format("a_coefficient: resolution argument {} disagrees with "
                      "the lattice resolution {}",
                      Q, lattice.Q));
  require(Q >= 2 * f_max + 1,
          fmt::format("a_coefficient: lattice resolution {} violates the "
                      "Nyquist requirement {} for max frequency {}",
                      Q, 2 * f_max + 1, f_max));
  require(search.refine >= 1, "a_coefficient: refine must be at least 1");
  require(search.descent_rounds >= 0,
          "a_coefficient: descent_rounds must be nonnegative");
  require(search.safety >= 1.0,
          "a_coefficient: safety factor must be at least 1");
  if (outside_indices.empty()) return 0.0;

  const int n = lattice.n();
  const int a = f_max;
  const int b = Q - f_max;
  const double ntot = static_cast<double>(total);

  std::vector<char> out_mask(static_cast<std::size_t>(total), 0);
  for (std::int64_t idx : outside_indices) {
    require(idx >= 0 && idx < total, "a_coefficient: outside index out of range");
    out_mask[static_cast<std::size_t>(idx)] = 1;
  }
  std::vector<char> in_mask(static_cast<std::size_t>(total));
  for (std::int64_t i = 0; i < total; ++i) {
    in_mask[static_cast<std::size_t>(i)] = out_mask[static_cast<std::size_t>(i)] ? 0 : 1;
  }

  // The in-split is usually a solid index box (box regions) — then the
  // masked sum is a pure product of per-axis range sums. Otherwise fall
  // back to run-length sums over whichever split has fewer runs.
  std::vector<int> box_lo(n, Q), box_hi(n, -1);
  std::int64_t in_count = 0;
  {
    std::vector<int> multi(n, 0);
    for (std::int64_t idx = 0; idx < total; ++idx) {
      if (in_mask[static_cast<std::size_t>(idx)]) {
        ++in_count;
        for (int d = 0; d < n; ++d) {
          box_lo[d] = std::min(box_lo[d], multi[d]);
          box_hi[d] = std::max(box_hi[d], multi[d]);
        }
      }
      int d = n - 1;
      while (d >= 0 && ++multi[d] == Q) {
        multi[d] = 0;
        --d;
      }
    }
  }
  bool in_is_box = in_count > 0;
  if (in_is_box) {
    std::int64_t box_points = 1;
    for (int d = 0; d < n; ++d) box_points *= box_hi[d] - box_lo[d] + 1;
    in_is_box = box_points == in_count;
  }
  RunSet in_runs, out_runs;
  bool sum_inside = true;  // evaluate sum over in-split, complement via total
  if (!in_is_box) {
    in_runs = decompose(in_mask, n, Q);
    out_runs = decompose(out_mask, n, Q);
    sum_inside = in_runs.runs() <= out_runs.runs();
  }

  // Candidate grid: `refine` times the lattice resolution over the region's
  // bounding box, clipped to the periodic domain. Membership is checked
  // against the region with the periodic domain standing in for the state
  // domain (relevant only to complement regions, whose bound then covers
  // the whole sampled shell — conservative).
  const Domain& tilde = lattice.tilde;
  Eigen::VectorXd bb_lo, bb_hi;
  search.region.bounding_box(tilde, bb_lo, bb_hi);
  require(bb_lo.size() == n,
          "a_coefficient: search region dimension does not match the lattice");
  std::vector<double> clip_lo(n), spacing(n);
  std::vector<std::int64_t> counts(n);
  std::int64_t n_candidates = 1;
  for (int d = 0; d < n; ++d) {
    const double lo = std::max(bb_lo(d), tilde.lower(d));
    const double hi = std::min(bb_hi(d), tilde.upper(d));
    clip_lo[d] = lo;
    spacing[d] = lattice.step(d) / search.refine;
    counts[d] = hi < lo
                    ? 0
                    : static_cast<std::int64_t>(
                          std::floor((hi - lo) / spacing[d])) +
                          1;
    n_candidates *= counts[d];
    require(n_candidates <= (std::int64_t{1} << 27),
            "a_coefficient: candidate grid too large; lower the refinement "
            "multiplier");
  }

  // Per-axis kernel tables for every candidate coordinate.
  std::vector<std::vector<double>> grid_tvals(n), grid_prefix(n);
  for (int d = 0; d < n; ++d) {
    grid_tvals[d].resize(static_cast<std::size_t>(counts[d]) * Q);
    grid_prefix[d].resize(static_cast<std::size_t>(counts[d]) * (Q + 1));
    for (std::int64_t i = 0; i < counts[d]; ++i) {
      const double x = clip_lo[d] + spacing[d] * i;
      const double phase = kTwoPi * (x - tilde.lower(d)) / tilde.span()(d);
      axis_tables(phase, Q, a, b,
                  grid_tvals[d].data() + static_cast<std::size_t>(i) * Q,
                  grid_prefix[d].data() +
                      static_cast<std::size_t>(i) * (Q + 1));
    }
  }

  // Kernel row sum over the out-split given one table/prefix pointer per
  // axis for the evaluation point.
  auto eval_tables = [&](const std::vector<const double*>& tv,
                         const std::vector<const double*>& pf) {
    if (in_is_box) {
      double all = 1.0, inside = 1.0;
      for (int d = 0; d < n; ++d) {
        all *= pf[d][Q];
        inside *= pf[d][box_hi[d] + 1] - pf[d][box_lo[d]];
      }
      return all - inside;
    }
    if (sum_inside) {
      double all = 1.0;
      for (int d = 0; d < n; ++d) all *= pf[d][Q];
      return all - masked_sum(in_runs, n, tv, pf[n - 1]);
    }
    return masked_sum(out_runs, n, tv, pf[n - 1]);
  };

  struct Best {
    double value = -1.0;
    std::int64_t flat = -1;
  };
  Best best;
  std::mutex best_mutex;
  if (n_candidates > 0) {
    parallel_for(n_candidates, [&](std::int64_t begin, std::int64_t end) {
      Best local;
      std::vector<std::int64_t> vidx(n);
      Eigen::VectorXd x(n);
      std::vector<const double*> tv(n), pf(n);
      for (std::int64_t flat = begin; flat < end; ++flat) {
        std::int64_t t = flat;
        for (int d = n - 1; d >= 0; --d) {
          vidx[d] = t % counts[d];
          t /= counts[d];
        }
        for (int d = 0; d < n; ++d) {
          x(d) = clip_lo[d] + spacing[d] * vidx[d];
        }
        if (!search.region.contains(x, tilde)) continue;
        for (int d = 0; d < n; ++d) {
          tv[d] = grid_tvals[d].data() +
                  static_cast<std::size_t>(vidx[d]) * Q;
          pf[d] = grid_prefix[d].data() +
                  static_cast<std::size_t>(vidx[d]) * (Q + 1);
        }
        const double value = eval_tables(tv, pf);
        if (value > local.value ||
            (value == local.value && flat < local.flat)) {
          local = {value, flat};
        }
      }
      std::lock_guard<std::mutex> lock(best_mutex);
      if (local.value > best.value ||
          (local.value == best.value && local.flat < best.flat)) {
        best = local;
      }
    });
  }

  // Evaluation at an arbitrary point, used by the fallback and the polish.
  std::vector<double> scratch_t(static_cast<std::size_t>(n) * Q);
  std::vector<double> scratch_p(static_cast<std::size_t>(n) * (Q + 1));
  auto eval_point = [&](const Eigen::VectorXd& x) {
    std::vector<const double*> tv(n), pf(n);
    for (int d = 0; d < n; ++d) {
      double* tp = scratch_t.data() + static_cast<std::size_t>(d) * Q;
      double* pp = scratch_p.data() + static_cast<std::size_t>(d) * (Q + 1);
      const double phase = kTwoPi * (x(d) - tilde.lower(d)) / tilde.span()(d);
      axis_tables(phase, Q, a, b, tp, pp);
      tv[d] = tp;
      pf[d] = pp;
    }
    return eval_tables(tv, pf);
  };

  Eigen::VectorXd best_x(n);
  double best_value = best.value;
  if (best.flat >= 0) {
    std::int64_t t = best.flat;
    for (int d = n - 1; d >= 0; --d) {
      best_x(d) = clip_lo[d] + spacing[d] * (t % counts[d]);
      t /= counts[d];
    }
  } else {
    // Grid missed the region entirely (thinner than a refined cell); fall
    // back to in-split lattice points that are members.
    for (std::int64_t i = 0; i < total; ++i) {
      if (!in_mask[static_cast<std::size_t>(i)]) continue;
      const Eigen::VectorXd x = lattice.point(i);
      if (!search.region.contains(x, tilde)) continue;
      const double value = eval_point(x);
      if (value > best_value) {
        best_value = value;
        best_x = x;
      }
    }
    require(best_value >= 0.0,
            "a_coefficient: no search candidate lies inside the region; "
            "raise the refinement multiplier");
  }

  // Coordinate-descent polish around the best grid candidate.
  for (int round = 0; round < search.descent_rounds; ++round) {
    for (int d = 0; d < n; ++d) {
      const double lo = std::max(best_x(d) - spacing[d], clip_lo[d]);
      const double hi = counts[d] > 0
                            ? std::min(best_x(d) + spacing[d],
                                       clip_lo[d] + spacing[d] * (counts[d] - 1))
                            : best_x(d) + spacing[d];
      const int probes = 33;
      Eigen::VectorXd x = best_x;
      for (int i = 0; i < probes; ++i) {
        x(d) = lo + (hi - lo) * i / (probes - 1);
        if (!search.region.contains(x, tilde)) continue;
        const double value = eval_point(x);
        if (value > best_value) {
          best_value = value;
          best_x = x;
        }
      }
    }
  }

  return best_value / ntot * search.safety;
}

}  // namespace fcb
