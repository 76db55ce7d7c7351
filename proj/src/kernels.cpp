#include "fcb/kernels.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fcb/simd.hpp"

namespace fcb {

void KernelParams::validate(int n) const {
  require(amplitude >= 0.0, "kernel: amplitude must be nonnegative");
  require(lengthscales.size() == n,
          fmt::format("kernel: expected {} lengthscales, got {}", n,
                      lengthscales.size()));
  for (int i = 0; i < lengthscales.size(); ++i)
    require(lengthscales[i] > 0.0,
            fmt::format("kernel: lengthscale[{}] must be positive", i));
}

double sqexp(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
             const KernelParams& params) {
  require(x.size() == y.size() && x.size() == params.lengthscales.size(),
          "sqexp: dimension mismatch between points and lengthscales");
  double q = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    double d = (x[i] - y[i]) / params.lengthscales[i];
    q += d * d;
  }
  return params.amplitude * std::exp(-0.5 * q);
}

Eigen::MatrixXd gram(const Eigen::MatrixXd& points,
                     const KernelParams& params) {
  require(points.rows() >= 1, "gram: empty point set");
  params.validate(static_cast<int>(points.cols()));
  const auto N = points.rows();
  const int n = static_cast<int>(points.cols());
  Eigen::VectorXd inv2(n);
  for (int d = 0; d < n; ++d)
    inv2[d] = 1.0 / (params.lengthscales[d] * params.lengthscales[d]);

  Eigen::MatrixXd K(N, N);
  // Column-major storage makes points.col(d) contiguous, so the squared
  // distances accumulate with the vectorized primitive, one axis at a time.
  std::vector<double> acc(static_cast<std::size_t>(N));
  for (Eigen::Index j = 0; j < N; ++j) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (int d = 0; d < n; ++d)
      simd::sqdiff_acc(acc.data(), points.col(d).data(), points(j, d),
                       inv2[d], static_cast<std::size_t>(N));
    for (Eigen::Index i = 0; i < N; ++i)
      K(i, j) = params.amplitude * std::exp(-0.5 * acc[static_cast<std::size_t>(i)]);
  }
  // Symmetrize away round-off so factorizations see an exactly symmetric
  // matrix.
  K = 0.5 * (K + K.transpose()).eval();
  return K;
}

void SampleSet::save_csv(const std::string& path) const {
  std::ofstream out(path);
  require(out.good(), "SampleSet: cannot open for writing: " + path);
  out << csv_bytes();
  require(out.good(), "SampleSet: write failure: " + path);
}

std::string SampleSet::csv_bytes() const {
  std::string s;
  const int n = dim();
  for (int d = 0; d < n; ++d) s += fmt::format("x{},", d + 1);
  for (int d = 0; d < n; ++d)
    s += fmt::format("xp{}{}", d + 1, d + 1 == n ? "" : ",");
  s += "\n";
  for (Eigen::Index i = 0; i < states.rows(); ++i) {
    for (int d = 0; d < n; ++d) s += fmt::format("{:.17g},", states(i, d));
    for (int d = 0; d < n; ++d)
      s += fmt::format("{:.17g}{}", successors(i, d), d + 1 == n ? "" : ",");
    s += "\n";
  }
  return s;
}

SampleSet SampleSet::load_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "SampleSet: cannot open file: " + path);
  std::string header;
  require(static_cast<bool>(std::getline(in, header)),
          "SampleSet: empty file: " + path);

  std::vector<std::string> cols;
  {
    std::stringstream ss(header);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
  }
  require(cols.size() >= 2 && cols.size() % 2 == 0,
          "SampleSet: header must list x1..xn,xp1..xpn");
  int n = static_cast<int>(cols.size()) / 2;
  for (int d = 0; d < n; ++d) {
    require(cols[static_cast<std::size_t>(d)] == fmt::format("x{}", d + 1) &&
                cols[static_cast<std::size_t>(n + d)] ==
                    fmt::format("xp{}", d + 1),
            "SampleSet: malformed header: " + header);
  }

  std::vector<double> vals;
  std::string line;
  std::int64_t rows = 0;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    int got = 0;
    while (std::getline(ss, cell, ',')) {
      std::size_t pos = 0;
      double v = 0;
      try {
        v = std::stod(cell, &pos);
      } catch (const std::exception&) {
        fail(fmt::format("SampleSet: {}:{}: not a number: '{}'", path, lineno,
                         cell));
      }
      require(pos == cell.size(),
              fmt::format("SampleSet: {}:{}: trailing junk in '{}'", path,
                          lineno, cell));
      vals.push_back(v);
      ++got;
    }
    require(got == 2 * n, fmt::format("SampleSet: {}:{}: expected {} fields, "
                                      "got {}",
                                      path, lineno, 2 * n, got));
    ++rows;
  }
  require(rows >= 1, "SampleSet: no data rows in " + path);

  SampleSet s;
  s.states.resize(rows, n);
  s.successors.resize(rows, n);
  for (std::int64_t i = 0; i < rows; ++i) {
    for (int d = 0; d < n; ++d) {
      s.states(i, d) = vals[static_cast<std::size_t>(i * 2 * n + d)];
      s.successors(i, d) = vals[static_cast<std::size_t>(i * 2 * n + n + d)];
    }
  }
  return s;
}

std::string SampleSet::validate(const Domain& domain) const {
  require(states.rows() == successors.rows() &&
              states.cols() == successors.cols(),
          "SampleSet: states/successors shape mismatch");
  require(states.rows() >= 1, "SampleSet: empty");
  require(states.allFinite() && successors.allFinite(),
          "SampleSet: non-finite entries");
  require(states.cols() == domain.n(),
          fmt::format("SampleSet: dimension {} does not match domain "
                      "dimension {}",
                      states.cols(), domain.n()));
  std::int64_t bad_states = 0, bad_succ = 0;
  for (Eigen::Index i = 0; i < states.rows(); ++i) {
    if (!domain.contains(states.row(i).transpose())) ++bad_states;
    if (!domain.contains(successors.row(i).transpose())) ++bad_succ;
  }
  require(bad_states == 0,
          fmt::format("SampleSet: {} states lie outside the domain",
                      bad_states));
  if (bad_succ > 0)
    return fmt::format("warning: {} successors lie outside the domain",
                       bad_succ);
  return {};
}

CMEModel CMEModel::fit(SampleSet data, KernelParams k_in, KernelParams k_out,
                       double lambda) {
  require(lambda >= 0.0, "CMEModel: lambda must be nonnegative");
  const int n = data.dim();
  k_in.validate(n);
  k_out.validate(n);
  CMEModel m;
  m.data = std::move(data);
  m.kernel_in = std::move(k_in);
  m.kernel_out = std::move(k_out);
  m.lambda = lambda;

  const auto N = m.data.count();
  m.regularized = gram(m.data.states, m.kernel_in);
  m.regularized.diagonal().array() += static_cast<double>(N) * lambda;

  m.llt.compute(m.regularized);
  if (m.llt.info() != Eigen::Success) {
    m.used_fallback = true;
    m.ldlt.compute(m.regularized);
    require(m.ldlt.info() == Eigen::Success,
            lambda == 0.0
                ? std::string("CMEModel: Gram matrix is singular and lambda "
                              "is 0; use a positive regularizer")
                : std::string("CMEModel: factorization failed"));
  }

  // The factorization must actually reproduce the matrix; a silent loss of
  // definiteness here would invalidate every weight downstream.
  Eigen::MatrixXd probe = Eigen::MatrixXd::Identity(N, N);
  Eigen::MatrixXd recon = m.regularized * m.solve(probe);
  double rel = (recon - probe).norm() / std::sqrt(static_cast<double>(N));
  require(rel <= 1e-8,
          fmt::format("CMEModel: factorization residual {:.3e} exceeds 1e-8; "
                      "the regularized Gram matrix is too ill-conditioned",
                      rel));
  return m;
}

Eigen::VectorXd CMEModel::solve(const Eigen::VectorXd& rhs) const {
  if (used_fallback) return ldlt.solve(rhs);
  return llt.solve(rhs);
}

Eigen::MatrixXd CMEModel::solve(const Eigen::MatrixXd& rhs) const {
  if (used_fallback) return ldlt.solve(rhs);
  return llt.solve(rhs);
}

Eigen::VectorXd CMEModel::kernel_row(const Eigen::VectorXd& x) const {
  const auto N = data.count();
  const int n = data.dim();
  require(x.size() == n, "CMEModel: query dimension mismatch");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(N);
  for (int d = 0; d < n; ++d) {
    double il2 = 1.0 / (kernel_in.lengthscales[d] * kernel_in.lengthscales[d]);
    simd::sqdiff_acc(acc.data(), data.states.col(d).data(), x[d], il2,
                     static_cast<std::size_t>(N));
  }
  for (Eigen::Index i = 0; i < N; ++i)
    acc[i] = kernel_in.amplitude * std::exp(-0.5 * acc[i]);
  return acc;
}

Eigen::VectorXd cme_weights(const Eigen::VectorXd& x, const CMEModel& model) {
  return model.solve(model.kernel_row(x));
}

double cme_expectation(const Eigen::VectorXd& values_at_successors,
                       const Eigen::VectorXd& weights) {
  require(values_at_successors.size() == weights.size(),
          "cme_expectation: length mismatch");
  return simd::dot(values_at_successors.data(), weights.data(),
                   static_cast<std::size_t>(weights.size()));
}

Eigen::VectorXd median_heuristic(const Eigen::MatrixXd& points) {
  const auto N = points.rows();
  const int n = static_cast<int>(points.cols());
  require(N >= 2, "median_heuristic: need at least two points");
  Eigen::VectorXd out(n);
  std::vector<double> diffs;
  diffs.reserve(static_cast<std::size_t>(N * (N - 1) / 2));
  for (int d = 0; d < n; ++d) {
    diffs.clear();
    for (Eigen::Index i = 0; i < N; ++i)
      for (Eigen::Index j = i + 1; j < N; ++j)
        diffs.push_back(std::fabs(points(i, d) - points(j, d)));
    std::nth_element(diffs.begin(), diffs.begin() + diffs.size() / 2,
                     diffs.end());
    double med = diffs[diffs.size() / 2];
    if (diffs.size() % 2 == 0) {
      auto lower_half_max = std::max_element(diffs.begin(),
                                             diffs.begin() + diffs.size() / 2);
      med = 0.5 * (med + *lower_half_max);
    }
    if (med <= 0.0) {
      double mean =
          std::accumulate(diffs.begin(), diffs.end(), 0.0) /
          static_cast<double>(diffs.size());
      med = mean;  // duplicated coordinates: fall back to the mean difference
    }
    require(med > 0.0,
            fmt::format("median_heuristic: all points identical on axis {}",
                        d));
    out[d] = med;
  }
  return out;
}

}  // namespace fcb
