#include "fcb/spectral.hpp"

#include <cmath>
#include <complex>
#include <vector>

#include <fmt/format.h>

#include "fcb/common.hpp"
#include "fcb/fft.hpp"

namespace fcb {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

// Standard-normal mass of [lo, hi], computed on the erfc side that avoids
// cancellation for intervals far in the tail.
double gauss_interval_mass(double lo, double hi) {
  require(lo <= hi, "gauss_interval_mass: interval bounds out of order");
  if (lo >= 0.0) {
    return 0.5 * (std::erfc(lo / kSqrt2) - std::erfc(hi / kSqrt2));
  }
  if (hi <= 0.0) {
    return gauss_interval_mass(-hi, -lo);
  }
  return 1.0 - 0.5 * std::erfc(hi / kSqrt2) - 0.5 * std::erfc(-lo / kSqrt2);
}

// Row-major flat position of a nonnegative multi-index in a Q^n grid,
// last axis fastest.
std::int64_t grid_index(const Eigen::VectorXi& multi, int Q) {
  std::int64_t pos = 0;
  for (int d = 0; d < multi.size(); ++d) {
    pos = pos * Q + multi(d);
  }
  return pos;
}

}  // namespace

// The FFT-based routines only make sense on the lattice the basis induces:
// origin at the domain's lower corner, extent equal to the periodic domain.
void check_lattice_alignment(const SpectralBasis& basis,
                             const Lattice& lattice, const char* who) {
  require(lattice.n() == basis.domain.n(),
          fmt::format("{}: lattice dimension {} does not match basis "
                      "dimension {}",
                      who, lattice.n(), basis.domain.n()));
  require(lattice.Q >= 2 * basis.f_max + 1,
          fmt::format("{}: lattice resolution {} is below the Nyquist "
                      "requirement {} for max frequency {}",
                      who, lattice.Q, 2 * basis.f_max + 1, basis.f_max));
  Domain tilde = periodic_domain(basis.domain, basis.dilation);
  const double scale = tilde.span().maxCoeff();
  require((lattice.tilde.lower - tilde.lower).cwiseAbs().maxCoeff() <=
                  1e-9 * scale &&
              (lattice.tilde.upper - tilde.upper).cwiseAbs().maxCoeff() <=
                  1e-9 * scale,
          fmt::format("{}: lattice was not built over this basis's periodic "
                      "domain",
                      who));
}

SpectralBasis build_basis(int m_per_axis, const KernelParams& kernel_out,
                          const Domain& domain) {
  require(m_per_axis >= 1, "build_basis: bands per axis must be at least 1");
  const int n = domain.n();
  kernel_out.validate(n);

  std::int64_t count = 1;
  for (int d = 0; d < n; ++d) {
    count *= m_per_axis;
    require(count <= 4'000'000,
            fmt::format("build_basis: {} bands per axis in {} dimensions "
                        "exceeds the supported feature dimension",
                        m_per_axis, n));
  }

  SpectralBasis basis;
  basis.m_per_axis = m_per_axis;
  basis.f_max = m_per_axis - 1;
  basis.M = count - 1;
  basis.domain = domain;
  basis.sigma_f = kernel_out.sigma();

  const Eigen::VectorXd span = domain.span();
  basis.dilation.resize(n);
  for (int d = 0; d < n; ++d) {
    const double sl = kernel_out.lengthscales(d) / span(d);
    basis.dilation(d) = 6.0 / (sl * (2.0 * m_per_axis - 1.0));
  }

  basis.multi_indices.resize(count, n);
  for (std::int64_t j = 0; j < count; ++j) {
    std::int64_t t = j;
    for (int d = n - 1; d >= 0; --d) {
      basis.multi_indices(j, d) = static_cast<int>(t % m_per_axis);
      t /= m_per_axis;
    }
  }

  basis.band_weights = band_weights(basis, kernel_out);
  return basis;
}

Eigen::VectorXd band_weights(const SpectralBasis& basis,
                             const KernelParams& kernel_out) {
  const int n = basis.domain.n();
  kernel_out.validate(n);
  const Eigen::VectorXd span = basis.domain.span();

  Eigen::VectorXd weights(basis.M + 1);
  for (std::int64_t j = 0; j <= basis.M; ++j) {
    double mass = 1.0;
    for (int d = 0; d < n; ++d) {
      const double sl = kernel_out.lengthscales(d) / span(d);
      const double step = basis.dilation(d) * sl;
      const double center = basis.multi_indices(j, d) * step;
      mass *= gauss_interval_mass(center - 0.5 * step, center + 0.5 * step);
    }
    weights(j) = std::sqrt(mass);
  }
  return weights;
}

bool negligible_band(const SpectralBasis& basis, std::int64_t j) {
  require(j >= 1 && j <= basis.M, "negligible_band: band index out of range");
  return basis.band_weights(j) <= 1e-12 * basis.band_weights(0);
}

Eigen::VectorXd feature_map(const Eigen::VectorXd& x,
                            const SpectralBasis& basis) {
  const int n = basis.domain.n();
  require(x.size() == n,
          fmt::format("feature_map: point has dimension {}, expected {}",
                      x.size(), n));

  // Per-axis tables of cos/sin at integer multiples of the axis phase; each
  // feature's angle is assembled by complex multiplication across axes.
  const int m = basis.m_per_axis;
  Eigen::MatrixXd cos_tab(n, m);
  Eigen::MatrixXd sin_tab(n, m);
  const Eigen::VectorXd span = basis.domain.span();
  for (int d = 0; d < n; ++d) {
    const double theta =
        basis.dilation(d) * (x(d) - basis.domain.lower(d)) / span(d);
    for (int k = 0; k < m; ++k) {
      cos_tab(d, k) = std::cos(k * theta);
      sin_tab(d, k) = std::sin(k * theta);
    }
  }

  Eigen::VectorXd out(basis.dim());
  out(0) = basis.sigma_f * basis.band_weights(0);
  for (std::int64_t j = 1; j <= basis.M; ++j) {
    std::complex<double> acc(1.0, 0.0);
    for (int d = 0; d < n; ++d) {
      const int k = basis.multi_indices(j, d);
      acc *= std::complex<double>(cos_tab(d, k), sin_tab(d, k));
    }
    const double amp = kSqrt2 * basis.sigma_f * basis.band_weights(j);
    out(2 * j - 1) = amp * acc.real();
    out(2 * j) = amp * acc.imag();
  }
  return out;
}

double barrier_eval(const Eigen::VectorXd& b, const SpectralBasis& basis,
                    const Eigen::VectorXd& x) {
  require(b.size() == basis.dim(),
          fmt::format("barrier_eval: coefficient vector has size {}, basis "
                      "dimension is {}",
                      b.size(), basis.dim()));
  return feature_map(x, basis).dot(b);
}

Eigen::VectorXd barrier_on_lattice(const Eigen::VectorXd& b,
                                   const SpectralBasis& basis,
                                   const Lattice& lattice) {
  require(b.size() == basis.dim(),
          fmt::format("barrier_on_lattice: coefficient vector has size {}, "
                      "basis dimension is {}",
                      b.size(), basis.dim()));
  check_lattice_alignment(basis, lattice, "barrier_on_lattice");

  const int n = lattice.n();
  const int Q = lattice.Q;
  const std::int64_t total = lattice.size();
  std::vector<std::complex<double>> grid(static_cast<std::size_t>(total),
                                         {0.0, 0.0});

  grid[0] += basis.sigma_f * basis.band_weights(0) * b(0);
  Eigen::VectorXi mirror(n);
  for (std::int64_t j = 1; j <= basis.M; ++j) {
    const double amp = kSqrt2 * basis.sigma_f * basis.band_weights(j);
    const double alpha = amp * b(2 * j - 1);
    const double beta = amp * b(2 * j);
    const Eigen::VectorXi zeta = basis.multi_indices.row(j).transpose();
    for (int d = 0; d < n; ++d) {
      mirror(d) = (Q - zeta(d)) % Q;
    }
    grid[grid_index(zeta, Q)] += std::complex<double>(0.5 * alpha, -0.5 * beta);
    grid[grid_index(mirror, Q)] += std::complex<double>(0.5 * alpha, 0.5 * beta);
  }

  fft_backward(grid, std::vector<int>(n, Q));

  Eigen::VectorXd values(total);
  for (std::int64_t i = 0; i < total; ++i) {
    values(i) = grid[static_cast<std::size_t>(i)].real();
  }
  return values;
}

TransferMatrix project_fields(const Eigen::MatrixXd& fields,
                              const SpectralBasis& basis,
                              const Lattice& fit_lattice) {
  check_lattice_alignment(basis, fit_lattice, "project_fields");
  require(fields.rows() == fit_lattice.size(),
          fmt::format("project_fields: {} field samples per column, lattice "
                      "has {} points",
                      fields.rows(), fit_lattice.size()));
  require(basis.band_weights(0) > 0.0,
          "project_fields: zero-frequency band weight vanished");

  const int n = fit_lattice.n();
  const int Q = fit_lattice.Q;
  const std::int64_t total = fit_lattice.size();
  const std::int64_t nfields = fields.cols();
  const std::vector<int> dims(static_cast<std::size_t>(n), Q);

  TransferMatrix tm;
  tm.H.resize(basis.dim(), nfields);
  tm.field_samples = fields;
  tm.fit_lattice = fit_lattice;

  std::vector<std::complex<double>> grid(static_cast<std::size_t>(total));
  for (std::int64_t f = 0; f < nfields; ++f) {
    for (std::int64_t i = 0; i < total; ++i) {
      grid[static_cast<std::size_t>(i)] = {fields(i, f), 0.0};
    }
    fft_forward(grid, dims);

    Eigen::VectorXd h(basis.dim());
    h(0) = grid[0].real() / static_cast<double>(total) /
           (basis.sigma_f * basis.band_weights(0));
    for (std::int64_t j = 1; j <= basis.M; ++j) {
      if (negligible_band(basis, j)) {
        h(2 * j - 1) = 0.0;
        h(2 * j) = 0.0;
        continue;
      }
      const Eigen::VectorXi zeta = basis.multi_indices.row(j).transpose();
      const std::complex<double> bin = grid[grid_index(zeta, Q)];
      const double alpha = 2.0 * bin.real() / static_cast<double>(total);
      const double beta = -2.0 * bin.imag() / static_cast<double>(total);
      const double amp = kSqrt2 * basis.sigma_f * basis.band_weights(j);
      h(2 * j - 1) = alpha / amp;
      h(2 * j) = beta / amp;
    }
    tm.H.col(f) = h;
  }

  double residual = 0.0;
  for (std::int64_t f = 0; f < nfields; ++f) {
    const Eigen::VectorXd recon =
        barrier_on_lattice(tm.H.col(f), basis, fit_lattice);
    residual =
        std::max(residual, (recon - fields.col(f)).cwiseAbs().maxCoeff());
  }
  tm.residual = residual;
  return tm;
}

TransferMatrix project_cme(const CMEModel& model, const SpectralBasis& basis,
                           const Lattice& fit_lattice) {
  const int n = basis.domain.n();
  require(model.data.count() > 0, "project_cme: model holds no samples");
  require(model.data.dim() == n,
          fmt::format("project_cme: model dimension {} does not match basis "
                      "dimension {}",
                      model.data.dim(), n));
  check_lattice_alignment(basis, fit_lattice, "project_cme");

  const std::int64_t N = model.data.count();
  const std::int64_t dim = basis.dim();

  Eigen::MatrixXd phi_plus(N, dim);
  for (std::int64_t i = 0; i < N; ++i) {
    phi_plus.row(i) =
        feature_map(model.data.successors.row(i).transpose(), basis)
            .transpose();
  }
  const Eigen::MatrixXd V = model.solve(phi_plus);

  const std::int64_t total = fit_lattice.size();
  Eigen::MatrixXd fields(total, dim);
  parallel_for(total, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i) {
      const Eigen::VectorXd row = model.kernel_row(fit_lattice.point(i));
      fields.row(i).noalias() = row.transpose() * V;
    }
  });

  return project_fields(fields, basis, fit_lattice);
}

}  // namespace fcb
