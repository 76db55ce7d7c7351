#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "fcb/geometry.hpp"
#include "fcb/kernels.hpp"

namespace fcb {

// Truncated Fourier feature basis of the squared-exponential kernel over a
// hyperrectangular domain.
//
// Multi-indices zeta run over the nonnegative grid {0,...,m-1}^n in row-major
// order (last axis fastest) with the zero index listed first, so
// M = m^n - 1 nonzero indices and the feature dimension is 2M+1. The feature
// vector is ordered
//   [ sigma_f*w_0,
//     sqrt(2)*sigma_f*w_j*cos(omega_j . P(x)),
//     sqrt(2)*sigma_f*w_j*sin(omega_j . P(x)), ... ]  for j = 1..M,
// where omega_j = diag(zeta_j)*dilation, P is the affine normalization onto
// the unit cube, and w_j are the band weights below.
//
// Band weights: the kernel's spectral measure in normalized coordinates is a
// Gaussian with per-axis standard deviation 1/sl_i, where sl_i is the
// lengthscale divided by the domain span. Axis i of band j covers
// [omega_ji - dilation_i/2, omega_ji + dilation_i/2], and w_j^2 is the
// product over axes of the Gaussian mass of that interval. Only nonnegative
// index vectors are enumerated; the sign-symmetric mirror bands are
// accounted for by the factor 2 the cos/sin pair contributes to
// |phi(x)|^2 = sigma_f^2 (w_0^2 + 2*sum_j w_j^2), which keeps the captured
// mass a true lower bound of the total spectral mass. Bands whose center
// lies several standard deviations out get numerically zero weight; their
// coefficient pairs are pinned to zero downstream.
//
// The dilation per axis is 6/(sl_i*(2m-1)) in normalized units, so the m
// bands (with their mirrors) span +-3 standard deviations of the spectral
// measure: 99.73% of its mass in 1-D.
struct SpectralBasis {
  Eigen::MatrixXi multi_indices;  // (M+1) x n, row 0 is the zero index
  Eigen::VectorXd dilation;       // per axis, normalized units
  Eigen::VectorXd band_weights;   // (M+1), nonnegative roots
  int f_max = 0;                  // max entry over all indices = m-1
  int m_per_axis = 1;
  std::int64_t M = 0;             // count of nonzero indices
  Domain domain;
  double sigma_f = 1.0;

  std::int64_t dim() const { return 2 * M + 1; }
};

SpectralBasis build_basis(int m_per_axis, const KernelParams& kernel_out,
                          const Domain& domain);

// Recomputes the band-weight vector for an already-built index set.
Eigen::VectorXd band_weights(const SpectralBasis& basis,
                             const KernelParams& kernel_out);

// True when band j (1..M) carries numerically no spectral mass relative to
// the zero band. Such bands contribute nothing to the feature map; their
// coefficients are pinned to zero wherever coefficients are solved for, and
// projections assign them zero instead of dividing by the vanishing weight.
bool negligible_band(const SpectralBasis& basis, std::int64_t j);

// Errors out unless the lattice was built over this basis's periodic domain
// at a resolution meeting the Nyquist requirement. Every routine that maps
// between lattice values and coefficients calls this; it is public so that
// consumers assembling constraints can fail early with the same message.
void check_lattice_alignment(const SpectralBasis& basis,
                             const Lattice& lattice, const char* who);

Eigen::VectorXd feature_map(const Eigen::VectorXd& x,
                            const SpectralBasis& basis);

double barrier_eval(const Eigen::VectorXd& b, const SpectralBasis& basis,
                    const Eigen::VectorXd& x);

// Batch evaluation of phi(.)^T b at every lattice point via an inverse FFT
// of the zero-padded coefficient grid. Output is indexed like the lattice.
Eigen::VectorXd barrier_on_lattice(const Eigen::VectorXd& b,
                                   const SpectralBasis& basis,
                                   const Lattice& lattice);

// Linear map H with phi(x)^T H e_j reproducing, up to truncation, the j-th
// successor-feature CME field on the fitting lattice. `residual` is the max
// absolute truncation error over that lattice and all fields; it is always
// reported, never dropped. `field_samples` keeps the raw field values (one
// column per feature) so audits can re-measure the truncation gap for any
// coefficient vector without touching the kernel model again.
struct TransferMatrix {
  Eigen::MatrixXd H;
  double residual = 0.0;
  Eigen::MatrixXd field_samples;
  Lattice fit_lattice;
};

// Projects arbitrary scalar fields sampled on a lattice onto the basis:
// fields.col(j) holds g_j at every lattice point. Requires the lattice
// resolution to satisfy the Nyquist bound Q >= 2*f_max+1.
TransferMatrix project_fields(const Eigen::MatrixXd& fields,
                              const SpectralBasis& basis,
                              const Lattice& fit_lattice);

// Samples the empirical-CME surrogate fields
//   g_j(x) = w(x)^T [phi_j(successor_i)]_i
// on the fitting lattice and projects them. The matrix G of samples is
// computed as K_cross * (K + N*lambda*I)^{-1} * Phi_plus, one linear solve
// for all fields.
TransferMatrix project_cme(const CMEModel& model, const SpectralBasis& basis,
                           const Lattice& fit_lattice);

}  // namespace fcb
