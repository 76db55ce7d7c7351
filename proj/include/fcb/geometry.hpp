#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "fcb/common.hpp"

namespace fcb {

struct SpectralBasis;  // spectral.hpp

// Hyperrectangular state space. Also owns the affine normalization P that
// maps it onto the unit hypercube; all spectral phases are computed in the
// normalized coordinates.
struct Domain {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static Domain make(Eigen::VectorXd lo, Eigen::VectorXd hi);

  int n() const { return static_cast<int>(lower.size()); }
  Eigen::VectorXd span() const { return upper - lower; }
  bool contains(const Eigen::VectorXd& x) const;
};

// P(x): componentwise (x - lower) / (upper - lower). Points outside the
// domain map outside [0,1]^n; callers decide what that means.
Eigen::VectorXd affine_map(const Eigen::VectorXd& x, const Domain& d);
Eigen::VectorXd affine_map_inverse(const Eigen::VectorXd& u, const Domain& d);

// Axis-aligned region algebra: boxes, balls, finite unions, and
// complement-within-domain. Membership is exact and total on the domain.
struct Region {
  enum class Kind { box, ball, union_of, complement };

  Kind kind = Kind::box;
  Eigen::VectorXd lower, upper;    // box
  Eigen::VectorXd center;          // ball
  double radius = 0.0;             // ball
  std::vector<Region> members;     // union_of (list) / complement (single)

  static Region box(Eigen::VectorXd lo, Eigen::VectorXd hi);
  static Region ball(Eigen::VectorXd c, double r);
  static Region union_of(std::vector<Region> rs);
  static Region complement_of(Region inner);

  bool contains(const Eigen::VectorXd& x, const Domain& domain) const;

  // Axis-aligned bounding box of the region (complement falls back to the
  // domain box). Used by the bound-coefficient search to restrict candidates.
  void bounding_box(const Domain& domain, Eigen::VectorXd& lo,
                    Eigen::VectorXd& hi) const;

  std::string to_json() const;
  static Region from_json(const std::string& text);
  static Region load_json(const std::string& path);
};

// Relative inflation: box half-widths and ball radii grow by `fraction`
// (e.g. 0.02 turns the box [0,1] into [-0.01, 1.01]); unions inflate
// memberwise, complements deflate the inner region by the same fraction.
// No clamping is applied here: constraints are only ever imposed on lattice
// points, all of which lie in the periodic domain, so membership beyond the
// domain is never queried.
Region inflate_region(const Region& region, double fraction);

// Absolute per-axis inflation by `delta` state units (balls grow by the
// largest component). Used to buffer lattice splits by a number of lattice
// spacings; same complement/union semantics as inflate_region.
Region inflate_region_absolute(const Region& region,
                               const Eigen::VectorXd& delta);

// Smallest domain on which the feature map is periodic: each axis of the
// unit cube scaled by 2*pi/dilation[i], then mapped back through P^-1.
// No containment check is applied; the certification pipeline validates
// that the result covers the state domain.
Domain periodic_domain(const Domain& domain, const Eigen::VectorXd& dilation);

// Uniform sampling lattice over the periodic domain, Q points per axis,
// half-open (the periodic endpoint is not duplicated). Linear indices are
// row-major over the multi-index (last axis varies fastest), matching the
// layout the FFT routines expect, so coefficient extraction is
// reproducible bit-for-bit.
struct Lattice {
  Domain tilde;             // periodic domain the lattice tiles
  int Q = 0;                // points per axis
  Eigen::VectorXd origin;   // = tilde.lower
  Eigen::VectorXd step;     // state units per lattice step, per axis

  int n() const { return static_cast<int>(origin.size()); }
  std::int64_t size() const;
  Eigen::VectorXd point(std::int64_t index) const;
  void decode(std::int64_t index, int* multi) const;
  std::int64_t encode(const int* multi) const;
};

Lattice build_lattice(const SpectralBasis& basis, int oversample,
                      double memory_budget_mb = 512.0);

struct Partition {
  std::vector<std::int64_t> inside;
  std::vector<std::int64_t> outside;
};

Partition filter_lattice(const Lattice& lattice, const Region& region,
                         const Domain& domain);

}  // namespace fcb
