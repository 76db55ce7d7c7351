#include "fcb/geometry.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "fcb/spectral.hpp"

namespace fcb {

using nlohmann::json;

Domain Domain::make(Eigen::VectorXd lo, Eigen::VectorXd hi) {
  require(lo.size() == hi.size(), "Domain: lower/upper dimension mismatch");
  require(lo.size() >= 1, "Domain: dimension must be at least 1");
  for (int i = 0; i < lo.size(); ++i) {
    require(lo[i] < hi[i],
            fmt::format("Domain: lower[{}]={} must be < upper[{}]={}", i,
                        lo[i], i, hi[i]));
    require(std::isfinite(lo[i]) && std::isfinite(hi[i]),
            "Domain: bounds must be finite");
  }
  return Domain{std::move(lo), std::move(hi)};
}

bool Domain::contains(const Eigen::VectorXd& x) const {
  for (int i = 0; i < lower.size(); ++i)
    if (x[i] < lower[i] || x[i] > upper[i]) return false;
  return true;
}

Eigen::VectorXd affine_map(const Eigen::VectorXd& x, const Domain& d) {
  return (x - d.lower).cwiseQuotient(d.span());
}

Eigen::VectorXd affine_map_inverse(const Eigen::VectorXd& u, const Domain& d) {
  return d.lower + u.cwiseProduct(d.span());
}

Region Region::box(Eigen::VectorXd lo, Eigen::VectorXd hi) {
  require(lo.size() == hi.size(), "Region::box: dimension mismatch");
  for (int i = 0; i < lo.size(); ++i)
    require(lo[i] < hi[i], fmt::format("Region::box: empty extent on axis {} "
                                       "(lower={}, upper={})",
                                       i, lo[i], hi[i]));
  Region r;
  r.kind = Kind::box;
  r.lower = std::move(lo);
  r.upper = std::move(hi);
  return r;
}

Region Region::ball(Eigen::VectorXd c, double rad) {
  require(rad > 0.0, "Region::ball: radius must be positive");
  Region r;
  r.kind = Kind::ball;
  r.center = std::move(c);
  r.radius = rad;
  return r;
}

Region Region::union_of(std::vector<Region> rs) {
  require(!rs.empty(), "Region::union_of: empty member list");
  Region r;
  r.kind = Kind::union_of;
  r.members = std::move(rs);
  return r;
}

Region Region::complement_of(Region inner) {
  Region r;
  r.kind = Kind::complement;
  r.members.push_back(std::move(inner));
  return r;
}

bool Region::contains(const Eigen::VectorXd& x, const Domain& domain) const {
  switch (kind) {
    case Kind::box:
      for (int i = 0; i < lower.size(); ++i)
        if (x[i] < lower[i] || x[i] > upper[i]) return false;
      return true;
    case Kind::ball:
      return (x - center).norm() <= radius;
    case Kind::union_of:
      for (const auto& m : members)
        if (m.contains(x, domain)) return true;
      return false;
    case Kind::complement:
      return domain.contains(x) && !members.front().contains(x, domain);
  }
  return false;
}

void Region::bounding_box(const Domain& domain, Eigen::VectorXd& lo,
                          Eigen::VectorXd& hi) const {
  switch (kind) {
    case Kind::box:
      lo = lower;
      hi = upper;
      return;
    case Kind::ball:
      lo = center.array() - radius;
      hi = center.array() + radius;
      return;
    case Kind::union_of: {
      members.front().bounding_box(domain, lo, hi);
      Eigen::VectorXd mlo, mhi;
      for (std::size_t k = 1; k < members.size(); ++k) {
        members[k].bounding_box(domain, mlo, mhi);
        lo = lo.cwiseMin(mlo);
        hi = hi.cwiseMax(mhi);
      }
      return;
    }
    case Kind::complement:
      lo = domain.lower;
      hi = domain.upper;
      return;
  }
}

namespace {

json region_to_json_obj(const Region& r) {
  json j;
  switch (r.kind) {
    case Region::Kind::box:
      j["type"] = "box";
      j["lower"] = std::vector<double>(r.lower.data(),
                                       r.lower.data() + r.lower.size());
      j["upper"] = std::vector<double>(r.upper.data(),
                                       r.upper.data() + r.upper.size());
      break;
    case Region::Kind::ball:
      j["type"] = "ball";
      j["center"] = std::vector<double>(r.center.data(),
                                        r.center.data() + r.center.size());
      j["radius"] = r.radius;
      break;
    case Region::Kind::union_of: {
      j["type"] = "union";
      json ms = json::array();
      for (const auto& m : r.members) ms.push_back(region_to_json_obj(m));
      j["members"] = ms;
      break;
    }
    case Region::Kind::complement:
      j["type"] = "complement";
      j["inner"] = region_to_json_obj(r.members.front());
      break;
  }
  return j;
}

Eigen::VectorXd vec_from_json(const json& j, const std::string& what) {
  require(j.is_array() && !j.empty(), "region json: '" + what +
                                          "' must be a nonempty array");
  Eigen::VectorXd v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i];
  return v;
}

Region region_from_json_obj(const json& j) {
  require(j.is_object() && j.contains("type"),
          "region json: expected an object with a 'type' field");
  std::string type = j.at("type");
  if (type == "box")
    return Region::box(vec_from_json(j.at("lower"), "lower"),
                       vec_from_json(j.at("upper"), "upper"));
  if (type == "ball")
    return Region::ball(vec_from_json(j.at("center"), "center"),
                        j.at("radius").get<double>());
  if (type == "union") {
    std::vector<Region> ms;
    for (const auto& m : j.at("members")) ms.push_back(region_from_json_obj(m));
    return Region::union_of(std::move(ms));
  }
  if (type == "complement")
    return Region::complement_of(region_from_json_obj(j.at("inner")));
  fail("region json: unknown type '" + type +
       "' (expected box|ball|union|complement)");
}

}  // namespace

std::string Region::to_json() const { return region_to_json_obj(*this).dump(2); }

Region Region::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(std::string("region json: parse failure: ") + e.what());
  }
  return region_from_json_obj(j);
}

Region Region::load_json(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "region json: cannot open file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return from_json(text);
}

namespace {

Region scale_region(const Region& region, double grow_fraction) {
  Region out = region;
  switch (region.kind) {
    case Region::Kind::box: {
      Eigen::VectorXd c = 0.5 * (region.lower + region.upper);
      Eigen::VectorXd hw = 0.5 * (region.upper - region.lower);
      hw *= (1.0 + grow_fraction);
      hw = hw.cwiseMax(0.0);
      out.lower = c - hw;
      out.upper = c + hw;
      break;
    }
    case Region::Kind::ball:
      out.radius = std::max(0.0, region.radius * (1.0 + grow_fraction));
      break;
    case Region::Kind::union_of:
      for (auto& m : out.members) m = scale_region(m, grow_fraction);
      break;
    case Region::Kind::complement:
      // Growing a complement means shrinking what it excludes.
      out.members.front() = scale_region(region.members.front(),
                                         -grow_fraction);
      break;
  }
  return out;
}

Region shift_region(const Region& region, const Eigen::VectorXd& delta,
                    double sign) {
  Region out = region;
  switch (region.kind) {
    case Region::Kind::box:
      out.lower = region.lower - sign * delta;
      out.upper = region.upper + sign * delta;
      for (int i = 0; i < out.lower.size(); ++i)
        if (out.lower[i] > out.upper[i])
          out.lower[i] = out.upper[i] = 0.5 * (out.lower[i] + out.upper[i]);
      break;
    case Region::Kind::ball:
      out.radius = std::max(1e-300, region.radius + sign * delta.maxCoeff());
      break;
    case Region::Kind::union_of:
      for (auto& m : out.members) m = shift_region(m, delta, sign);
      break;
    case Region::Kind::complement:
      out.members.front() = shift_region(region.members.front(), delta, -sign);
      break;
  }
  return out;
}

}  // namespace

Region inflate_region(const Region& region, double fraction) {
  require(fraction >= 0.0, "inflate_region: fraction must be nonnegative");
  if (fraction == 0.0) return region;
  return scale_region(region, fraction);
}

Region inflate_region_absolute(const Region& region,
                               const Eigen::VectorXd& delta) {
  for (int i = 0; i < delta.size(); ++i)
    require(delta[i] >= 0.0, "inflate_region_absolute: negative delta");
  return shift_region(region, delta, +1.0);
}

Domain periodic_domain(const Domain& domain, const Eigen::VectorXd& dilation) {
  require(dilation.size() == domain.lower.size(),
          "periodic_domain: dilation dimension mismatch");
  Eigen::VectorXd u(dilation.size());
  for (int i = 0; i < dilation.size(); ++i) {
    require(dilation[i] > 0.0,
            fmt::format("periodic_domain: dilation[{}] must be positive", i));
    u[i] = 2.0 * M_PI / dilation[i];
  }
  Domain out;
  out.lower = domain.lower;
  out.upper = affine_map_inverse(u, domain);
  return out;
}

std::int64_t Lattice::size() const {
  std::int64_t s = 1;
  for (int i = 0; i < n(); ++i) s *= Q;
  return s;
}

Eigen::VectorXd Lattice::point(std::int64_t index) const {
  Eigen::VectorXd x(n());
  for (int d = n() - 1; d >= 0; --d) {
    std::int64_t l = index % Q;
    index /= Q;
    x[d] = origin[d] + step[d] * static_cast<double>(l);
  }
  return x;
}

void Lattice::decode(std::int64_t index, int* multi) const {
  for (int d = n() - 1; d >= 0; --d) {
    multi[d] = static_cast<int>(index % Q);
    index /= Q;
  }
}

std::int64_t Lattice::encode(const int* multi) const {
  std::int64_t idx = 0;
  for (int d = 0; d < n(); ++d) idx = idx * Q + multi[d];
  return idx;
}

Lattice build_lattice(const SpectralBasis& basis, int oversample,
                      double memory_budget_mb) {
  require(oversample >= 1, "build_lattice: oversample must be >= 1");
  int Q = oversample * (2 * basis.f_max + 1);
  int n = basis.domain.n();
  double points = std::pow(static_cast<double>(Q), n);
  double bytes = points * static_cast<double>(n + 1) * 8.0;
  require(bytes <= memory_budget_mb * 1024.0 * 1024.0,
          fmt::format("build_lattice: {}^{} = {:.3g} points exceeds the "
                      "memory budget of {} MiB; lower the oversample factor "
                      "or raise the budget",
                      Q, n, points, memory_budget_mb));
  Lattice lat;
  lat.tilde = periodic_domain(basis.domain, basis.dilation);
  lat.Q = Q;
  lat.origin = lat.tilde.lower;
  lat.step = lat.tilde.span() / static_cast<double>(Q);
  return lat;
}

Partition filter_lattice(const Lattice& lattice, const Region& region,
                         const Domain& domain) {
  Partition p;
  std::int64_t total = lattice.size();
  p.inside.reserve(static_cast<std::size_t>(total) / 4);
  p.outside.reserve(static_cast<std::size_t>(total) / 2);
  for (std::int64_t i = 0; i < total; ++i) {
    if (region.contains(lattice.point(i), domain))
      p.inside.push_back(i);
    else
      p.outside.push_back(i);
  }
  return p;
}

}  // namespace fcb
