#include "fcb/lp.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>

#include <fmt/format.h>

#include "fcb/common.hpp"

namespace fcb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_number(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  return fmt::format("{:.17g}", v);
}

// One canonical term list: zero coefficients omitted, an all-zero vector
// keeps a single explicit zero term so the line is never empty.
void append_terms(std::string& out, const double* coefs,
                  const std::vector<std::string>& names, std::int64_t n) {
  bool any = false;
  for (std::int64_t j = 0; j < n; ++j) {
    if (coefs[j] == 0.0) continue;
    any = true;
    out += coefs[j] < 0.0 ? " - " : " + ";
    out += format_number(std::abs(coefs[j]));
    out += ' ';
    out += names[static_cast<std::size_t>(j)];
  }
  if (!any) {
    out += " + 0 ";
    out += names.front();
  }
}

double parse_number(const std::string& token, std::int64_t line) {
  const char* begin = token.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  require(end == begin + token.size() && !token.empty(),
          fmt::format("line {}: '{}' is not a number", line, token));
  return v;
}

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && line[i] == ' ') ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ') ++j;
    if (j > i) tokens.push_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

}  // namespace

double* LPModel::add_row(std::string name, char relation, double rhs_value) {
  require(relation == '<' || relation == '>',
          "add_row: relation must be '<' or '>'");
  require(nvars > 0, "add_row: model has no variables");
  row_names.push_back(std::move(name));
  rel.push_back(relation);
  rhs.push_back(rhs_value);
  coefs.resize(coefs.size() + static_cast<std::size_t>(nvars), 0.0);
  return coefs.data() + coefs.size() - static_cast<std::size_t>(nvars);
}

void LPModel::validate() const {
  require(nvars > 0, "LPModel: no variables");
  require(static_cast<std::int64_t>(var_names.size()) == nvars &&
              lb.size() == nvars && ub.size() == nvars &&
              objective.size() == nvars,
          "LPModel: variable metadata sizes disagree");
  const std::int64_t m = rows();
  require(static_cast<std::int64_t>(rel.size()) == m &&
              static_cast<std::int64_t>(row_names.size()) == m &&
              static_cast<std::int64_t>(coefs.size()) == m * nvars,
          "LPModel: row storage sizes disagree");
  for (std::int64_t j = 0; j < nvars; ++j) {
    require(lb(j) <= ub(j),
            fmt::format("LPModel: variable '{}' has empty bound interval",
                        var_names[static_cast<std::size_t>(j)]));
    require(!std::isnan(lb(j)) && !std::isnan(ub(j)) &&
                std::isfinite(objective(j)),
            fmt::format("LPModel: variable '{}' has non-finite metadata",
                        var_names[static_cast<std::size_t>(j)]));
  }
  for (std::int64_t r = 0; r < m; ++r) {
    require(rel[static_cast<std::size_t>(r)] == '<' ||
                rel[static_cast<std::size_t>(r)] == '>',
            fmt::format("LPModel: row '{}' has an invalid relation",
                        row_names[static_cast<std::size_t>(r)]));
    require(std::isfinite(rhs[static_cast<std::size_t>(r)]),
            fmt::format("LPModel: row '{}' has a non-finite bound",
                        row_names[static_cast<std::size_t>(r)]));
    const double* c = row(r);
    for (std::int64_t j = 0; j < nvars; ++j) {
      require(std::isfinite(c[j]),
              fmt::format("LPModel: row '{}' has a non-finite coefficient",
                          row_names[static_cast<std::size_t>(r)]));
    }
  }
}

void ProblemSpec::validate() const {
  require(domain.n() >= 1, "problem: domain must have positive dimension");
  require(horizon >= 1, "problem: horizon must be at least 1");
  require(epsilon >= 0.0, "problem: ambiguity radius must be nonnegative");
  require(norm_cap > 0.0, "problem: norm cap must be positive");
  require(kappa > 0.0, "problem: kernel sup must be positive");
  require(inflation >= 0.0, "problem: inflation fraction must be nonnegative");
  require(split_buffer_spacings >= 0.0,
          "problem: split buffer must be nonnegative");
  Eigen::VectorXd lo, hi;
  x0.bounding_box(domain, lo, hi);
  require(lo.size() == domain.n(),
          "problem: initial region dimension does not match the domain");
  xu.bounding_box(domain, lo, hi);
  require(lo.size() == domain.n(),
          "problem: unsafe region dimension does not match the domain");
}

Region family_region(const ProblemSpec& spec, Family family) {
  switch (family) {
    case Family::x0:
      return inflate_region(spec.x0, spec.inflation);
    case Family::xu:
      return inflate_region(spec.xu, spec.inflation);
    case Family::x:
      return inflate_region(Region::box(spec.domain.lower, spec.domain.upper),
                            spec.inflation);
  }
  fail("family_region: unknown family");
}

FamilySplits split_families(const ProblemSpec& spec, const Lattice& lattice) {
  spec.validate();
  const Eigen::VectorXd buffer = lattice.step * spec.split_buffer_spacings;
  auto split = [&](Family family) {
    const Region grown =
        inflate_region_absolute(family_region(spec, family), buffer);
    return filter_lattice(lattice, grown, spec.domain);
  };
  FamilySplits splits;
  splits.x0 = split(Family::x0);
  splits.xu = split(Family::xu);
  splits.x = split(Family::x);
  return splits;
}

namespace {

void check_partition(const Partition& p, std::int64_t total,
                     const char* label) {
  require(static_cast<std::int64_t>(p.inside.size() + p.outside.size()) ==
              total,
          fmt::format("assemble: '{}' split does not cover the lattice",
                      label));
  std::vector<char> seen(static_cast<std::size_t>(total), 0);
  for (const auto* list : {&p.inside, &p.outside}) {
    for (std::int64_t idx : *list) {
      require(idx >= 0 && idx < total && !seen[static_cast<std::size_t>(idx)],
              fmt::format("assemble: '{}' split is not a partition of the "
                          "lattice",
                          label));
      seen[static_cast<std::size_t>(idx)] = 1;
    }
  }
}

}  // namespace

LPModel assemble(const ProblemSpec& spec, const SpectralBasis& basis,
                 const TransferMatrix& transfer, const Lattice& lattice,
                 const FamilySplits& splits,
                 const TighteningCoefficients& tight, double kushner_margin) {
  spec.validate();
  check_lattice_alignment(basis, lattice, "assemble");
  require(spec.domain.n() == basis.domain.n() &&
              (spec.domain.lower - basis.domain.lower).cwiseAbs().maxCoeff() ==
                  0.0 &&
              (spec.domain.upper - basis.domain.upper).cwiseAbs().maxCoeff() ==
                  0.0,
          "assemble: problem domain differs from the basis domain");
  const std::int64_t dimb = basis.dim();
  require(transfer.H.rows() == dimb && transfer.H.cols() == dimb,
          fmt::format("assemble: transfer matrix is {}x{}, expected {}x{}",
                      transfer.H.rows(), transfer.H.cols(), dimb, dimb));
  require(kushner_margin >= 0.0,
          "assemble: expectation margin must be nonnegative");
  const std::int64_t total = lattice.size();
  check_partition(splits.x0, total, "x0");
  check_partition(splits.xu, total, "xu");
  check_partition(splits.x, total, "x");
  require(!splits.x0.inside.empty(),
          "assemble: the initial region contains no lattice points at this "
          "resolution; the specification cannot be verified — raise the "
          "oversample factor");
  require(!splits.xu.inside.empty(),
          "assemble: the unsafe region contains no lattice points at this "
          "resolution; the specification cannot be verified — raise the "
          "oversample factor");
  require(!splits.x.inside.empty(),
          "assemble: the state domain contains no lattice points");
  tight.validate();
  require(tight.f_max == basis.f_max && tight.Q == lattice.Q &&
              tight.n == lattice.n(),
          "assemble: tightening coefficients were computed for a different "
          "lattice");
  auto A_of = [&](const char* key) {
    auto it = tight.A_map.find(key);
    require(it != tight.A_map.end(),
            fmt::format("assemble: tightening coefficients missing family "
                        "'{}'",
                        key));
    return it->second;
  };
  const double C = tight.C;
  const double A0 = A_of("x0");
  const double Au = A_of("xu");
  const double Ax = A_of("x");

  LPModel model;
  model.nvars = dimb + 18;
  model.var_names.reserve(static_cast<std::size_t>(model.nvars));
  for (std::int64_t j = 0; j < dimb; ++j) {
    model.var_names.push_back(fmt::format("b{}", j));
  }
  for (const char* name :
       {"c", "eta", "eta_hat", "b0_min", "c0_max", "c0_min", "gamma_hat",
        "bu_max", "cu_max", "cu_min", "delta_hat", "dk_min", "ck_max",
        "ck_min", "xi_hat", "bx_max", "cx_max", "cx_min"}) {
    model.var_names.push_back(name);
  }
  const std::int64_t vc = dimb;
  const std::int64_t veta = dimb + 1;
  const std::int64_t veta_hat = dimb + 2;
  const std::int64_t vb0_min = dimb + 3;
  const std::int64_t vc0_max = dimb + 4;
  const std::int64_t vc0_min = dimb + 5;
  const std::int64_t vgamma_hat = dimb + 6;
  const std::int64_t vbu_max = dimb + 7;
  const std::int64_t vcu_max = dimb + 8;
  const std::int64_t vcu_min = dimb + 9;
  const std::int64_t vdelta_hat = dimb + 10;
  const std::int64_t vdk_min = dimb + 11;
  const std::int64_t vck_max = dimb + 12;
  const std::int64_t vck_min = dimb + 13;
  const std::int64_t vxi_hat = dimb + 14;
  const std::int64_t vbx_max = dimb + 15;
  const std::int64_t vcx_max = dimb + 16;
  const std::int64_t vcx_min = dimb + 17;

  model.lb = Eigen::VectorXd::Constant(model.nvars, -kInf);
  model.ub = Eigen::VectorXd::Constant(model.nvars, kInf);
  model.objective = Eigen::VectorXd::Zero(model.nvars);
  model.lb(vc) = 0.0;
  model.lb(veta) = 0.0;
  model.ub(veta) = 1.0 - 1e-9;
  model.objective(vc) = static_cast<double>(spec.horizon);
  model.objective(veta) = 1.0;
  // Bands with no spectral mass contribute nothing to the feature map; pin
  // their coefficients so the solver never sees numerically dead columns.
  for (std::int64_t j = 1; j <= basis.M; ++j) {
    if (negligible_band(basis, j)) {
      model.lb(2 * j - 1) = model.ub(2 * j - 1) = 0.0;
      model.lb(2 * j) = model.ub(2 * j) = 0.0;
    }
  }
  // Out-split extreme variables of a family with an empty out-split appear
  // in no point row; pin them to keep the model free of dangling columns.
  auto pin_if_empty = [&](const Partition& p, std::int64_t vmax,
                          std::int64_t vmin) {
    if (p.outside.empty()) {
      model.lb(vmax) = model.ub(vmax) = 0.0;
      model.lb(vmin) = model.ub(vmin) = 0.0;
    }
  };
  pin_if_empty(splits.x0, vc0_max, vc0_min);
  pin_if_empty(splits.xu, vcu_max, vcu_min);
  if (splits.x.outside.empty()) {
    model.lb(vck_max) = model.ub(vck_max) = 0.0;
    model.lb(vck_min) = model.ub(vck_min) = 0.0;
    model.lb(vcx_max) = model.ub(vcx_max) = 0.0;
    model.lb(vcx_min) = model.ub(vcx_min) = 0.0;
  }

  // Field values at every lattice point: Phi for the barrier itself, Psi
  // for the expected one-step drift in feature coordinates.
  Eigen::MatrixXd Phi(total, dimb);
  parallel_for(total, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i) {
      Phi.row(i) = feature_map(lattice.point(i), basis).transpose();
    }
  });
  Eigen::MatrixXd Psi = Phi * transfer.H;
  Psi -= Phi;

  const std::int64_t nrows = 8 * total + 12;
  model.coefs.reserve(static_cast<std::size_t>(nrows * model.nvars));
  model.rhs.reserve(static_cast<std::size_t>(nrows));
  model.rel.reserve(static_cast<std::size_t>(nrows));
  model.row_names.reserve(static_cast<std::size_t>(nrows));

  auto field_row = [&](const char* prefix, std::int64_t idx,
                       const Eigen::MatrixXd& field, std::int64_t aux,
                       char relation) {
    double* r = model.add_row(fmt::format("{}_{}", prefix, idx), relation, 0.0);
    for (std::int64_t j = 0; j < dimb; ++j) r[j] = field(idx, j);
    r[aux] = -1.0;
  };

  for (std::int64_t idx : splits.x0.inside) {
    field_row("init", idx, Phi, veta_hat, '<');
    field_row("init_min", idx, Phi, vb0_min, '>');
  }
  for (std::int64_t idx : splits.x0.outside) {
    field_row("comp0", idx, Phi, vc0_max, '<');
    field_row("comp0_min", idx, Phi, vc0_min, '>');
  }
  for (std::int64_t idx : splits.xu.inside) {
    field_row("unsafe", idx, Phi, vgamma_hat, '>');
    field_row("unsafe_max", idx, Phi, vbu_max, '<');
  }
  for (std::int64_t idx : splits.xu.outside) {
    field_row("compU", idx, Phi, vcu_max, '<');
    field_row("compU_min", idx, Phi, vcu_min, '>');
  }
  for (std::int64_t idx : splits.x.inside) {
    field_row("kush", idx, Psi, vdelta_hat, '<');
    field_row("kush_min", idx, Psi, vdk_min, '>');
    field_row("pos", idx, Phi, vxi_hat, '>');
    field_row("pos_max", idx, Phi, vbx_max, '<');
  }
  for (std::int64_t idx : splits.x.outside) {
    field_row("compK", idx, Psi, vck_max, '<');
    field_row("compK_min", idx, Psi, vck_min, '>');
    field_row("compX", idx, Phi, vcx_max, '<');
    field_row("compX_min", idx, Phi, vcx_min, '>');
  }

  // Branch rows: the sound local bound, denominators cleared. For an upper
  // bound over a family with in-extremes (U, L) and out-extremes (OM, Om),
  // the three deviation branches of
  //   (U+L)/2 + C (U-L)/2 + A max(OM - (U+L)/2, (U+L)/2 - Om, 0) <= target
  // become, after multiplying by 2 and collecting terms:
  //   (1+C-A) U + (1-C-A) L + 2A OM <= 2 target
  //   (1+C+A) U + (1+A-C) L - 2A Om <= 2 target
  //   (1+C)   U + (1-C)   L         <= 2 target
  // and the mirrored forms for lower-bound families.
  auto branch_rows = [&](const char* prefix, char relation, std::int64_t vin_a,
                         std::int64_t vin_b, std::int64_t vout_max,
                         std::int64_t vout_min, double A,
                         std::int64_t vtarget, double target_coef,
                         double rhs_value) {
    // vin_a carries the in-extreme the bound moves toward (upper extreme for
    // upper-bound families, lower extreme for lower-bound ones); vin_b the
    // opposite one. Lower-bound families are the upper-bound algebra applied
    // to the negated field, which flips the sign A enters with.
    const double s = relation == '<' ? 1.0 : -1.0;
    double* r1 =
        model.add_row(fmt::format("{}_b1", prefix), relation, rhs_value);
    r1[vin_a] = 1.0 + C - s * A;
    r1[vin_b] = 1.0 - C - s * A;
    r1[vout_max] = s * 2.0 * A;
    if (vtarget >= 0) r1[vtarget] = target_coef;
    double* r2 =
        model.add_row(fmt::format("{}_b2", prefix), relation, rhs_value);
    r2[vin_a] = 1.0 + C + s * A;
    r2[vin_b] = 1.0 - C + s * A;
    r2[vout_min] = -s * 2.0 * A;
    if (vtarget >= 0) r2[vtarget] = target_coef;
    double* r3 =
        model.add_row(fmt::format("{}_b3", prefix), relation, rhs_value);
    r3[vin_a] = 1.0 + C;
    r3[vin_b] = 1.0 - C;
    if (vtarget >= 0) r3[vtarget] = target_coef;
  };

  const double drift_offset =
      spec.epsilon * spec.norm_cap * spec.kappa + kushner_margin;
  branch_rows("init", '<', veta_hat, vb0_min, vc0_max, vc0_min, A0, veta,
              -2.0, 0.0);
  branch_rows("unsafe", '>', vgamma_hat, vbu_max, vcu_max, vcu_min, Au, -1,
              0.0, 2.0);
  branch_rows("kush", '<', vdelta_hat, vdk_min, vck_max, vck_min, Ax, vc,
              -2.0, -2.0 * drift_offset);
  branch_rows("pos", '>', vxi_hat, vbx_max, vcx_max, vcx_min, Ax, -1, 0.0,
              0.0);

  model.validate();
  return model;
}

std::string export_lp(const LPModel& model) {
  model.validate();
  std::string out;
  out += "minimize\n";
  out += " obj:";
  append_terms(out, model.objective.data(), model.var_names, model.nvars);
  out += '\n';
  const std::int64_t m = model.rows();
  if (m > 0) {
    out += "subject to\n";
    for (std::int64_t r = 0; r < m; ++r) {
      out += ' ';
      out += model.row_names[static_cast<std::size_t>(r)];
      out += ':';
      append_terms(out, model.row(r), model.var_names, model.nvars);
      out += model.rel[static_cast<std::size_t>(r)] == '<' ? " <= " : " >= ";
      out += format_number(model.rhs[static_cast<std::size_t>(r)]);
      out += '\n';
    }
  }
  out += "bounds\n";
  for (std::int64_t j = 0; j < model.nvars; ++j) {
    const double lo = model.lb(j);
    const double hi = model.ub(j);
    const std::string& name = model.var_names[static_cast<std::size_t>(j)];
    out += ' ';
    if (lo == -kInf && hi == kInf) {
      out += name + " free";
    } else if (lo == hi) {
      out += name + " = " + format_number(lo);
    } else {
      out += format_number(lo) + " <= " + name + " <= " + format_number(hi);
    }
    out += '\n';
  }
  return out;
}

LPModel parse_lp(const std::string& text) {
  std::vector<std::string> lines;
  {
    std::size_t start = 0;
    while (start <= text.size()) {
      std::size_t nl = text.find('\n', start);
      if (nl == std::string::npos) {
        if (start < text.size()) lines.push_back(text.substr(start));
        break;
      }
      lines.push_back(text.substr(start, nl - start));
      start = nl + 1;
    }
  }
  require(lines.size() >= 3 && lines[0] == "minimize",
          "parse_lp: document must start with a 'minimize' section");

  // Bound lines both declare the variables (in order) and carry the bounds,
  // so they are processed first.
  std::size_t bounds_at = lines.size();
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i] == "bounds") {
      bounds_at = i;
      break;
    }
  }
  require(bounds_at < lines.size(), "parse_lp: missing 'bounds' section");

  LPModel model;
  std::vector<double> lbs, ubs;
  std::map<std::string, std::int64_t> index_of;
  for (std::size_t i = bounds_at + 1; i < lines.size(); ++i) {
    const std::int64_t lineno = static_cast<std::int64_t>(i) + 1;
    auto tokens = tokenize(lines[i]);
    require(!tokens.empty(), fmt::format("line {}: empty bound line", lineno));
    std::string name;
    double lo = 0.0, hi = 0.0;
    if (tokens.size() == 2 && tokens[1] == "free") {
      name = tokens[0];
      lo = -kInf;
      hi = kInf;
    } else if (tokens.size() == 3 && tokens[1] == "=") {
      name = tokens[0];
      lo = hi = parse_number(tokens[2], lineno);
    } else if (tokens.size() == 5 && tokens[1] == "<=" && tokens[3] == "<=") {
      name = tokens[2];
      lo = parse_number(tokens[0], lineno);
      hi = parse_number(tokens[4], lineno);
    } else {
      fail(fmt::format("line {}: unrecognized bound line", lineno));
    }
    require(index_of.find(name) == index_of.end(),
            fmt::format("line {}: variable '{}' bounded twice", lineno, name));
    index_of[name] = static_cast<std::int64_t>(model.var_names.size());
    model.var_names.push_back(name);
    lbs.push_back(lo);
    ubs.push_back(hi);
  }
  model.nvars = static_cast<std::int64_t>(model.var_names.size());
  require(model.nvars > 0, "parse_lp: no variables declared in bounds");
  model.lb = Eigen::Map<Eigen::VectorXd>(lbs.data(), model.nvars);
  model.ub = Eigen::Map<Eigen::VectorXd>(ubs.data(), model.nvars);
  model.objective = Eigen::VectorXd::Zero(model.nvars);

  // Terms: repeating (sign, magnitude, variable) triplets.
  auto parse_terms = [&](const std::vector<std::string>& tokens,
                         std::size_t from, std::size_t to, double* out,
                         std::int64_t lineno) {
    require((to - from) % 3 == 0 && to >= from,
            fmt::format("line {}: malformed term list", lineno));
    for (std::size_t k = from; k < to; k += 3) {
      require(tokens[k] == "+" || tokens[k] == "-",
              fmt::format("line {}: expected a sign, found '{}'", lineno,
                          tokens[k]));
      const double magnitude = parse_number(tokens[k + 1], lineno);
      auto it = index_of.find(tokens[k + 2]);
      require(it != index_of.end(),
              fmt::format("line {}: unknown variable '{}'", lineno,
                          tokens[k + 2]));
      out[it->second] += tokens[k] == "-" ? -magnitude : magnitude;
    }
  };

  {
    auto tokens = tokenize(lines[1]);
    require(!tokens.empty() && tokens[0] == "obj:",
            "line 2: expected the objective line");
    parse_terms(tokens, 1, tokens.size(), model.objective.data(), 2);
  }

  std::size_t row_from = 2;
  if (row_from < bounds_at) {
    require(lines[row_from] == "subject to",
            "line 3: expected 'subject to' or 'bounds'");
    ++row_from;
  }
  for (std::size_t i = row_from; i < bounds_at; ++i) {
    const std::int64_t lineno = static_cast<std::int64_t>(i) + 1;
    auto tokens = tokenize(lines[i]);
    require(tokens.size() >= 3,
            fmt::format("line {}: malformed constraint row", lineno));
    std::string name = tokens[0];
    require(!name.empty() && name.back() == ':',
            fmt::format("line {}: row name must end with ':'", lineno));
    name.pop_back();
    const std::string& relation = tokens[tokens.size() - 2];
    require(relation == "<=" || relation == ">=",
            fmt::format("line {}: expected '<=' or '>=', found '{}'", lineno,
                        relation));
    const double bound = parse_number(tokens.back(), lineno);
    double* r = model.add_row(std::move(name), relation == "<=" ? '<' : '>',
                              bound);
    parse_terms(tokens, 1, tokens.size() - 2, r, lineno);
  }

  model.validate();
  return model;
}

}  // namespace fcb
