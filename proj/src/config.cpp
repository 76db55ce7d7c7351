#include "fcb/config.hpp"

#include <fmt/format.h>

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fcb/common.hpp"

namespace fcb {

namespace {

const std::set<std::string> kSections = {"system", "kernel", "basis",
                                         "problem", "solver", "run"};

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

struct Entry {
  std::string value;
  int line = 0;
  mutable bool used = false;
};

// Sectioned key-value store with line-numbered diagnostics. Every entry must
// be consumed by a typed getter; finish() rejects whatever is left over.
class ConfigMap {
 public:
  ConfigMap(const std::string& text, std::string origin)
      : origin_(std::move(origin)) {
    std::istringstream stream(text);
    std::string raw;
    int line = 0;
    std::string section;
    while (std::getline(stream, raw)) {
      ++line;
      const auto hash = raw.find('#');
      if (hash != std::string::npos) raw.erase(hash);
      const std::string s = trim(raw);
      if (s.empty()) continue;
      if (s.front() == '[') {
        if (s.back() != ']') die(line, "unterminated section header");
        section = trim(s.substr(1, s.size() - 2));
        if (!kSections.count(section)) {
          die(line, fmt::format("unknown section [{}]", section));
        }
        continue;
      }
      const auto eq = s.find('=');
      if (eq == std::string::npos) {
        die(line, "expected 'key = value' or a [section] header");
      }
      const std::string key = trim(s.substr(0, eq));
      const std::string value = trim(s.substr(eq + 1));
      if (key.empty()) die(line, "empty key");
      if (section.empty()) die(line, "key appears before any [section]");
      const std::string path = section + "." + key;
      if (entries_.count(path)) {
        die(line, fmt::format("duplicate key '{}' in [{}] (first on line {})",
                              key, section, entries_[path].line));
      }
      entries_[path] = Entry{value, line, false};
    }
  }

  [[noreturn]] void die(int line, const std::string& msg) const {
    fail(fmt::format("config error ({}:{}): {}", origin_, line, msg));
  }

  [[noreturn]] void die_missing(const std::string& section,
                                const std::string& key) const {
    fail(fmt::format("config error ({}): [{}] {} is required", origin_,
                     section, key));
  }

  const Entry* take(const std::string& section, const std::string& key) const {
    const auto it = entries_.find(section + "." + key);
    if (it == entries_.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }

  double get_double(const std::string& section, const std::string& key,
                    double fallback) const {
    const Entry* e = take(section, key);
    return e == nullptr ? fallback : parse_double(*e);
  }

  std::int64_t get_int(const std::string& section, const std::string& key,
                       std::int64_t fallback) const {
    const Entry* e = take(section, key);
    return e == nullptr ? fallback : parse_int(*e);
  }

  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t fallback) const {
    const Entry* e = take(section, key);
    if (e == nullptr) return fallback;
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(e->value.c_str(), &end, 10);
    if (errno != 0 || end == e->value.c_str() || *end != '\0' ||
        e->value.find('-') != std::string::npos) {
      die(e->line, fmt::format("'{}' is not an unsigned integer", e->value));
    }
    return static_cast<std::uint64_t>(v);
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const {
    const Entry* e = take(section, key);
    return e == nullptr ? fallback : e->value;
  }

  double parse_double(const Entry& e) const {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(e.value.c_str(), &end);
    if (errno != 0 || end == e.value.c_str() || *end != '\0') {
      die(e.line, fmt::format("'{}' is not a number", e.value));
    }
    return v;
  }

  std::int64_t parse_int(const Entry& e) const {
    errno = 0;
    char* end = nullptr;
    const long long v = std::strtoll(e.value.c_str(), &end, 10);
    if (errno != 0 || end == e.value.c_str() || *end != '\0') {
      die(e.line, fmt::format("'{}' is not an integer", e.value));
    }
    return static_cast<std::int64_t>(v);
  }

  Eigen::VectorXd parse_vector(const Entry& e) const {
    std::istringstream stream(e.value);
    std::vector<double> values;
    std::string token;
    while (stream >> token) {
      errno = 0;
      char* end = nullptr;
      const double v = std::strtod(token.c_str(), &end);
      if (errno != 0 || end == token.c_str() || *end != '\0') {
        die(e.line, fmt::format("'{}' is not a number", token));
      }
      values.push_back(v);
    }
    if (values.empty()) die(e.line, "expected a list of numbers");
    Eigen::VectorXd out(static_cast<std::int64_t>(values.size()));
    for (std::size_t i = 0; i < values.size(); ++i) {
      out(static_cast<std::int64_t>(i)) = values[i];
    }
    return out;
  }

  void finish() const {
    const Entry* first = nullptr;
    std::string path;
    for (const auto& [p, e] : entries_) {
      if (e.used) continue;
      if (first == nullptr || e.line < first->line) {
        first = &e;
        path = p;
      }
    }
    if (first != nullptr) {
      const auto dot = path.find('.');
      die(first->line, fmt::format("unknown key '{}' in [{}]",
                                   path.substr(dot + 1), path.substr(0, dot)));
    }
  }

  const std::string& origin() const { return origin_; }

 private:
  std::map<std::string, Entry> entries_;
  std::string origin_;
};

std::string origin_directory(const std::string& origin) {
  const auto slash = origin.find_last_of('/');
  return slash == std::string::npos ? std::string(".")
                                    : origin.substr(0, slash);
}

std::string resolve_path(const std::string& origin, const std::string& rel) {
  if (!rel.empty() && rel.front() == '/') return rel;
  return origin_directory(origin) + "/" + rel;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open '{}'", path);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

Region parse_region(const ConfigMap& map, const Entry& e) {
  try {
    if (!e.value.empty() && e.value.front() == '@') {
      return Region::from_json(
          read_file(resolve_path(map.origin(), e.value.substr(1))));
    }
    if (!e.value.empty() && e.value.front() == '{') {
      return Region::from_json(e.value);
    }
  } catch (const Error& err) {
    map.die(e.line, err.what());
  }
  map.die(e.line, "a region is inline JSON ('{...}') or @file.json");
}

}  // namespace

KernelParams RunConfig::kernel_in(const SampleSet& data) const {
  KernelParams k;
  k.amplitude = amplitude_in;
  k.lengthscales =
      lengthscales_in.has_value() ? *lengthscales_in
                                  : median_heuristic(data.states);
  k.validate(problem.domain.n());
  return k;
}

KernelParams RunConfig::kernel_out(const SampleSet& data) const {
  KernelParams k;
  k.amplitude = amplitude_out;
  k.lengthscales =
      lengthscales_out.has_value() ? *lengthscales_out
                                   : median_heuristic(data.states);
  k.validate(problem.domain.n());
  return k;
}

SynthesisInputs RunConfig::inputs(const SampleSet& data) const {
  require(has_regions,
          "config error: [problem] x0 and xu are required to certify");
  SynthesisInputs in;
  in.problem = problem;
  in.kernel_in = kernel_in(data);
  in.kernel_out = kernel_out(data);
  in.lambda = lambda;
  in.data = data;
  in.seed = seed;
  in.config_hash = config_hash;
  return in;
}

RunConfig parse_config_text(const std::string& text,
                            const std::string& origin) {
  const ConfigMap map(text, origin);
  RunConfig cfg;
  cfg.config_hash = sha256_hex(text);

  // --- [system] -----------------------------------------------------------
  const Entry* kind_entry = map.take("system", "kind");
  if (kind_entry == nullptr) map.die_missing("system", "kind");
  SystemKind kind;
  try {
    kind = system_kind_from(kind_entry->value);
  } catch (const Error& err) {
    map.die(kind_entry->line, err.what());
  }
  switch (kind) {
    case SystemKind::barr3:
      cfg.system = SystemSpec::barr3_default();
      break;
    case SystemKind::dubins:
      cfg.system = SystemSpec::dubins_default();
      break;
    case SystemKind::user_map:
      cfg.system = SystemSpec{};
      cfg.system.kind = SystemKind::user_map;
      cfg.system.policy.clear();
      break;
  }
  cfg.system.tau = map.get_double("system", "tau", cfg.system.tau);
  cfg.system.velocity =
      map.get_double("system", "velocity", cfg.system.velocity);
  if (const Entry* e = map.take("system", "noise_std")) {
    cfg.system.noise_std = map.parse_vector(*e);
  }
  cfg.system.policy = map.get_string("system", "policy", cfg.system.policy);
  cfg.system.command = map.get_string("system", "command", cfg.system.command);
  if (const Entry* e = map.take("system", "controller")) {
    try {
      cfg.system.controller = Mlp::load_json(resolve_path(origin, e->value));
    } catch (const Error& err) {
      map.die(e->line, err.what());
    }
  }
  cfg.samples = map.get_int("system", "samples", cfg.samples);
  require(cfg.samples >= 1, "config error ({}): [system] samples must be >= 1",
          origin);

  // --- [problem]: domain first, everything downstream needs it -------------
  const Entry* lower_entry = map.take("problem", "lower");
  const Entry* upper_entry = map.take("problem", "upper");
  if ((lower_entry == nullptr) != (upper_entry == nullptr)) {
    const Entry* present = lower_entry ? lower_entry : upper_entry;
    map.die(present->line, "lower and upper must be given together");
  }
  if (lower_entry != nullptr) {
    try {
      cfg.system.domain = Domain::make(map.parse_vector(*lower_entry),
                                       map.parse_vector(*upper_entry));
    } catch (const Error& err) {
      map.die(lower_entry->line, err.what());
    }
  } else {
    require(kind != SystemKind::user_map,
            "config error ({}): [problem] lower/upper are required for "
            "user_map systems",
            origin);
  }
  cfg.problem.domain = cfg.system.domain;

  const Entry* x0_entry = map.take("problem", "x0");
  const Entry* xu_entry = map.take("problem", "xu");
  if ((x0_entry == nullptr) != (xu_entry == nullptr)) {
    const Entry* present = x0_entry ? x0_entry : xu_entry;
    map.die(present->line, "x0 and xu must be given together");
  }
  if (x0_entry != nullptr) {
    cfg.problem.x0 = parse_region(map, *x0_entry);
    cfg.problem.xu = parse_region(map, *xu_entry);
    cfg.has_regions = true;
  }
  cfg.problem.horizon = static_cast<int>(
      map.get_int("problem", "horizon", cfg.problem.horizon));
  cfg.problem.epsilon =
      map.get_double("problem", "epsilon", cfg.problem.epsilon);
  cfg.problem.norm_cap =
      map.get_double("problem", "norm_cap", cfg.problem.norm_cap);
  cfg.problem.inflation =
      map.get_double("problem", "inflation", cfg.problem.inflation);
  cfg.problem.split_buffer_spacings =
      map.get_double("problem", "split_buffer_spacings",
                     cfg.problem.split_buffer_spacings);

  // --- [kernel] -------------------------------------------------------------
  cfg.amplitude_in = map.get_double("kernel", "amplitude_in", 1.0);
  cfg.amplitude_out = map.get_double("kernel", "amplitude_out", 1.0);
  if (const Entry* e = map.take("kernel", "lengthscales_in")) {
    if (trim(e->value) != "auto") cfg.lengthscales_in = map.parse_vector(*e);
  }
  if (const Entry* e = map.take("kernel", "lengthscales_out")) {
    if (trim(e->value) != "auto") cfg.lengthscales_out = map.parse_vector(*e);
  }
  cfg.lambda = map.get_double("kernel", "lambda", cfg.lambda);

  // --- [basis] ---------------------------------------------------------------
  cfg.settings.m_per_axis = static_cast<int>(
      map.get_int("basis", "m_per_axis", cfg.settings.m_per_axis));
  cfg.settings.oversample = static_cast<int>(
      map.get_int("basis", "oversample", cfg.settings.oversample));
  cfg.settings.hfit_oversample = static_cast<int>(
      map.get_int("basis", "hfit_oversample", cfg.settings.hfit_oversample));
  cfg.settings.memory_budget_mb = static_cast<int>(
      map.get_int("basis", "memory_budget_mb", cfg.settings.memory_budget_mb));

  // --- [solver] ---------------------------------------------------------------
  cfg.settings.lp_tolerance =
      map.get_double("solver", "tolerance", cfg.settings.lp_tolerance);
  cfg.settings.iteration_cap =
      map.get_int("solver", "iteration_cap", cfg.settings.iteration_cap);
  cfg.settings.backend =
      map.get_string("solver", "backend", cfg.settings.backend);
  cfg.settings.bound_refine = static_cast<int>(
      map.get_int("solver", "bound_refine", cfg.settings.bound_refine));
  cfg.settings.margin_iters = static_cast<int>(
      map.get_int("solver", "margin_iters", cfg.settings.margin_iters));
  cfg.settings.margin_headroom = map.get_double(
      "solver", "margin_headroom", cfg.settings.margin_headroom);
  cfg.settings.norm_retries = static_cast<int>(
      map.get_int("solver", "norm_retries", cfg.settings.norm_retries));

  // --- [run] -------------------------------------------------------------------
  cfg.seed = map.get_u64("run", "seed", cfg.seed);
  if (const Entry* e = map.take("run", "start")) {
    cfg.start = map.parse_vector(*e);
  }
  cfg.mc_grid_per_axis = static_cast<int>(
      map.get_int("run", "mc_grid_per_axis", cfg.mc_grid_per_axis));
  cfg.audit.factor =
      static_cast<int>(map.get_int("run", "audit_factor", cfg.audit.factor));
  cfg.audit.tolerance =
      map.get_double("run", "audit_tolerance", cfg.audit.tolerance);
  cfg.audit.memory_budget_mb = static_cast<int>(
      map.get_int("run", "audit_memory_mb", cfg.audit.memory_budget_mb));
  cfg.export_grid =
      static_cast<int>(map.get_int("run", "export_grid", cfg.export_grid));
  if (const Entry* e = map.take("run", "export_slice")) {
    std::istringstream stream(e->value);
    std::string token;
    while (stream >> token) {
      const auto colon = token.find(':');
      if (colon == std::string::npos || colon == 0 ||
          colon + 1 == token.size()) {
        map.die(e->line, fmt::format("'{}' is not an axis:value pair", token));
      }
      errno = 0;
      char* end = nullptr;
      const long axis = std::strtol(token.c_str(), &end, 10);
      if (errno != 0 || end != token.c_str() + colon || axis < 0) {
        map.die(e->line, fmt::format("'{}' has no valid axis index", token));
      }
      const std::string vtext = token.substr(colon + 1);
      errno = 0;
      const double value = std::strtod(vtext.c_str(), &end);
      if (errno != 0 || end == vtext.c_str() || *end != '\0') {
        map.die(e->line, fmt::format("'{}' has no valid value", token));
      }
      cfg.export_slice.emplace_back(static_cast<int>(axis), value);
    }
  }

  map.finish();

  try {
    cfg.system.validate();
    cfg.settings.validate();
    require(cfg.lambda > 0.0, "[kernel] lambda must be positive");
    if (cfg.has_regions) {
      ProblemSpec checked = cfg.problem;
      checked.kappa = 1.0;  // placeholder; synthesize sets the real value
      checked.validate();
    }
    if (cfg.start.has_value()) {
      require(cfg.start->size() == cfg.problem.domain.n(),
              "[run] start has {} coordinates, domain has {}",
              cfg.start->size(), cfg.problem.domain.n());
    }
    require(cfg.mc_grid_per_axis >= 0,
            "[run] mc_grid_per_axis must be nonnegative");
    require(cfg.audit.factor >= 1, "[run] audit_factor must be >= 1");
    require(cfg.audit.tolerance > 0.0, "[run] audit_tolerance must be positive");
    require(cfg.export_grid >= 2, "[run] export_grid must be >= 2");
  } catch (const Error& err) {
    fail(fmt::format("config error ({}): {}", origin, err.what()));
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  return parse_config_text(read_file(path), path);
}

}  // namespace fcb
