#include "bgda/config.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace bgda {

namespace {

struct Value {
  enum Kind { String, Scalar, Array } kind = Scalar;
  std::string text;                 // string contents or raw scalar token
  std::vector<std::string> items;  // raw array tokens
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& what, std::size_t line) {
  if (line == 0) throw ConfigError(what);
  throw ConfigError("line " + std::to_string(line) + ": " + what);
}

// Strips a trailing comment that is not inside a string.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

Value parse_value(const std::string& raw, std::size_t line) {
  const std::string s = trim(raw);
  if (s.empty()) fail("missing value", line);
  Value v;
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') fail("unterminated string", line);
    v.kind = Value::String;
    v.text = s.substr(1, s.size() - 2);
    if (v.text.find('"') != std::string::npos) fail("quotes inside strings are not supported", line);
    return v;
  }
  if (s.front() == '[') {
    if (s.back() != ']') fail("unterminated array", line);
    v.kind = Value::Array;
    std::stringstream body(s.substr(1, s.size() - 2));
    std::string item;
    while (std::getline(body, item, ',')) {
      item = trim(item);
      if (item.empty()) fail("empty array element", line);
      v.items.push_back(item);
    }
    return v;
  }
  v.text = s;
  return v;
}

double as_double(const Value& v, std::size_t line) {
  if (v.kind != Value::Scalar) fail("expected a number", line);
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(v.text.c_str(), &end);
  if (end == v.text.c_str() || *end != '\0' || errno == ERANGE) fail("invalid number '" + v.text + "'", line);
  return x;
}

std::uint64_t parse_u64(const std::string& s, std::size_t line) {
  std::uint64_t x = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size()) fail("invalid unsigned integer '" + s + "'", line);
  return x;
}

std::uint64_t as_u64(const Value& v, std::size_t line) {
  if (v.kind != Value::Scalar) fail("expected an integer", line);
  return parse_u64(v.text, line);
}

std::string as_string(const Value& v, std::size_t line) {
  if (v.kind != Value::String) fail("expected a quoted string", line);
  return v.text;
}

std::vector<std::size_t> as_size_list(const Value& v, std::size_t line) {
  if (v.kind != Value::Array) fail("expected an array", line);
  std::vector<std::size_t> out;
  for (const std::string& it : v.items) out.push_back(static_cast<std::size_t>(parse_u64(it, line)));
  return out;
}

std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string quote(const std::string& s) { return "\"" + s + "\""; }

template <class E>
struct EnumName {
  E value;
  const char* name;
};

template <class E, std::size_t N>
E enum_from(const EnumName<E> (&names)[N], const std::string& s, std::size_t line) {
  for (const auto& n : names) {
    if (s == n.name) return n.value;
  }
  std::string allowed;
  for (const auto& n : names) allowed += std::string(allowed.empty() ? "" : ", ") + n.name;
  fail("invalid value '" + s + "' (expected one of: " + allowed + ")", line);
}

template <class E, std::size_t N>
std::string enum_to(const EnumName<E> (&names)[N], E e) {
  for (const auto& n : names) {
    if (n.value == e) return n.name;
  }
  return "?";
}

constexpr EnumName<ExperimentKind> kKinds[] = {
    {ExperimentKind::Synthetic, "synthetic"}, {ExperimentKind::Pinn, "pinn"}, {ExperimentKind::ProxSelftest, "prox-selftest"}};
constexpr EnumName<OptimizerKind> kOptimizers[] = {{OptimizerKind::Bgda, "bgda"},
                                                   {OptimizerKind::Adaptive, "adaptive"},
                                                   {OptimizerKind::Sbgda, "sbgda"},
                                                   {OptimizerKind::FixedWeightBaseline, "fixed-weight-baseline"}};
constexpr EnumName<AdaptCombo> kCombos[] = {{AdaptCombo::AdamRmsprop, "adam+rmsprop"},
                                            {AdaptCombo::AdamAdam, "adam+adam"},
                                            {AdaptCombo::RmspropRmsprop, "rmsprop+rmsprop"}};
constexpr EnumName<ThetaScaling> kScalings[] = {
    {ThetaScaling::None, "none"}, {ThetaScaling::Norm, "norm"}, {ThetaScaling::Coordinate, "coordinate"}};
constexpr EnumName<Schedule> kSchedules[] = {{Schedule::Constant, "constant"}, {Schedule::Linear, "linear"}};
constexpr EnumName<StepsizeSource> kSources[] = {{StepsizeSource::Config, "config"},
                                                 {StepsizeSource::Theoretical, "theoretical"}};

struct Field {
  const char* section;
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const Value&, std::size_t)> set;
};

#define BGDA_DOUBLE(sec, name, member)                                                          \
  Field {                                                                                       \
    sec, name, [](const ExperimentConfig& c) { return fmt_double(c.member); },                  \
        [](ExperimentConfig& c, const Value& v, std::size_t l) { c.member = as_double(v, l); } \
  }
#define BGDA_SIZE(sec, name, member)                                                                               \
  Field {                                                                                                          \
    sec, name, [](const ExperimentConfig& c) { return std::to_string(c.member); },                                 \
        [](ExperimentConfig& c, const Value& v, std::size_t l) { c.member = static_cast<std::size_t>(as_u64(v, l)); } \
  }
#define BGDA_STRING(sec, name, member)                                                          \
  Field {                                                                                       \
    sec, name, [](const ExperimentConfig& c) { return quote(c.member); },                       \
        [](ExperimentConfig& c, const Value& v, std::size_t l) { c.member = as_string(v, l); } \
  }
#define BGDA_ENUM(sec, name, member, table)                                                                \
  Field {                                                                                                  \
    sec, name, [](const ExperimentConfig& c) { return quote(enum_to(table, c.member)); },                  \
        [](ExperimentConfig& c, const Value& v, std::size_t l) { c.member = enum_from(table, as_string(v, l), l); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      BGDA_ENUM("experiment", "kind", kind, kKinds),
      BGDA_STRING("experiment", "problem", problem),
      Field{"experiment", "seed", [](const ExperimentConfig& c) { return std::to_string(c.seed); },
            [](ExperimentConfig& c, const Value& v, std::size_t l) { c.seed = as_u64(v, l); }},

      BGDA_ENUM("optimizer", "kind", optimizer, kOptimizers),
      BGDA_ENUM("optimizer", "combo", opt.combo, kCombos),
      BGDA_ENUM("optimizer", "theta_scaling", opt.theta_scaling, kScalings),
      BGDA_ENUM("optimizer", "schedule", opt.schedule, kSchedules),
      BGDA_ENUM("optimizer", "stepsizes", stepsizes, kSources),
      BGDA_DOUBLE("optimizer", "gamma_theta", opt.gamma_theta),
      BGDA_DOUBLE("optimizer", "gamma_theta_end", opt.gamma_theta_end),
      BGDA_DOUBLE("optimizer", "gamma_pi", opt.gamma_pi),
      BGDA_DOUBLE("optimizer", "alpha1", opt.alpha1),
      BGDA_DOUBLE("optimizer", "alpha2", opt.alpha2),
      BGDA_DOUBLE("optimizer", "beta", opt.beta),
      BGDA_DOUBLE("optimizer", "eps_adapt", opt.eps_adapt),
      BGDA_SIZE("optimizer", "batch_size", opt.batch_size),
      BGDA_SIZE("optimizer", "iterations", opt.iterations),

      BGDA_DOUBLE("saddle", "lambda", lambda),
      BGDA_DOUBLE("saddle", "radius", radius),

      Field{"pinn", "hidden",
            [](const ExperimentConfig& c) {
              std::string s = "[";
              for (std::size_t i = 0; i < c.hidden.size(); ++i) s += (i ? ", " : "") + std::to_string(c.hidden[i]);
              return s + "]";
            },
            [](ExperimentConfig& c, const Value& v, std::size_t l) { c.hidden = as_size_list(v, l); }},
      BGDA_STRING("pinn", "activation", activation),
      BGDA_SIZE("pinn", "n_interior", n_interior),
      BGDA_SIZE("pinn", "n_boundary", n_boundary),
      BGDA_SIZE("pinn", "resample_every", resample_every),
      BGDA_SIZE("pinn", "l2re_every", l2re_every),
      BGDA_SIZE("pinn", "l2re_grid", l2re_grid),
      BGDA_SIZE("pinn", "chunk", chunk),
      BGDA_SIZE("pinn", "workers", workers),

      BGDA_SIZE("synthetic", "dim", dim),
      BGDA_SIZE("synthetic", "losses", losses),
      BGDA_DOUBLE("synthetic", "spectrum_lo", spectrum_lo),
      BGDA_DOUBLE("synthetic", "spectrum_hi", spectrum_hi),
      BGDA_DOUBLE("synthetic", "heterogeneity", heterogeneity),
      BGDA_DOUBLE("synthetic", "noise_sigma", noise_sigma),

      BGDA_STRING("output", "trace", trace_file),
      BGDA_STRING("output", "summary", summary_file),
  };
  return f;
}

#undef BGDA_DOUBLE
#undef BGDA_SIZE
#undef BGDA_STRING
#undef BGDA_ENUM

const Field* find_field(const std::string& section, const std::string& key) {
  for (const Field& f : fields()) {
    if (section == f.section && key == f.key) return &f;
  }
  return nullptr;
}

bool known_section(const std::string& s) {
  for (const Field& f : fields()) {
    if (s == f.section) return true;
  }
  return false;
}

void validate(const ExperimentConfig& c) {
  try {
    c.opt.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(e.what());
  }
  if (!(c.lambda > 0.0)) throw ConfigError("saddle.lambda must be positive");
  if (c.radius < 0.0) throw ConfigError("saddle.radius must be nonnegative");
  if (c.activation != "tanh" && c.activation != "sin") throw ConfigError("pinn.activation must be \"tanh\" or \"sin\"");
  if (c.n_interior == 0 || c.n_boundary == 0) throw ConfigError("pinn point counts must be positive");
  if (c.chunk == 0 || c.workers == 0) throw ConfigError("pinn.chunk and pinn.workers must be positive");
  if (c.l2re_grid < 2) throw ConfigError("pinn.l2re_grid must be at least 2");
  if (c.dim == 0 || c.losses < 2) throw ConfigError("synthetic instances need dim >= 1 and losses >= 2");
  if (c.spectrum_hi < c.spectrum_lo) throw ConfigError("synthetic spectrum range is empty");
  if (c.noise_sigma < 0.0) throw ConfigError("synthetic.noise_sigma must be nonnegative");
  if (c.trace_file.empty() || c.summary_file.empty()) throw ConfigError("output file names must be non-empty");
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::size_t line = 0;
  std::vector<std::string> seen;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail("malformed section header", line);
      section = trim(s.substr(1, s.size() - 2));
      if (!known_section(section)) fail("unknown section [" + section + "]", line);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail("expected key = value", line);
    const std::string key = trim(s.substr(0, eq));
    if (section.empty()) fail("key '" + key + "' outside of a section", line);
    const Field* f = find_field(section, key);
    if (!f) fail("unknown key '" + section + "." + key + "'", line);
    const std::string full = section + "." + key;
    for (const std::string& k : seen) {
      if (k == full) fail("duplicate key '" + full + "'", line);
    }
    seen.push_back(full);
    f->set(cfg, parse_value(s.substr(eq + 1), line), line);
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string emit_config(const ExperimentConfig& cfg) {
  std::string out;
  std::string section;
  for (const Field& f : fields()) {
    if (section != f.section) {
      if (!section.empty()) out += "\n";
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += std::string(f.key) + " = " + f.get(cfg) + "\n";
  }
  return out;
}

void apply_override(ExperimentConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
  const std::string path = trim(assignment.substr(0, eq));
  const auto dot = path.find('.');
  if (dot == std::string::npos) throw ConfigError("override key '" + path + "' needs a section prefix");
  const Field* f = find_field(path.substr(0, dot), path.substr(dot + 1));
  if (!f) throw ConfigError("unknown key '" + path + "'");
  std::string value = trim(assignment.substr(eq + 1));
  // Bare words are accepted for string-valued keys on the command line.
  const std::string current = f->get(cfg);
  if (!current.empty() && current.front() == '"' && (value.empty() || value.front() != '"')) value = quote(value);
  f->set(cfg, parse_value(value, 0), 0);
  validate(cfg);
}

std::string to_string(ExperimentKind k) { return enum_to(kKinds, k); }
std::string to_string(OptimizerKind k) { return enum_to(kOptimizers, k); }

}  // namespace bgda
