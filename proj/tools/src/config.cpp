#include "sampa/bench/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "sampa/analysis.hpp"
#include "sampa/errors.hpp"
#include "sampa/format.hpp"
#include "sampa/rng.hpp"

namespace sampa::bench {
namespace {

struct Entry {
  std::string value;
  std::size_t line = 0;
};

struct Section {
  std::string name;
  std::size_t line = 0;
  std::map<std::string, Entry> entries;
};

[[noreturn]] void fail_at(std::size_t line, const std::string& why) {
  throw ConfigError("line " + std::to_string(line) + ": " + why);
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<Section> tokenize(std::string_view text) {
  std::vector<Section> sections;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    std::string_view raw = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    const std::string line = trim(raw);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') fail_at(line_no, "malformed section header '" + line + "'");
      sections.push_back(Section{trim(std::string_view(line).substr(1, line.size() - 2)), line_no, {}});
    } else {
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail_at(line_no, "expected key = value, got '" + line + "'");
      if (sections.empty()) fail_at(line_no, "key outside of any section");
      const std::string key = trim(std::string_view(line).substr(0, eq));
      const std::string value = trim(std::string_view(line).substr(eq + 1));
      if (key.empty()) fail_at(line_no, "empty key");
      auto& entries = sections.back().entries;
      if (auto it = entries.find(key); it != entries.end()) {
        fail_at(line_no, "duplicate key '" + key + "' (first set on line " + std::to_string(it->second.line) + ")");
      }
      entries.emplace(key, Entry{value, line_no});
    }
    if (end == text.size()) break;
  }
  return sections;
}

/// Typed access to one section's entries; every key must be consumed.
class Reader {
 public:
  explicit Reader(const Section& s) : s_(s) {}

  const Entry* find(const std::string& key) {
    auto it = s_.entries.find(key);
    if (it == s_.entries.end()) return nullptr;
    used_.push_back(key);
    return &it->second;
  }

  std::optional<std::string> str(const std::string& key) {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    if (e->value.empty()) fail_at(e->line, "key '" + key + "' has an empty value");
    return e->value;
  }

  std::optional<double> real(const std::string& key) {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    double v = 0.0;
    if (!parse_double(e->value, v)) fail_at(e->line, "key '" + key + "' expects a number, got '" + e->value + "'");
    return v;
  }

  std::optional<std::uint64_t> integer(const std::string& key) {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    return parse_uint(*e, key, e->value);
  }

  std::optional<bool> boolean(const std::string& key) {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
    if (e->value == "false" || e->value == "0" || e->value == "no") return false;
    fail_at(e->line, "key '" + key + "' expects true or false, got '" + e->value + "'");
  }

  std::optional<std::vector<double>> reals(const std::string& key) {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    std::vector<double> out;
    for (const std::string& item : split_list(e->value)) {
      double v = 0.0;
      if (!parse_double(item, v)) fail_at(e->line, "key '" + key + "' expects numbers, got '" + item + "'");
      out.push_back(v);
    }
    return out;
  }

  /// Runs `fn` and prefixes any ConfigError with the entry's line.
  template <typename Fn>
  auto at(const std::string& key, Fn&& fn) {
    const Entry* e = find(key);
    try {
      return fn(e ? e->value : std::string());
    } catch (const ConfigError& err) {
      fail_at(e ? e->line : s_.line, err.what());
    }
  }

  void finish() const {
    for (const auto& [key, entry] : s_.entries) {
      if (std::find(used_.begin(), used_.end(), key) == used_.end()) {
        fail_at(entry.line, "unknown key '" + key + "' in [" + s_.name + "]");
      }
    }
  }

  std::size_t line() const noexcept { return s_.line; }

 private:
  static std::uint64_t parse_uint(const Entry& e, const std::string& key, const std::string& text) {
    std::uint64_t v = 0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) {
      fail_at(e.line, "key '" + key + "' expects a non-negative integer, got '" + text + "'");
    }
    return v;
  }

  const Section& s_;
  std::vector<std::string> used_;
};

ProblemSpec read_problem(Reader& r) {
  ProblemSpec p;
  auto name = r.str("name");
  if (!name) fail_at(r.line(), "[problem] needs a name");
  p.name = *name;
  if (std::find(std::begin(kProblemNames), std::end(kProblemNames), p.name) == std::end(kProblemNames)) {
    r.at("name", [&](const std::string&) -> int { throw ConfigError("unknown problem '" + p.name + "'"); });
  }
  if (auto v = r.integer("dim")) p.dim = *v;
  if (auto v = r.integer("n")) p.n = *v;
  if (auto v = r.integer("hidden")) p.hidden = *v;
  if (auto v = r.real("lipschitz")) p.lipschitz = *v;
  if (auto v = r.real("min_eig")) p.min_eig = *v;
  if (auto v = r.real("flip_fraction")) p.flip_fraction = *v;
  if (auto v = r.integer("seed")) p.seed = *v;
  r.finish();
  return p;
}

MethodEntry read_method(Reader& r) {
  MethodEntry m;
  auto name = r.str("name");
  if (!name) fail_at(r.line(), "[method] needs a name");
  m.spec.method = r.at("name", [](const std::string& v) { return parse_method(v); });
  m.label = r.str("label").value_or(std::string(to_string(m.spec.method)));
  const bool sampa = m.spec.method == Method::sampa_lambda;
  m.spec.lambda = r.real("lambda").value_or(sampa ? kDefaultLambda : 0.0);
  m.spec.rho = r.real("rho").value_or(default_rho(m.spec.method, m.spec.lambda));
  if (r.find("base")) m.spec.base.kind = r.at("base", [](const std::string& v) { return parse_base_kind(v); });
  if (auto v = r.real("momentum")) m.spec.base.momentum = *v;
  if (auto v = r.real("weight_decay")) m.spec.base.weight_decay = *v;
  if (auto v = r.real("beta1")) m.spec.base.beta1 = *v;
  if (auto v = r.real("beta2")) m.spec.base.beta2 = *v;
  if (auto v = r.real("adam_eps")) m.spec.base.adam_eps = *v;
  r.finish();
  try {
    m.spec.validate();
  } catch (const ConfigError& e) {
    fail_at(r.line(), e.what());
  }
  return m;
}

ScheduleSpec read_schedule(Reader& r) {
  ScheduleSpec s;
  if (r.find("kind")) s.kind = r.at("kind", [](const std::string& v) { return parse_schedule_kind(v); });
  if (auto v = r.real("eta0")) s.eta0 = *v;
  if (auto v = r.real("power")) s.power = *v;
  s.delta0 = r.real("delta0");
  s.constant_c = r.real("c");
  s.lipschitz = r.real("lipschitz");
  if (r.find("cap")) {
    s.cap = r.at("cap", [](const std::string& v) {
      if (v == "proof") return Theorem1Cap::proof;
      if (v == "printed") return Theorem1Cap::printed;
      throw ConfigError("cap must be proof or printed, got '" + v + "'");
    });
  }
  r.finish();
  if (s.kind != ScheduleKind::theorem1 && !(s.eta0 > 0.0)) fail_at(r.line(), "schedule: eta0 must be > 0");
  return s;
}

void read_run(Reader& r, ExperimentConfig& c) {
  if (auto v = r.integer("T")) c.T = *v;
  if (r.find("seeds")) c.seeds = r.at("seeds", [](const std::string& v) { return parse_seed_list(v); });
  if (auto v = r.integer("batch_size")) c.batch_size = *v;
  if (auto v = r.integer("record_every")) c.record_every = *v;
  if (auto v = r.boolean("audit")) c.audit = *v;
  if (auto v = r.reals("x0")) c.x0 = ParamVector(*v);
  if (r.find("mode")) {
    c.mode = r.at("mode", [](const std::string& v) {
      if (v == "serial") return Mode::serial;
      if (v == "parallel") return Mode::parallel;
      throw ConfigError("mode must be serial or parallel, got '" + v + "'");
    });
  }
  if (r.find("analysis")) {
    c.analysis = r.at("analysis", [](const std::string& v) {
      if (v == "none") return Analysis::none;
      if (v == "descent") return Analysis::descent;
      if (v == "bound") return Analysis::bound;
      if (v == "alignment") return Analysis::alignment;
      throw ConfigError("analysis must be none, descent, bound or alignment, got '" + v + "'");
    });
  }
  if (auto v = r.str("out")) c.out_dir = *v;
  r.finish();
}

void read_timing(Reader& r, TimingModel& t) {
  if (auto v = r.real("t_grad")) t.t_grad = *v;
  if (auto v = r.real("t_comm")) t.t_comm = *v;
  if (auto v = r.real("t_update")) t.t_update = *v;
  r.finish();
  try {
    t.validate();
  } catch (const ConfigError& e) {
    fail_at(r.line(), e.what());
  }
}

bool label_is_safe(const std::string& label) {
  return !label.empty() && std::all_of(label.begin(), label.end(), [](char ch) {
    return (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch == '_' ||
           ch == '-' || ch == '.';
  });
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += items[i];
  }
  return out;
}

}  // namespace

std::string_view to_string(Mode m) noexcept { return m == Mode::serial ? "serial" : "parallel"; }

std::string_view to_string(Analysis a) noexcept {
  switch (a) {
    case Analysis::none: return "none";
    case Analysis::descent: return "descent";
    case Analysis::bound: return "bound";
    case Analysis::alignment: return "alignment";
  }
  return "none";
}

double default_rho(Method method, double lambda) {
  return method == Method::sampa_lambda && lambda > 0.0 ? 0.1 : 0.05;
}

std::shared_ptr<const ProblemOracle> ProblemSpec::build() const {
  if (name == "toy_quadratic") {
    if (dim < 1) throw ConfigError("toy_quadratic: dim must be >= 1");
    return std::make_shared<ToyQuadratic>(dim);
  }
  if (name == "psd_quadratic") {
    if (dim < 1) throw ConfigError("psd_quadratic: dim must be >= 1");
    if (!(lipschitz > 0.0)) throw ConfigError("psd_quadratic: lipschitz must be > 0");
    if (!(min_eig >= 0.0 && min_eig <= lipschitz)) throw ConfigError("psd_quadratic: min_eig must be in [0, lipschitz]");
    return make_random_psd_quadratic(dim, lipschitz, min_eig, seed);
  }
  if (name == "logistic_regression") {
    if (n < 2) throw ConfigError("logistic_regression: n must be >= 2");
    if (dim < 1) throw ConfigError("logistic_regression: dim must be >= 1");
    if (!(flip_fraction >= 0.0 && flip_fraction < 1.0)) {
      throw ConfigError("logistic_regression: flip_fraction must be in [0, 1)");
    }
    std::optional<LabelNoiseSpec> noise;
    if (flip_fraction > 0.0) noise = LabelNoiseSpec{flip_fraction, seed + 1};
    return make_logistic_regression(n, dim, seed, noise);
  }
  if (name == "tiny_mlp") {
    if (n < 1 || dim < 1 || hidden < 1) throw ConfigError("tiny_mlp: n, dim and hidden must be >= 1");
    return make_tiny_mlp(n, dim, hidden, seed);
  }
  throw ConfigError("unknown problem '" + name + "'");
}

Schedule ScheduleSpec::resolve(const ProblemOracle& oracle, const ParamVector& x0, double rho, std::size_t T) const {
  Schedule s;
  switch (kind) {
    case ScheduleKind::constant: s = Schedule::constant(eta0); break;
    case ScheduleKind::cosine: s = Schedule::cosine(eta0); break;
    case ScheduleKind::inverse_power: s = Schedule::inverse_power(eta0, power); break;
    case ScheduleKind::theorem1: {
      const std::optional<double> L = lipschitz ? lipschitz : oracle.lipschitz();
      if (!L) throw ConfigError("schedule theorem1: problem has no known L; set lipschitz");
      const std::optional<double> d0 = delta0 ? delta0 : initial_gap(oracle, x0);
      if (!d0) throw ConfigError("schedule theorem1: inf f unknown; set delta0");
      const double C = constant_c ? *constant_c : constant_C(*L, 0.5);
      s = Schedule::theorem1(*d0, rho, C, *L, T, cap);
      break;
    }
  }
  s.validate();
  return s;
}

void ExperimentConfig::validate() const {
  if (methods.empty() && sweep_lambdas.empty()) throw ConfigError("at least one [method] is required");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (T < 1) throw ConfigError("T must be >= 1");
  if (record_every < 1) throw ConfigError("record_every must be >= 1");
  std::vector<std::string> labels;
  for (const MethodEntry& m : methods) {
    if (!label_is_safe(m.label)) throw ConfigError("method label '" + m.label + "' must match [A-Za-z0-9_.-]+");
    if (std::find(labels.begin(), labels.end(), m.label) != labels.end()) {
      throw ConfigError("duplicate method label '" + m.label + "'; set label = ... to disambiguate");
    }
    labels.push_back(m.label);
    m.spec.validate();
    if (mode == Mode::parallel && m.spec.method != Method::sampa_lambda) {
      throw ConfigError("mode = parallel requires method sampa_lambda, got '" + std::string(to_string(m.spec.method)) +
                        "'");
    }
  }
  for (double l : sweep_lambdas) {
    if (!(l >= 0.0 && l <= 1.0)) throw ConfigError("sweep lambda " + format_double(l) + " outside [0, 1]");
  }
  if (std::find(std::begin(kProblemNames), std::end(kProblemNames), problem.name) == std::end(kProblemNames)) {
    throw ConfigError("unknown problem '" + problem.name + "'");
  }
  if (schedule.kind != ScheduleKind::theorem1 && !(schedule.eta0 > 0.0)) {
    throw ConfigError("schedule: eta0 must be > 0");
  }
  timing.validate();
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig c;
  c.methods.clear();
  const auto sections = tokenize(text);
  std::map<std::string, std::size_t> seen;
  bool have_problem = false;
  for (const Section& s : sections) {
    if (s.name != "method") {
      if (auto it = seen.find(s.name); it != seen.end()) {
        fail_at(s.line, "duplicate section [" + s.name + "] (first on line " + std::to_string(it->second) + ")");
      }
      seen.emplace(s.name, s.line);
    }
    Reader r(s);
    if (s.name == "problem") {
      c.problem = read_problem(r);
      have_problem = true;
    } else if (s.name == "method") {
      c.methods.push_back(read_method(r));
    } else if (s.name == "schedule") {
      c.schedule = read_schedule(r);
    } else if (s.name == "run") {
      read_run(r, c);
    } else if (s.name == "timing") {
      read_timing(r, c.timing);
    } else if (s.name == "sweep") {
      auto lambdas = r.reals("lambdas");
      if (!lambdas || lambdas->empty()) fail_at(s.line, "[sweep] needs lambdas");
      c.sweep_lambdas = *lambdas;
      r.finish();
    } else {
      fail_at(s.line, "unknown section [" + s.name + "]");
    }
  }
  if (!have_problem) throw ConfigError("missing required section [problem]");
  if (c.methods.empty() && c.sweep_lambdas.empty()) throw ConfigError("missing required section [method]");
  c.validate();
  return c;
}

ExperimentConfig parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string to_config_text(const ExperimentConfig& c) {
  std::ostringstream out;
  const auto num = [](double v) { return format_double(v); };
  out << "[problem]\nname = " << c.problem.name << "\ndim = " << c.problem.dim << "\nn = " << c.problem.n
      << "\nhidden = " << c.problem.hidden << "\nlipschitz = " << num(c.problem.lipschitz)
      << "\nmin_eig = " << num(c.problem.min_eig) << "\nflip_fraction = " << num(c.problem.flip_fraction)
      << "\nseed = " << c.problem.seed << "\n";
  for (const MethodEntry& m : c.methods) {
    const BaseSpec& b = m.spec.base;
    out << "\n[method]\nname = " << to_string(m.spec.method) << "\nlabel = " << m.label << "\nrho = " << num(m.spec.rho)
        << "\nlambda = " << num(m.spec.lambda) << "\nbase = " << to_string(b.kind) << "\nmomentum = " << num(b.momentum)
        << "\nweight_decay = " << num(b.weight_decay) << "\nbeta1 = " << num(b.beta1) << "\nbeta2 = " << num(b.beta2)
        << "\nadam_eps = " << num(b.adam_eps) << "\n";
  }
  const ScheduleSpec& s = c.schedule;
  out << "\n[schedule]\nkind = " << to_string(s.kind) << "\neta0 = " << num(s.eta0) << "\npower = " << num(s.power)
      << "\n";
  if (s.delta0) out << "delta0 = " << num(*s.delta0) << "\n";
  if (s.constant_c) out << "c = " << num(*s.constant_c) << "\n";
  if (s.lipschitz) out << "lipschitz = " << num(*s.lipschitz) << "\n";
  out << "cap = " << (s.cap == Theorem1Cap::proof ? "proof" : "printed") << "\n";

  std::vector<std::string> seeds;
  for (auto v : c.seeds) seeds.push_back(std::to_string(v));
  out << "\n[run]\nT = " << c.T << "\nseeds = " << join(seeds) << "\nbatch_size = " << c.batch_size
      << "\nrecord_every = " << c.record_every << "\naudit = " << (c.audit ? "true" : "false") << "\n";
  if (c.x0) {
    std::vector<std::string> xs;
    for (double v : c.x0->values()) xs.push_back(num(v));
    out << "x0 = " << join(xs) << "\n";
  }
  out << "mode = " << to_string(c.mode) << "\nanalysis = " << to_string(c.analysis)
      << "\nout = " << c.out_dir.generic_string() << "\n";
  out << "\n[timing]\nt_grad = " << num(c.timing.t_grad) << "\nt_comm = " << num(c.timing.t_comm)
      << "\nt_update = " << num(c.timing.t_update) << "\n";
  if (!c.sweep_lambdas.empty()) {
    std::vector<std::string> ls;
    for (double v : c.sweep_lambdas) ls.push_back(num(v));
    out << "\n[sweep]\nlambdas = " << join(ls) << "\n";
  }
  return out.str();
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string text = to_config_text(config);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text.data(), text.size())));
  return buf;
}

std::vector<std::uint64_t> parse_seed_list(std::string_view text) {
  std::vector<std::uint64_t> out;
  for (const std::string& item : split_list(std::string(text))) {
    // a-b ranges are inclusive
    const auto dash = item.find('-');
    auto parse = [&](const std::string& s) {
      std::uint64_t v = 0;
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError("bad seed '" + s + "'");
      return v;
    };
    if (dash != std::string::npos && dash > 0) {
      const std::uint64_t lo = parse(trim(item.substr(0, dash)));
      const std::uint64_t hi = parse(trim(item.substr(dash + 1)));
      if (hi < lo || hi - lo > 100000) throw ConfigError("bad seed range '" + item + "'");
      for (std::uint64_t v = lo; v <= hi; ++v) out.push_back(v);
    } else {
      out.push_back(parse(item));
    }
  }
  if (out.empty()) throw ConfigError("seed list is empty");
  return out;
}

}  // namespace sampa::bench
