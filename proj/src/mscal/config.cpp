#include "mscal/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "mscal/grid.hpp"
#include "mscal/physics.hpp"

namespace mscal {

namespace {

[[noreturn]] void fail(int line, const std::string& message) {
  throw std::runtime_error("config line " + std::to_string(line) + ": " + message);
}

std::string_view trim(std::string_view v) {
  while (!v.empty() && (v.front() == ' ' || v.front() == '\t')) v.remove_prefix(1);
  while (!v.empty() && (v.back() == ' ' || v.back() == '\t' || v.back() == '\r'))
    v.remove_suffix(1);
  return v;
}

struct Entry {
  enum Kind { kBool, kInt, kFloat, kString, kArray } kind = kFloat;
  bool boolean = false;
  long long integer = 0;
  double number = 0.0;
  std::string text;
  std::vector<double> array;
  int line = 0;
  mutable bool used = false;
};

double parse_number(std::string_view v, int line) {
  if (!v.empty() && v.front() == '+') v.remove_prefix(1);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    fail(line, "malformed number '" + std::string(v) + "'");
  return out;
}

Entry parse_value(std::string_view v, int line) {
  Entry e;
  e.line = line;
  if (v.empty()) fail(line, "missing value");
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') fail(line, "unterminated string");
    v = v.substr(1, v.size() - 2);
    if (v.find('"') != std::string_view::npos || v.find('\\') != std::string_view::npos)
      fail(line, "escapes are not supported in strings");
    e.kind = Entry::kString;
    e.text = std::string(v);
    return e;
  }
  if (v == "true" || v == "false") {
    e.kind = Entry::kBool;
    e.boolean = (v == "true");
    return e;
  }
  if (v.front() == '[') {
    if (v.back() != ']') fail(line, "unterminated array");
    e.kind = Entry::kArray;
    std::string_view body = trim(v.substr(1, v.size() - 2));
    while (!body.empty()) {
      const std::size_t comma = body.find(',');
      const std::string_view item = trim(body.substr(0, comma));
      if (item.empty()) fail(line, "empty array element");
      e.array.push_back(parse_number(item, line));
      if (comma == std::string_view::npos) break;
      body = trim(body.substr(comma + 1));
      if (body.empty()) fail(line, "trailing comma in array");
    }
    return e;
  }
  if (v.find_first_not_of("+-0123456789") == std::string_view::npos) {
    e.kind = Entry::kInt;
    std::string_view digits = v;
    if (!digits.empty() && digits.front() == '+') digits.remove_prefix(1);
    const auto [ptr, ec] =
        std::from_chars(digits.data(), digits.data() + digits.size(), e.integer);
    if (ec != std::errc{} || ptr != digits.data() + digits.size())
      fail(line, "malformed integer '" + std::string(v) + "'");
    e.number = double(e.integer);
    return e;
  }
  e.kind = Entry::kFloat;
  e.number = parse_number(v, line);
  return e;
}

bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  for (char c : key)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '.') return false;
  return true;
}

class Reader {
 public:
  explicit Reader(const std::string& text) {
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int line = 0;
    while (std::getline(in, raw)) {
      ++line;
      std::string_view sv = trim(raw);
      bool quoted = false;
      for (std::size_t i = 0; i < sv.size(); ++i) {
        if (sv[i] == '"') quoted = !quoted;
        if (sv[i] == '#' && !quoted) {
          sv = trim(sv.substr(0, i));
          break;
        }
      }
      if (sv.empty()) continue;
      if (sv.front() == '[') {
        if (sv.back() != ']') fail(line, "unterminated section header");
        const std::string_view name = trim(sv.substr(1, sv.size() - 2));
        if (!valid_key(name)) fail(line, "malformed section name");
        section = std::string(name) + ".";
        continue;
      }
      const std::size_t eq = sv.find('=');
      if (eq == std::string_view::npos) fail(line, "expected key = value");
      const std::string_view key = trim(sv.substr(0, eq));
      if (!valid_key(key)) fail(line, "malformed key");
      const std::string full = section + std::string(key);
      if (entries_.count(full)) fail(line, "duplicate key '" + full + "'");
      entries_.emplace(full, parse_value(trim(sv.substr(eq + 1)), line));
    }
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  double number(const std::string& key, double fallback) const {
    const Entry* e = find(key);
    if (!e) return fallback;
    if (e->kind != Entry::kInt && e->kind != Entry::kFloat)
      fail(e->line, "'" + key + "' must be a number");
    return e->number;
  }

  long long integer(const std::string& key, long long fallback) const {
    const Entry* e = find(key);
    if (!e) return fallback;
    if (e->kind != Entry::kInt) fail(e->line, "'" + key + "' must be an integer");
    return e->integer;
  }

  bool boolean(const std::string& key, bool fallback) const {
    const Entry* e = find(key);
    if (!e) return fallback;
    if (e->kind != Entry::kBool) fail(e->line, "'" + key + "' must be true or false");
    return e->boolean;
  }

  std::string text(const std::string& key, std::string fallback) const {
    const Entry* e = find(key);
    if (!e) return fallback;
    if (e->kind != Entry::kString) fail(e->line, "'" + key + "' must be a quoted string");
    return e->text;
  }

  std::vector<double> array(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) return {};
    if (e->kind != Entry::kArray) fail(e->line, "'" + key + "' must be an array");
    return e->array;
  }

  void reject_unknown() const {
    for (const auto& [key, entry] : entries_)
      if (!entry.used)
        fail(entry.line, "unknown key '" + key + "'");
  }

 private:
  const Entry* find(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return nullptr;
    it->second.used = true;
    return &it->second;
  }

  std::map<std::string, Entry> entries_;
};

int positive_integer(double value, const std::string& key) {
  const int gates = int(value);
  if (double(gates) != value || gates < 1)
    throw std::runtime_error("config: '" + key + "' entries must be positive integers");
  return gates;
}

void append_bytes(std::vector<unsigned char>& buffer, const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  buffer.insert(buffer.end(), bytes, bytes + size);
}

void append_double(std::vector<unsigned char>& buffer, double v) {
  append_bytes(buffer, &v, sizeof v);
}

void append_int(std::vector<unsigned char>& buffer, long long v) {
  append_bytes(buffer, &v, sizeof v);
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  resolved_prior().validate();
  if (particles < 2) throw std::invalid_argument("particles must be >= 2");
  menu.validate();
  if (stop.rabi != 0.0) stop.validate();
  if (!(estimator_depolarizing >= 0.0) || !(estimator_depolarizing <= 0.5))
    throw std::invalid_argument("estimator depolarizing must be in [0, 0.5]");
  if (shots_per_iteration < 1) throw std::invalid_argument("shots_per_iteration must be >= 1");
  if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
  if (!(resample_shrinkage > 0.0) || !(resample_shrinkage <= 1.0))
    throw std::invalid_argument("resample_shrinkage must be in (0, 1]");
  truth.validate();
  noise.validate();
  if (capture_distances.empty() || capture_particles.empty())
    throw std::invalid_argument("capture study needs at least one distance and particle count");
  for (double d : capture_distances)
    if (!(d >= 0.0)) throw std::invalid_argument("capture distances must be >= 0");
  for (int np : capture_particles)
    if (np < 2) throw std::invalid_argument("capture particle counts must be >= 2");
  if (capture_trials < 30)
    throw std::invalid_argument("capture_trials must be >= 30 for meaningful intervals");
  if (curve_points < 2) throw std::invalid_argument("curve_points must be >= 2");
  if (!(curve_span > 0.0)) throw std::invalid_argument("curve_span must be > 0");
  if (endpoint_runs < 1) throw std::invalid_argument("endpoint_runs must be >= 1");
}

GaussianPrior RunConfig::resolved_prior() const {
  GaussianPrior prior = standard_prior(model);
  for (int k = 0; k < 4; ++k)
    if (prior_sigma[k] > 0.0) prior.sigma[k] = prior_sigma[k];
  return prior;
}

CalibrationConfig RunConfig::calibration() const {
  CalibrationConfig config;
  config.model = model;
  config.prior = resolved_prior();
  config.particles = particles;
  config.strategy = strategy;
  config.menu = menu;
  config.stop = stop;
  config.depolarizing = estimator_depolarizing;
  config.shots_per_iteration = shots_per_iteration;
  config.max_iterations = max_iterations;
  config.resample_shrinkage = resample_shrinkage;
  config.threads = threads;
  return config;
}

std::uint64_t RunConfig::digest() const {
  std::vector<unsigned char> buffer;
  append_double(buffer, model.lamb_dicke);
  append_double(buffer, model.gate_time);
  append_double(buffer, model.ramp_time);
  append_double(buffer, model.integrator_step);
  append_int(buffer, model.n_max);
  append_int(buffer, model.initial_fock);
  append_int(buffer, model.loops);
  for (int k = 0; k < 4; ++k) append_double(buffer, prior_sigma[k]);
  append_int(buffer, particles);
  append_int(buffer, int(strategy));
  for (const MeasurementSetting& s : menu.all()) {
    append_int(buffer, s.n_gates);
    append_double(buffer, s.phase_target);
  }
  append_double(buffer, stop.rabi);
  append_double(buffer, stop.centerline);
  append_double(buffer, stop.sideband);
  append_double(buffer, stop.phase);
  append_double(buffer, estimator_depolarizing);
  append_int(buffer, shots_per_iteration);
  append_int(buffer, max_iterations);
  append_double(buffer, resample_shrinkage);
  append_double(buffer, truth.rabi_scale);
  append_double(buffer, truth.stark_offset);
  append_double(buffer, truth.mode_offset);
  append_double(buffer, truth.phase_offset);
  append_double(buffer, noise.depolarizing);
  for (int k = 0; k < 4; ++k) append_double(buffer, noise.drift[k]);
  for (double d : capture_distances) append_double(buffer, d);
  for (int np : capture_particles) append_int(buffer, np);
  append_int(buffer, capture_trials);
  append_int(buffer, curve_points);
  append_double(buffer, curve_span);
  append_int(buffer, endpoint_runs);
  append_int(buffer, rb_check ? 1 : 0);
  append_int(buffer, confirm ? 1 : 0);
  append_int(buffer, retry_on_reject ? 1 : 0);
  return fnv1a(buffer.data(), buffer.size());
}

RunConfig parse_run_config(const std::string& text) {
  const Reader reader(text);
  RunConfig config;

  config.model.lamb_dicke = reader.number("model.lamb_dicke", config.model.lamb_dicke);
  config.model.gate_time = reader.number("model.gate_time", config.model.gate_time);
  config.model.ramp_time = reader.number("model.ramp_time", config.model.ramp_time);
  config.model.integrator_step =
      reader.number("model.integrator_step", config.model.integrator_step);
  config.model.n_max = int(reader.integer("model.n_max", config.model.n_max));
  config.model.initial_fock = int(reader.integer("model.initial_fock", config.model.initial_fock));
  config.model.loops = int(reader.integer("model.loops", config.model.loops));

  config.prior_sigma[0] = reader.number("prior.rabi_sigma", 0.0);
  config.prior_sigma[1] = reader.number("prior.centerline_sigma", 0.0);
  config.prior_sigma[2] = reader.number("prior.sideband_sigma", 0.0);
  config.prior_sigma[3] = reader.number("prior.phase_sigma", 0.0);

  config.particles = int(reader.integer("filter.particles", config.particles));
  config.resample_shrinkage =
      reader.number("filter.resample_shrinkage", config.resample_shrinkage);

  const std::string kind = reader.text("strategy.kind", "variance-min");
  if (kind == "variance-min")
    config.strategy = StrategyKind::kVarianceMin;
  else if (kind == "thresholded")
    config.strategy = StrategyKind::kThresholded;
  else
    throw std::runtime_error("config: strategy.kind must be 'variance-min' or 'thresholded'");
  config.shots_per_iteration =
      int(reader.integer("strategy.shots_per_iteration", config.shots_per_iteration));
  config.max_iterations = int(reader.integer("strategy.max_iterations", config.max_iterations));
  config.estimator_depolarizing =
      reader.number("strategy.depolarizing", config.estimator_depolarizing);

  const double phase_target = reader.number("menu.phase_target", pi / 4.0);
  if (reader.has("menu.rabi_gates")) {
    config.menu.rabi_sensitive.clear();
    for (double g : reader.array("menu.rabi_gates"))
      config.menu.rabi_sensitive.push_back({positive_integer(g, "menu.rabi_gates"), 0.0});
  }
  std::vector<double> phase_gates{2, 4, 6};
  if (reader.has("menu.phase_gates")) phase_gates = reader.array("menu.phase_gates");
  config.menu.phase_sensitive.clear();
  for (double g : phase_gates)
    config.menu.phase_sensitive.push_back({positive_integer(g, "menu.phase_gates"),
                                           phase_target});

  config.stop.rabi = reader.number("stop.rabi", config.stop.rabi);
  config.stop.centerline = reader.number("stop.centerline", config.stop.centerline);
  config.stop.sideband = reader.number("stop.sideband", config.stop.sideband);
  config.stop.phase = reader.number("stop.phase", config.stop.phase);

  config.truth.rabi_scale = reader.number("truth.rabi_scale", config.truth.rabi_scale);
  config.truth.stark_offset = reader.number("truth.stark_offset", config.truth.stark_offset);
  config.truth.mode_offset = reader.number("truth.mode_offset", config.truth.mode_offset);
  config.truth.phase_offset = reader.number("truth.phase_offset", config.truth.phase_offset);

  config.noise.depolarizing = reader.number("noise.depolarizing", config.noise.depolarizing);
  if (reader.has("noise.drift")) {
    const std::vector<double> drift = reader.array("noise.drift");
    if (drift.size() != 4)
      throw std::runtime_error("config: noise.drift must hold exactly 4 rates");
    for (int k = 0; k < 4; ++k) config.noise.drift[k] = drift[k];
  }

  if (reader.has("study.capture_distances"))
    config.capture_distances = reader.array("study.capture_distances");
  if (reader.has("study.capture_particles")) {
    config.capture_particles.clear();
    for (double np : reader.array("study.capture_particles"))
      config.capture_particles.push_back(positive_integer(np, "study.capture_particles"));
  }
  config.capture_trials = int(reader.integer("study.capture_trials", config.capture_trials));
  config.curve_points = int(reader.integer("study.curve_points", config.curve_points));
  config.curve_span = reader.number("study.curve_span", config.curve_span);
  config.endpoint_runs = int(reader.integer("study.endpoint_runs", config.endpoint_runs));
  config.rb_check = reader.boolean("study.rb_check", config.rb_check);

  const long long seed = reader.integer("run.seed", 1);
  if (seed < 0) throw std::runtime_error("config: run.seed must be >= 0");
  config.seed = std::uint64_t(seed);
  const long long threads = reader.integer("run.threads", 0);
  if (threads < 0) throw std::runtime_error("config: run.threads must be >= 0");
  config.threads = unsigned(threads);
  config.confirm = reader.boolean("run.confirm", config.confirm);
  config.retry_on_reject = reader.boolean("run.retry_on_reject", config.retry_on_reject);
  config.grid_dir = reader.text("run.grid_dir", config.grid_dir.string());
  config.out_dir = reader.text("run.out_dir", config.out_dir.string());

  reader.reject_unknown();
  config.validate();
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read config file: " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_run_config(text.str());
  } catch (const std::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::string grid_filename(const MeasurementSetting& setting) {
  char name[64];
  std::snprintf(name, sizeof name, "ms-%dg-%03dmrad.grid", setting.n_gates,
                int(std::lround(setting.phase_target * 1e3)));
  return name;
}

}  // namespace mscal
