#include "phasegen/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "phasegen/error.hpp"

namespace phasegen {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Removes a trailing '#' comment that is not inside a quoted string.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted && ch == '\\') {
      ++i;
    } else if (ch == '"') {
      quoted = !quoted;
    } else if (ch == '#' && !quoted) {
      return line.substr(0, i);
    }
  }
  return line;
}

std::string parse_scalar(const std::string& raw, const std::string& where) {
  const std::string s = trim(raw);
  if (s.empty()) throw ConfigError(where + ": empty value");
  if (s.front() != '"') {
    if (s.find('"') != std::string::npos) throw ConfigError(where + ": stray quote in '" + s + "'");
    return s;
  }
  if (s.size() < 2 || s.back() != '"') throw ConfigError(where + ": unterminated string");
  std::string out;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    char ch = s[i];
    if (ch == '\\') {
      if (i + 2 >= s.size()) throw ConfigError(where + ": dangling escape");
      ch = s[++i];
      if (ch == 'n') ch = '\n';
      else if (ch == 't') ch = '\t';
      else if (ch != '"' && ch != '\\') throw ConfigError(where + ": unknown escape");
    } else if (ch == '"') {
      throw ConfigError(where + ": unescaped quote inside string");
    }
    out.push_back(ch);
  }
  return out;
}

ConfigFile::Value parse_value(const std::string& raw, const std::string& where) {
  const std::string s = trim(raw);
  ConfigFile::Value v;
  if (s.empty() || s.front() != '[') {
    v.items.push_back(parse_scalar(s, where));
    return v;
  }
  if (s.back() != ']') throw ConfigError(where + ": list must close on the same line");
  v.is_list = true;
  const std::string body = trim(s.substr(1, s.size() - 2));
  if (body.empty()) return v;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char ch = body[i];
    if (quoted && ch == '\\' && i + 1 < body.size()) {
      cur.push_back(ch);
      cur.push_back(body[++i]);
      continue;
    }
    if (ch == '"') quoted = !quoted;
    if (ch == ',' && !quoted) {
      v.items.push_back(parse_scalar(cur, where));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (quoted) throw ConfigError(where + ": unterminated string in list");
  if (!trim(cur).empty()) v.items.push_back(parse_scalar(cur, where));
  return v;
}

double to_double(const std::string& s, const std::string& key) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE || !std::isfinite(v)) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + s + "'");
  }
  return v;
}

std::int64_t to_int(const std::string& s, const std::string& key) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + s + "'");
  }
  return v;
}

std::uint64_t to_uint(const std::string& s, const std::string& key) {
  if (!s.empty() && s.front() == '-') {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + s + "'");
  }
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size() || errno == ERANGE) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + s + "'");
  }
  return v;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') out.push_back('\\');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

const char* boolstr(bool b) { return b ? "true" : "false"; }

}  // namespace

ConfigFile ConfigFile::parse(std::istream& in, const std::string& source) {
  ConfigFile cfg;
  std::string line;
  std::string section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = source + ":" + std::to_string(lineno);
    const std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError(where + ": malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty()) throw ConfigError(where + ": empty section name");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(s.substr(0, eq));
    if (key.empty()) throw ConfigError(where + ": missing key");
    const std::string full = section.empty() ? key : section + "." + key;
    if (cfg.values_.count(full) != 0) throw ConfigError(where + ": duplicate key '" + full + "'");
    cfg.values_[full] = parse_value(s.substr(eq + 1), where);
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse(in, path.string());
}

void ConfigFile::set(const std::string& key, const std::string& text) {
  values_[key] = parse_value(text, "override " + key);
}

void ConfigFile::set_literal(const std::string& key, const std::string& value) {
  values_[key] = Value{false, {value}};
}

bool ConfigFile::has(const std::string& key) const { return values_.count(key) != 0; }

std::vector<std::string> ConfigFile::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) out.push_back(k);
  return out;
}

const ConfigFile::Value* ConfigFile::find(const std::string& key) {
  const auto it = values_.find(key);
  if (it == values_.end()) return nullptr;
  consumed_.insert(key);
  return &it->second;
}

std::optional<std::string> ConfigFile::get_string(const std::string& key) {
  const Value* v = find(key);
  if (v == nullptr) return std::nullopt;
  if (v->is_list) throw ConfigError("config key '" + key + "': expected a single value, got a list");
  return v->items.front();
}

std::optional<double> ConfigFile::get_double(const std::string& key) {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  return to_double(*s, key);
}

std::optional<std::int64_t> ConfigFile::get_int(const std::string& key) {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  return to_int(*s, key);
}

std::optional<std::uint64_t> ConfigFile::get_uint(const std::string& key) {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  return to_uint(*s, key);
}

std::optional<bool> ConfigFile::get_bool(const std::string& key) {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  if (*s == "true") return true;
  if (*s == "false") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + *s + "'");
}

std::optional<std::vector<std::string>> ConfigFile::get_string_list(const std::string& key) {
  const Value* v = find(key);
  if (v == nullptr) return std::nullopt;
  return v->items;
}

std::optional<std::vector<double>> ConfigFile::get_double_list(const std::string& key) {
  auto items = get_string_list(key);
  if (!items) return std::nullopt;
  std::vector<double> out;
  for (const auto& s : *items) out.push_back(to_double(s, key));
  return out;
}

std::optional<std::vector<std::uint64_t>> ConfigFile::get_uint_list(const std::string& key) {
  auto items = get_string_list(key);
  if (!items) return std::nullopt;
  std::vector<std::uint64_t> out;
  for (const auto& s : *items) out.push_back(to_uint(s, key));
  return out;
}

void ConfigFile::require_all_consumed() const {
  std::string unknown;
  for (const auto& [k, v] : values_) {
    if (consumed_.count(k) == 0) unknown += (unknown.empty() ? "" : ", ") + k;
  }
  if (!unknown.empty()) throw ConfigError("unknown config key(s): " + unknown);
}

std::string to_string(DatasetSource s) { return s == DatasetSource::directory ? "directory" : "generator"; }

DatasetSource parse_dataset_source(const std::string& s) {
  if (s == "directory") return DatasetSource::directory;
  if (s == "generator") return DatasetSource::generator;
  throw ConfigError("unknown dataset source '" + s + "' (expected directory or generator)");
}

SolverConfig read_solver_section(ConfigFile& f, const std::string& p, SolverConfig c) {
  if (auto v = f.get_uint(p + "restarts")) c.restarts = *v;
  if (auto v = f.get_uint(p + "iterations")) c.iterations = *v;
  if (auto v = f.get_double(p + "step_size")) c.step_size = *v;
  if (auto v = f.get_string(p + "prior")) c.prior = parse_latent_prior(*v);
  if (auto v = f.get_string(p + "precision")) c.precision = parse_precision(*v);
  if (auto v = f.get_uint(p + "loss_trace_stride")) c.loss_trace_stride = *v;
  if (auto v = f.get_bool(p + "line_search")) c.line_search = *v;
  if (auto v = f.get_double(p + "stop_tolerance")) c.stop_tolerance = *v;
  if (auto v = f.get_uint(p + "threads")) c.threads = *v;
  if (auto v = f.get_uint(p + "seed")) c.seed = *v;
  return c;
}

ExperimentConfig ExperimentConfig::from_file(ConfigFile& f) {
  ExperimentConfig c;
  if (auto v = f.get_string("generator.path")) c.generator_path = *v;

  if (auto v = f.get_string("operator.family")) c.op.family = parse_operator_family(*v);
  if (auto v = f.get_uint("operator.masks")) c.op.cdp_masks = *v;
  if (auto v = f.get_string("operator.tm_path")) c.op.tm_path = *v;
  if (auto v = f.get_double("operator.tm_threshold")) c.op.tm_threshold = *v;

  if (auto v = f.get_string("dataset.source")) c.dataset.source = parse_dataset_source(*v);
  if (auto v = f.get_string("dataset.directory")) c.dataset.directory = *v;
  if (auto v = f.get_string_list("dataset.files")) c.dataset.files = *v;
  if (auto v = f.get_uint("dataset.count")) c.dataset.count = *v;
  if (auto v = f.get_uint("dataset.height")) c.dataset.shape.h = *v;
  if (auto v = f.get_uint("dataset.width")) c.dataset.shape.w = *v;
  if (auto v = f.get_uint("dataset.channels")) c.dataset.shape.c = *v;
  if (auto v = f.get_bool("dataset.zero_pad")) c.dataset.zero_pad = *v;
  if (auto v = f.get_uint("dataset.selection_seed")) c.dataset.selection_seed = *v;

  if (auto v = f.get_double_list("noise.percent")) c.noise.percent = *v;
  if (auto v = f.get_string("noise.mode")) c.noise.mode = parse_noise_mode(*v);

  if (auto v = f.get_uint_list("sweep.m")) c.m_values.assign(v->begin(), v->end());
  if (auto v = f.get_uint("sweep.trials")) c.trials = *v;
  if (auto v = f.get_bool("sweep.resolve_sign")) c.resolve_sign = *v;

  c.solver = read_solver_section(f);

  if (auto v = f.get_string("run.out")) c.out_dir = *v;
  if (auto v = f.get_uint("run.seed")) c.seed = *v;
  if (auto v = f.get_uint("run.workers")) c.workers = *v;
  if (auto v = f.get_bool("run.write_grids")) c.write_grids = *v;
  f.require_all_consumed();
  return c;
}

void ExperimentConfig::validate() const {
  namespace fs = std::filesystem;
  if (m_values.empty()) throw ConfigError("sweep grid 'sweep.m' is empty");
  if (noise.percent.empty()) throw ConfigError("sweep grid 'noise.percent' is empty");
  if (trials == 0) throw ConfigError("sweep.trials must be >= 1");
  if (dataset.count == 0) throw ConfigError("dataset.count must be >= 1");
  if (workers == 0) throw ConfigError("run.workers must be >= 1");
  for (auto m : m_values) {
    if (m == 0) throw ConfigError("sweep.m values must be >= 1");
    if (op.family == OperatorFamily::cdp && (op.cdp_masks == 0 || m % op.cdp_masks != 0)) {
      throw ConfigError("sweep.m value " + std::to_string(m) + " is not divisible by operator.masks = " +
                        std::to_string(op.cdp_masks));
    }
  }
  for (double p : noise.percent) {
    if (!(p >= 0.0)) throw ConfigError("noise.percent values must be >= 0");
  }
  solver.validate();
  std::error_code ec;
  if (generator_path.empty()) throw ConfigError("generator.path is required");
  if (!fs::is_regular_file(generator_path, ec)) throw ConfigError("generator file not found: " + generator_path.string());
  if (op.family == OperatorFamily::transmission_matrix) {
    if (!fs::is_regular_file(op.tm_path, ec)) throw ConfigError("TM file not found: '" + op.tm_path.string() + "'");
    if (!(op.tm_threshold >= 0.0 && op.tm_threshold <= 1.0)) {
      throw ConfigError("operator.tm_threshold must lie in [0, 1]");
    }
  }
  if (dataset.source == DatasetSource::directory) {
    if (!fs::is_directory(dataset.directory, ec)) {
      throw ConfigError("dataset directory not found: '" + dataset.directory.string() + "'");
    }
    for (const auto& name : dataset.files) {
      if (!fs::is_regular_file(dataset.directory / name, ec)) {
        throw ConfigError("dataset file not found: " + (dataset.directory / name).string());
      }
    }
  }
}

void ExperimentConfig::write_toml(std::ostream& out) const {
  out << "[generator]\n";
  out << "path = " << quote(generator_path.string()) << "\n\n";

  out << "[operator]\n";
  out << "family = " << quote(to_string(op.family)) << "\n";
  out << "masks = " << op.cdp_masks << "\n";
  out << "tm_path = " << quote(op.tm_path.string()) << "\n";
  out << "tm_threshold = " << num(op.tm_threshold) << "\n\n";

  out << "[dataset]\n";
  out << "source = " << quote(to_string(dataset.source)) << "\n";
  out << "directory = " << quote(dataset.directory.string()) << "\n";
  out << "files = [";
  for (std::size_t i = 0; i < dataset.files.size(); ++i) out << (i ? ", " : "") << quote(dataset.files[i]);
  out << "]\n";
  out << "count = " << dataset.count << "\n";
  out << "height = " << dataset.shape.h << "\n";
  out << "width = " << dataset.shape.w << "\n";
  out << "channels = " << dataset.shape.c << "\n";
  out << "zero_pad = " << boolstr(dataset.zero_pad) << "\n";
  out << "selection_seed = " << dataset.selection_seed << "\n\n";

  out << "[noise]\n";
  out << "percent = [";
  for (std::size_t i = 0; i < noise.percent.size(); ++i) out << (i ? ", " : "") << num(noise.percent[i]);
  out << "]\n";
  out << "mode = " << quote(to_string(noise.mode)) << "\n\n";

  out << "[sweep]\n";
  out << "m = [";
  for (std::size_t i = 0; i < m_values.size(); ++i) out << (i ? ", " : "") << m_values[i];
  out << "]\n";
  out << "trials = " << trials << "\n";
  out << "resolve_sign = " << boolstr(resolve_sign) << "\n\n";

  out << "[solver]\n";
  out << "restarts = " << solver.restarts << "\n";
  out << "iterations = " << solver.iterations << "\n";
  out << "step_size = " << num(solver.step_size) << "\n";
  out << "prior = " << quote(to_string(solver.prior)) << "\n";
  out << "precision = " << quote(to_string(solver.precision)) << "\n";
  out << "loss_trace_stride = " << solver.loss_trace_stride << "\n";
  out << "line_search = " << boolstr(solver.line_search) << "\n";
  out << "stop_tolerance = " << num(solver.stop_tolerance) << "\n";
  out << "threads = " << solver.threads << "\n";
  out << "seed = " << solver.seed << "\n\n";

  out << "[run]\n";
  out << "out = " << quote(out_dir.string()) << "\n";
  out << "seed = " << seed << "\n";
  out << "workers = " << workers << "\n";
  out << "write_grids = " << boolstr(write_grids) << "\n";
}

}  // namespace phasegen
