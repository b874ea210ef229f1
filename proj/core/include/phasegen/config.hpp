#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "phasegen/measure.hpp"
#include "phasegen/solver.hpp"
#include "phasegen/types.hpp"

namespace phasegen {

/// Flat key/value configuration in a TOML subset:
///
///   # comment
///   [section]            -> keys below are stored as "section.key"
///   key = 12             -> integer / float / bare word
///   key = "text"         -> string (\" and \\ escapes)
///   key = true | false
///   key = [1, 2, "a"]    -> list on one line
///
/// Typed getters throw ConfigError on malformed values. Every lookup marks the
/// key as consumed so that `require_all_consumed` can reject typos.
class ConfigFile {
 public:
  struct Value {
    bool is_list = false;
    std::vector<std::string> items;  // a scalar has exactly one item
  };

  static ConfigFile parse(std::istream& in, const std::string& source = "<config>");
  static ConfigFile load(const std::filesystem::path& path);

  /// Parses `text` with the same value grammar as the file format and stores
  /// it, replacing any earlier value.
  void set(const std::string& key, const std::string& text);
  /// Stores `value` verbatim as a scalar string (no quoting or list syntax).
  void set_literal(const std::string& key, const std::string& value);

  [[nodiscard]] bool has(const std::string& key) const;
  [[nodiscard]] std::vector<std::string> keys() const;

  std::optional<std::string> get_string(const std::string& key);
  std::optional<double> get_double(const std::string& key);
  std::optional<std::int64_t> get_int(const std::string& key);
  std::optional<std::uint64_t> get_uint(const std::string& key);
  std::optional<bool> get_bool(const std::string& key);
  std::optional<std::vector<double>> get_double_list(const std::string& key);
  std::optional<std::vector<std::uint64_t>> get_uint_list(const std::string& key);
  std::optional<std::vector<std::string>> get_string_list(const std::string& key);

  void require_all_consumed() const;

 private:
  const Value* find(const std::string& key);
  std::map<std::string, Value> values_;
  std::set<std::string> consumed_;
};

struct OperatorSpec {
  OperatorFamily family = OperatorFamily::gaussian;
  std::size_t cdp_masks = 2;  // m must be divisible by this
  std::filesystem::path tm_path;
  double tm_threshold = 0.4;
};

enum class DatasetSource : std::uint8_t { directory, generator };

std::string to_string(DatasetSource s);
DatasetSource parse_dataset_source(const std::string& s);

struct DatasetSpec {
  DatasetSource source = DatasetSource::directory;
  std::filesystem::path directory;
  std::vector<std::string> files;  // explicit selection; empty = lexicographic scan
  std::size_t count = 1;
  Shape3 shape{0, 0, 0};  // 0 = take from the generator
  bool zero_pad = true;
  std::uint64_t selection_seed = 0;  // latent draws for source = generator
};

struct NoiseSpec {
  std::vector<double> percent{0.0};
  NoiseMode mode = NoiseMode::relative;
};

struct ExperimentConfig {
  std::filesystem::path generator_path;
  OperatorSpec op;
  DatasetSpec dataset;
  NoiseSpec noise;
  std::vector<std::size_t> m_values;
  std::size_t trials = 1;
  bool resolve_sign = false;  // score min over {x_hat, -x_hat}
  SolverConfig solver;
  std::filesystem::path out_dir = "sweep_out";
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  bool write_grids = true;

  /// Reads every known key (missing keys keep the defaults above) and rejects
  /// unknown keys.
  static ExperimentConfig from_file(ConfigFile& file);

  /// Grid, solver and path checks; does not load the generator.
  void validate() const;

  /// The complete effective configuration in the same file format.
  void write_toml(std::ostream& out) const;
};

SolverConfig read_solver_section(ConfigFile& file, const std::string& prefix = "solver.",
                                 SolverConfig base = {});

}  // namespace phasegen
