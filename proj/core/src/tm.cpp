#include "phasegen/tm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "binary_io.hpp"
#include "phasegen/error.hpp"
#include "phasegen/rng.hpp"

namespace phasegen {

namespace {

using namespace detail;

constexpr char kMagic[4] = {'P', 'R', 'T', 'M'};
constexpr std::uint8_t kVersion = 1;

void check_residuals(const std::vector<double>& r) {
  for (double v : r) {
    if (!(v >= 0.0 && v <= 1.0)) throw FormatError("TM residual outside [0, 1]: " + std::to_string(v));
  }
}

std::vector<double> parse_numbers(const std::string& line, std::size_t line_no, const std::string& file) {
  std::string s = line;
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream ss(s);
  std::vector<double> out;
  std::string tok;
  while (ss >> tok) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw FormatError(file + ":" + std::to_string(line_no) + ": not a number: '" + tok + "'");
    }
  }
  return out;
}

std::vector<std::vector<double>> read_numeric_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    rows.push_back(parse_numbers(line, line_no, path.string()));
  }
  return rows;
}

}  // namespace

TMDataset read_prtm(std::istream& in) {
  char magic[4];
  read_exact(in, magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a PRTM file (bad magic)");
  const auto version = read_u8(in, "version");
  if (version != kVersion) throw FormatError("unsupported PRTM version " + std::to_string(version));
  const std::size_t m = read_u32(in, "row count");
  const std::size_t n = read_u32(in, "column count");
  if (m == 0 || n == 0) throw FormatError("PRTM file declares an empty matrix");
  if (static_cast<long double>(m) * n > static_cast<long double>(std::size_t{1} << 30)) {
    throw FormatError("PRTM matrix is implausibly large");
  }
  TMDataset tm;
  const auto res = read_f32_array(in, m, "residuals");
  tm.residuals.assign(res.begin(), res.end());
  check_residuals(tm.residuals);
  tm.matrix.re.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  tm.matrix.im.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = read_f32_array(in, 2 * n, "matrix entries");
    for (std::size_t j = 0; j < n; ++j) {
      const float re = row[2 * j];
      const float im = row[2 * j + 1];
      if (!std::isfinite(re) || !std::isfinite(im)) throw FormatError("non-finite TM entry");
      tm.matrix.re(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = re;
      tm.matrix.im(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = im;
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after TM entries");
  return tm;
}

TMDataset read_prtm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open TM file " + path.string());
  return read_prtm(in);
}

void write_prtm(const TMDataset& tm, std::ostream& out) {
  if (tm.residuals.size() != tm.rows()) throw DimensionError("residual count does not match TM rows");
  out.write(kMagic, 4);
  write_u8(out, kVersion);
  write_u32(out, checked_u32(tm.rows(), "row count"));
  write_u32(out, checked_u32(tm.cols(), "column count"));
  write_f32_array(out, std::vector<float>(tm.residuals.begin(), tm.residuals.end()));
  std::vector<float> row(2 * tm.cols());
  for (std::size_t i = 0; i < tm.rows(); ++i) {
    for (std::size_t j = 0; j < tm.cols(); ++j) {
      row[2 * j] = static_cast<float>(tm.matrix.re(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      row[2 * j + 1] = static_cast<float>(tm.matrix.im(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
    }
    write_f32_array(out, row);
  }
}

void write_prtm(const TMDataset& tm, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write TM file " + path.string());
  write_prtm(tm, out);
  if (!out) throw DataError("error while writing " + path.string());
}

TMDataset read_tm_text(const std::filesystem::path& matrix_csv, const std::filesystem::path& residual_csv) {
  const auto rows = read_numeric_lines(matrix_csv);
  const auto res_rows = read_numeric_lines(residual_csv);
  if (rows.empty()) throw FormatError(matrix_csv.string() + " contains no rows");
  const std::size_t width = rows.front().size();
  if (width == 0 || width % 2 != 0) {
    throw FormatError(matrix_csv.string() + ": rows need an even number of values (interleaved re, im)");
  }
  if (res_rows.size() != rows.size()) {
    throw FormatError("matrix has " + std::to_string(rows.size()) + " rows but " + std::to_string(res_rows.size()) +
                      " residuals were given");
  }
  const std::size_t n = width / 2;
  TMDataset tm;
  tm.matrix.re.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n));
  tm.matrix.im.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != width) throw FormatError("ragged matrix row " + std::to_string(i + 1));
    if (res_rows[i].size() != 1) throw FormatError("residual line " + std::to_string(i + 1) + " needs one value");
    for (std::size_t j = 0; j < n; ++j) {
      tm.matrix.re(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][2 * j];
      tm.matrix.im(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][2 * j + 1];
    }
    tm.residuals.push_back(res_rows[i][0]);
  }
  check_residuals(tm.residuals);
  return tm;
}

TMDataset make_synthetic_tm(std::size_t m_total, std::size_t n, std::uint64_t seed, double entry_sd,
                            double residual_lo, double residual_hi) {
  if (m_total == 0 || n == 0) throw ConfigError("synthetic TM needs positive dimensions");
  if (!(entry_sd > 0.0)) throw ConfigError("synthetic TM entry standard deviation must be positive");
  if (!(residual_lo >= 0.0 && residual_lo <= residual_hi && residual_hi <= 1.0)) {
    throw ConfigError("synthetic TM residual range must satisfy 0 <= lo <= hi <= 1");
  }
  Rng rng(mix_seed(seed, {0x7a7a}));
  std::normal_distribution<double> entry(0.0, entry_sd);
  std::uniform_real_distribution<double> residual(residual_lo, residual_hi);
  TMDataset tm;
  tm.matrix.re.resize(static_cast<Eigen::Index>(m_total), static_cast<Eigen::Index>(n));
  tm.matrix.im.resize(static_cast<Eigen::Index>(m_total), static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(m_total); ++i) {
    // Values are rounded to f32 so that a PRTM round trip is exact.
    tm.residuals.push_back(static_cast<float>(residual(rng)));
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(n); ++j) {
      tm.matrix.re(i, j) = static_cast<float>(entry(rng));
      tm.matrix.im(i, j) = static_cast<float>(entry(rng));
    }
  }
  return tm;
}

std::vector<std::size_t> qualifying_rows(const TMDataset& tm, double threshold) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < tm.residuals.size(); ++i) {
    if (tm.residuals[i] < threshold) rows.push_back(i);
  }
  return rows;
}

MeasurementOperator select_tm_rows(const TMDataset& tm, double residual_threshold, std::size_t rows,
                                   std::uint64_t seed) {
  if (rows == 0) throw ConfigError("TM row count must be positive");
  auto pool = qualifying_rows(tm, residual_threshold);
  if (pool.size() < rows) {
    throw DataError("only " + std::to_string(pool.size()) + " TM rows have residual < " +
                    std::to_string(residual_threshold) + ", " + std::to_string(rows) + " requested");
  }
  Rng rng(mix_seed(seed, {0x5e1ec7}));
  for (std::size_t s = 0; s < rows; ++s) {
    std::uniform_int_distribution<std::size_t> pick(s, pool.size() - 1);
    std::swap(pool[s], pool[pick(rng)]);
  }
  pool.resize(rows);
  std::sort(pool.begin(), pool.end());
  DenseComplexMatrix a{Eigen::MatrixXd(rows, tm.cols()), Eigen::MatrixXd(rows, tm.cols())};
  std::vector<double> residuals;
  for (std::size_t r = 0; r < rows; ++r) {
    a.re.row(static_cast<Eigen::Index>(r)) = tm.matrix.re.row(static_cast<Eigen::Index>(pool[r]));
    a.im.row(static_cast<Eigen::Index>(r)) = tm.matrix.im.row(static_cast<Eigen::Index>(pool[r]));
    residuals.push_back(tm.residuals[pool[r]]);
  }
  return make_dense_tm(std::move(a), std::move(pool), std::move(residuals));
}

MeasurementOperator load_tm(const std::filesystem::path& path, double residual_threshold, std::size_t rows,
                            std::uint64_t seed) {
  return select_tm_rows(read_prtm(path), residual_threshold, rows, seed);
}

}  // namespace phasegen
