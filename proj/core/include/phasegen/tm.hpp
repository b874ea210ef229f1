#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "phasegen/measure.hpp"

namespace phasegen {

/// A transmission matrix with one calibration residual per row.
struct TMDataset {
  DenseComplexMatrix matrix;    // m_total x n
  std::vector<double> residuals;  // length m_total, values in [0, 1]

  [[nodiscard]] std::size_t rows() const { return matrix.rows(); }
  [[nodiscard]] std::size_t cols() const { return matrix.cols(); }
};

/// PRTM layout (little-endian):
///
///     "PRTM" u8 version=1  u32 m_total  u32 n
///     f32 residuals[m_total]
///     f32 entries[m_total][n][2]     (interleaved re, im; row-major)
///
/// Throws FormatError on malformed input or residuals outside [0, 1].
TMDataset read_prtm(std::istream& in);
TMDataset read_prtm(const std::filesystem::path& path);
void write_prtm(const TMDataset& tm, std::ostream& out);
void write_prtm(const TMDataset& tm, const std::filesystem::path& path);

/// Converts the text form into a dataset.
///
/// `matrix_csv` has one TM row per line with 2n comma- or whitespace-separated
/// values (re_0, im_0, re_1, im_1, ...). `residual_csv` has one value per line.
/// Blank lines and lines starting with '#' are ignored.
TMDataset read_tm_text(const std::filesystem::path& matrix_csv, const std::filesystem::path& residual_csv);

/// Seeded synthetic dataset: complex Gaussian entries with per-component
/// standard deviation `entry_sd`, residuals uniform on [residual_lo, residual_hi].
TMDataset make_synthetic_tm(std::size_t m_total, std::size_t n, std::uint64_t seed, double entry_sd,
                            double residual_lo = 0.1, double residual_hi = 1.0);

/// Indices of rows with residual < threshold, in file order.
std::vector<std::size_t> qualifying_rows(const TMDataset& tm, double threshold);

/// Keeps rows with residual < threshold, then draws `rows` of them uniformly
/// without replacement. The selected rows keep file order.
/// Throws DataError if fewer than `rows` qualify, ConfigError if rows == 0.
MeasurementOperator select_tm_rows(const TMDataset& tm, double residual_threshold, std::size_t rows,
                                   std::uint64_t seed);

MeasurementOperator load_tm(const std::filesystem::path& path, double residual_threshold, std::size_t rows,
                            std::uint64_t seed);

}  // namespace phasegen
