#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "phasegen/config.hpp"
#include "phasegen/generator.hpp"
#include "phasegen/measure.hpp"
#include "phasegen/solver.hpp"
#include "phasegen/tm.hpp"

namespace phasegen {

/// mix_seed(master, {item, m, bit pattern of noise_pct, trial}).
std::uint64_t cell_seed(std::uint64_t master, std::size_t item, std::size_t m, double noise_pct, std::size_t trial);

struct RunRecord {
  std::size_t item = 0;
  std::size_t m = 0;
  double noise_pct = 0.0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  double psnr_orig = 0.0;
  double psnr_range = 0.0;
  double ssim_orig = 0.0;
  double ssim_range = 0.0;
  double ppe = 0.0;
  double residual = 0.0;
  double wall_ms = 0.0;
};

struct FailureRecord {
  std::size_t item = 0;
  std::size_t m = 0;
  double noise_pct = 0.0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::string message;
};

inline constexpr const char* kRunCsvHeader =
    "item,m,noise_pct,trial,psnr_orig,psnr_range,ssim_orig,ssim_range,ppe,residual,wall_ms";

/// "%.10g", with +infinity written as "inf".
std::string format_metric(double v);

void write_run_csv(const std::vector<RunRecord>& records, std::ostream& out);
void write_failure_csv(const std::vector<FailureRecord>& failures, std::ostream& out);

/// Builds the operator of one sweep cell. `tm` must be non-null for the TM family.
MeasurementOperator build_operator(const OperatorSpec& spec, const Shape3& shape, std::size_t m,
                                   std::uint64_t seed, const TMDataset* tm);

struct Dataset {
  std::vector<ImageTensor> images;
  std::vector<std::string> names;
  std::vector<std::string> warnings;
};

/// Directory source: explicit `files`, or `count` files drawn with
/// `selection_seed` from the lexicographic listing (kept in lexicographic order).
/// Generator source: G(z_i) with z_i drawn from the solver prior.
Dataset load_dataset(const ExperimentConfig& cfg, const GeneratorModel& model);

struct SweepReport {
  std::filesystem::path bundle;
  std::vector<RunRecord> records;
  std::vector<FailureRecord> failures;
  std::vector<std::string> warnings;
};

/// Runs every (item, m, noise, trial) cell and writes the report bundle:
/// runs.csv, failures.csv, summary.json, effective_config.toml and, when
/// enabled, grid_m<m>_noise<pct>.png images.
SweepReport run_sweep(const ExperimentConfig& cfg, std::ostream* log = nullptr);

/// report.json (solver echo, per-restart residuals and loss traces, extra
/// metadata and optional metrics) plus <stem>.png and <stem>.f32 of the best image.
void write_solve_report(const std::filesystem::path& dir, const std::string& stem, const SolverConfig& cfg,
                        const SolveResult& result, const std::map<std::string, std::string>& meta,
                        const ImageTensor* truth = nullptr, bool resolve_sign = false);

}  // namespace phasegen
