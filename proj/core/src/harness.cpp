#include "phasegen/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "phasegen/error.hpp"
#include "phasegen/image_io.hpp"
#include "phasegen/metrics.hpp"
#include "phasegen/prgw.hpp"
#include "phasegen/rng.hpp"

namespace phasegen {

namespace {

using nlohmann::json;

constexpr std::uint64_t kOperatorStream = 1;
constexpr std::uint64_t kNoiseStream = 2;
constexpr std::uint64_t kSolverStream = 3;
constexpr std::uint64_t kRangeStream = 0x7a2ce;

json metric_json(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

std::string pct_label(double pct) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", pct);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("error while writing " + path.string());
}

struct Stat {
  double mean = 0.0;
  double sd = 0.0;
};

Stat mean_sd(const std::vector<double>& v) {
  Stat s;
  if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  if (std::any_of(v.begin(), v.end(), [](double x) { return std::isinf(x); })) {
    return {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::quiet_NaN()};
  }
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double acc = 0.0;
    for (double x : v) acc += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(acc / static_cast<double>(v.size() - 1));
  }
  return s;
}

json config_json(const ExperimentConfig& cfg) {
  std::ostringstream toml;
  cfg.write_toml(toml);
  std::istringstream in(toml.str());
  ConfigFile file = ConfigFile::parse(in, "effective");
  json out = json::object();
  for (const auto& key : file.keys()) {
    auto items = file.get_string_list(key);
    out[key] = items->size() == 1 && !(key == "dataset.files" || key == "sweep.m" || key == "noise.percent")
                   ? json(items->front())
                   : json(*items);
  }
  return out;
}

ImageTensor blank_like(const ImageTensor& ref) {
  ImageTensor b(ref.shape);
  std::fill(b.data.begin(), b.data.end(), 1.0);
  return b;
}

struct CellKey {
  std::size_t item;
  std::size_t m_index;
  std::size_t noise_index;
  std::size_t trial;
};

struct CellOutcome {
  bool ok = false;
  RunRecord record;
  FailureRecord failure;
  ImageTensor recon;
};

}  // namespace

std::uint64_t cell_seed(std::uint64_t master, std::size_t item, std::size_t m, double noise_pct, std::size_t trial) {
  return mix_seed(master, {item, m, std::bit_cast<std::uint64_t>(noise_pct), trial});
}

std::string format_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_run_csv(const std::vector<RunRecord>& records, std::ostream& out) {
  out << kRunCsvHeader << "\n";
  for (const auto& r : records) {
    char wall[32];
    std::snprintf(wall, sizeof wall, "%.3f", r.wall_ms);
    out << r.item << ',' << r.m << ',' << format_metric(r.noise_pct) << ',' << r.trial << ','
        << format_metric(r.psnr_orig) << ',' << format_metric(r.psnr_range) << ',' << format_metric(r.ssim_orig)
        << ',' << format_metric(r.ssim_range) << ',' << format_metric(r.ppe) << ',' << format_metric(r.residual)
        << ',' << wall << "\n";
  }
}

void write_failure_csv(const std::vector<FailureRecord>& failures, std::ostream& out) {
  out << "item,m,noise_pct,trial,seed,error\n";
  for (const auto& f : failures) {
    std::string msg = f.message;
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    std::string quoted = "\"";
    for (char ch : msg) {
      if (ch == '"') quoted.push_back('"');
      quoted.push_back(ch);
    }
    quoted.push_back('"');
    out << f.item << ',' << f.m << ',' << format_metric(f.noise_pct) << ',' << f.trial << ',' << f.seed << ','
        << quoted << "\n";
  }
}

MeasurementOperator build_operator(const OperatorSpec& spec, const Shape3& shape, std::size_t m,
                                   std::uint64_t seed, const TMDataset* tm) {
  switch (spec.family) {
    case OperatorFamily::gaussian:
      return make_gaussian(m, shape.size(), seed);
    case OperatorFamily::cdp:
      if (spec.cdp_masks == 0 || m % spec.cdp_masks != 0) {
        throw ConfigError("CDP measurement count " + std::to_string(m) + " is not divisible by " +
                          std::to_string(spec.cdp_masks) + " masks");
      }
      return make_cdp(shape.h, shape.w, spec.cdp_masks, m / spec.cdp_masks, seed, shape.c);
    case OperatorFamily::transmission_matrix:
      if (tm == nullptr) throw ConfigError("TM operator requested without a TM dataset");
      return select_tm_rows(*tm, spec.tm_threshold, m, seed);
  }
  throw ConfigError("unknown operator family");
}

Dataset load_dataset(const ExperimentConfig& cfg, const GeneratorModel& model) {
  Dataset ds;
  const Shape3 target = model.output_shape();
  if (cfg.dataset.source == DatasetSource::generator) {
    for (std::size_t i = 0; i < cfg.dataset.count; ++i) {
      const auto z = draw_latent(model.input_dim(), cfg.solver.prior, mix_seed(cfg.dataset.selection_seed, {i}));
      ds.images.push_back(forward(model, z, cfg.solver.precision));
      ds.names.push_back("latent_" + std::to_string(i));
    }
    return ds;
  }

  namespace fs = std::filesystem;
  std::vector<std::string> chosen = cfg.dataset.files;
  if (chosen.empty()) {
    std::error_code ec;
    if (!fs::is_directory(cfg.dataset.directory, ec)) {
      throw DataError("image directory not found: " + cfg.dataset.directory.string());
    }
    std::vector<std::string> all;
    for (const auto& entry : fs::directory_iterator(cfg.dataset.directory)) {
      if (!entry.is_regular_file()) continue;
      std::string ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
      if (ext == ".png" || ext == ".pgm" || ext == ".ppm" || ext == ".pnm") {
        all.push_back(entry.path().filename().string());
      }
    }
    std::sort(all.begin(), all.end());
    if (all.size() > cfg.dataset.count) {
      Rng rng(mix_seed(cfg.dataset.selection_seed, {0x5e1ec7}));
      for (std::size_t i = 0; i < cfg.dataset.count; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, all.size() - 1);
        std::swap(all[i], all[pick(rng)]);
      }
      all.resize(cfg.dataset.count);
      std::sort(all.begin(), all.end());
    }
    chosen = std::move(all);
  }
  for (const auto& name : chosen) {
    try {
      ds.images.push_back(fit_to_shape(read_image(cfg.dataset.directory / name), target, cfg.dataset.zero_pad));
      ds.names.push_back(name);
    } catch (const Error& e) {
      ds.warnings.push_back("skipped " + name + ": " + e.what());
    }
  }
  if (ds.images.empty()) throw DataError("no usable images in " + cfg.dataset.directory.string());
  return ds;
}

SweepReport run_sweep(const ExperimentConfig& cfg, std::ostream* log) {
  namespace fs = std::filesystem;
  cfg.validate();
  const GeneratorModel model = load_generator(cfg.generator_path);
  const Shape3 shape = model.output_shape();
  const Shape3& want = cfg.dataset.shape;
  if ((want.h != 0 || want.w != 0 || want.c != 0) && want != shape) {
    throw ConfigError("dataset shape " + to_string(want) + " does not match generator output " + to_string(shape));
  }
  std::optional<TMDataset> tm;
  if (cfg.op.family == OperatorFamily::transmission_matrix) {
    tm = read_prtm(cfg.op.tm_path);
    if (tm->cols() != shape.size()) {
      throw DimensionError("TM has n = " + std::to_string(tm->cols()) + " columns but the generator output " +
                           to_string(shape) + " has " + std::to_string(shape.size()) + " values");
    }
  }

  Dataset ds = load_dataset(cfg, model);
  SweepReport report;
  report.warnings = ds.warnings;
  for (const auto& w : ds.warnings) {
    if (log != nullptr) *log << "warning: " << w << "\n";
  }

  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw DataError("cannot create output directory " + cfg.out_dir.string() + ": " + ec.message());
  report.bundle = cfg.out_dir;

  // Range images: one projection per item.
  std::vector<ImageTensor> range(ds.images.size());
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    SolverConfig sc = cfg.solver;
    sc.seed = mix_seed(cfg.seed, {i, kRangeStream});
    range[i] = project_to_range(model, ds.images[i], sc).x_hat;
    if (log != nullptr) *log << "range projection " << (i + 1) << "/" << ds.images.size() << "\n";
  }

  std::vector<CellKey> cells;
  for (std::size_t i = 0; i < ds.images.size(); ++i) {
    for (std::size_t mi = 0; mi < cfg.m_values.size(); ++mi) {
      for (std::size_t ni = 0; ni < cfg.noise.percent.size(); ++ni) {
        for (std::size_t t = 0; t < cfg.trials; ++t) cells.push_back({i, mi, ni, t});
      }
    }
  }
  std::vector<CellOutcome> outcomes(cells.size());

  auto run_cell = [&](std::size_t idx) {
    const CellKey& key = cells[idx];
    const std::size_t m = cfg.m_values[key.m_index];
    const double pct = cfg.noise.percent[key.noise_index];
    const std::uint64_t seed = cell_seed(cfg.seed, key.item, m, pct, key.trial);
    CellOutcome& out = outcomes[idx];
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const auto op = build_operator(cfg.op, shape, m, mix_seed(seed, {kOperatorStream}), tm ? &*tm : nullptr);
      const auto y = measure_magnitude(op, ds.images[key.item], pct, cfg.noise.mode, mix_seed(seed, {kNoiseStream}));
      SolverConfig sc = cfg.solver;
      sc.seed = mix_seed(seed, {kSolverStream});
      const auto result = solve(model, op, y.y, sc);
      const auto& best = result.best();
      const auto s_orig = score(ds.images[key.item], best.x_hat, 1.0, cfg.resolve_sign);
      const auto s_range = score(range[key.item], best.x_hat, 1.0, cfg.resolve_sign);
      RunRecord& r = out.record;
      r.item = key.item;
      r.m = m;
      r.noise_pct = pct;
      r.trial = key.trial;
      r.seed = seed;
      r.psnr_orig = s_orig.psnr_db;
      r.psnr_range = s_range.psnr_db;
      r.ssim_orig = s_orig.ssim;
      r.ssim_range = s_range.ssim;
      r.ppe = s_orig.per_pixel_mse;
      r.residual = best.residual;
      out.recon = s_orig.sign_resolved ? resolve_sign(ds.images[key.item], best.x_hat).image : best.x_hat;
      out.ok = true;
    } catch (const std::exception& e) {
      out.failure = {key.item, m, pct, key.trial, seed, e.what()};
    }
    out.record.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  };

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t idx = next++; idx < cells.size(); idx = next++) {
      run_cell(idx);
      const std::size_t d = ++done;
      if (log != nullptr) {
        std::lock_guard lock(log_mutex);
        *log << "cell " << d << "/" << cells.size() << "\n";
      }
    }
  };
  const std::size_t workers = std::min(cfg.workers, std::max<std::size_t>(cells.size(), 1));
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (const auto& o : outcomes) {
    if (o.ok) {
      report.records.push_back(o.record);
    } else {
      report.failures.push_back(o.failure);
    }
  }

  {
    std::ostringstream csv;
    write_run_csv(report.records, csv);
    write_text(cfg.out_dir / "runs.csv", csv.str());
  }
  {
    std::ostringstream csv;
    write_failure_csv(report.failures, csv);
    write_text(cfg.out_dir / "failures.csv", csv.str());
  }
  {
    std::ostringstream toml;
    cfg.write_toml(toml);
    write_text(cfg.out_dir / "effective_config.toml", toml.str());
  }

  json summary;
  summary["bundle"] = cfg.out_dir.string();
  summary["master_seed"] = cfg.seed;
  summary["config"] = config_json(cfg);
  summary["items"] = ds.names;
  summary["warnings"] = report.warnings;
  summary["cell_count"] = cells.size();
  summary["failure_count"] = report.failures.size();
  json groups = json::array();
  for (std::size_t mi = 0; mi < cfg.m_values.size(); ++mi) {
    for (std::size_t ni = 0; ni < cfg.noise.percent.size(); ++ni) {
      std::vector<double> cols[7];
      for (const auto& r : report.records) {
        if (r.m != cfg.m_values[mi] || r.noise_pct != cfg.noise.percent[ni]) continue;
        const double vals[7] = {r.psnr_orig, r.psnr_range, r.ssim_orig, r.ssim_range, r.ppe, r.residual, r.wall_ms};
        for (int c = 0; c < 7; ++c) cols[c].push_back(vals[c]);
      }
      static const char* names[7] = {"psnr_orig", "psnr_range", "ssim_orig", "ssim_range",
                                     "ppe",       "residual",   "wall_ms"};
      json g;
      g["m"] = cfg.m_values[mi];
      g["noise_pct"] = cfg.noise.percent[ni];
      g["count"] = cols[0].size();
      for (int c = 0; c < 7; ++c) {
        const Stat s = mean_sd(cols[c]);
        g[names[c]] = {{"mean", metric_json(s.mean)}, {"sd", metric_json(s.sd)}};
      }
      groups.push_back(g);
    }
  }
  summary["cells"] = groups;
  write_text(cfg.out_dir / "summary.json", summary.dump(2) + "\n");

  if (cfg.write_grids && (shape.c == 1 || shape.c == 3)) {
    for (std::size_t mi = 0; mi < cfg.m_values.size(); ++mi) {
      for (std::size_t ni = 0; ni < cfg.noise.percent.size(); ++ni) {
        std::vector<std::vector<ImageTensor>> rows(3);
        for (std::size_t i = 0; i < ds.images.size(); ++i) {
          rows[0].push_back(ds.images[i]);
          rows[1].push_back(range[i]);
          ImageTensor recon = blank_like(ds.images[i]);
          for (std::size_t idx = 0; idx < cells.size(); ++idx) {
            const auto& k = cells[idx];
            if (k.item == i && k.m_index == mi && k.noise_index == ni && k.trial == 0 && outcomes[idx].ok) {
              recon = outcomes[idx].recon;
            }
          }
          rows[2].push_back(std::move(recon));
        }
        const std::string name =
            "grid_m" + std::to_string(cfg.m_values[mi]) + "_noise" + pct_label(cfg.noise.percent[ni]) + ".png";
        write_png(tile_grid(rows), cfg.out_dir / name);
      }
    }
  }
  return report;
}

void write_solve_report(const std::filesystem::path& dir, const std::string& stem, const SolverConfig& cfg,
                        const SolveResult& result, const std::map<std::string, std::string>& meta,
                        const ImageTensor* truth, bool resolve_sign) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
  json rep;
  rep["meta"] = meta;
  rep["solver"] = {{"restarts", cfg.restarts},
                   {"iterations", cfg.iterations},
                   {"step_size", cfg.step_size},
                   {"prior", to_string(cfg.prior)},
                   {"seed", cfg.seed},
                   {"precision", to_string(cfg.precision)},
                   {"loss_trace_stride", cfg.loss_trace_stride},
                   {"line_search", cfg.line_search},
                   {"stop_tolerance", cfg.stop_tolerance},
                   {"threads", cfg.threads}};
  rep["best_index"] = result.best_index;
  rep["best_residual"] = metric_json(result.best().residual);
  json restarts = json::array();
  for (const auto& r : result.restarts) {
    json trace = json::array();
    for (double v : r.loss_trace) trace.push_back(metric_json(v));
    restarts.push_back({{"index", r.index},
                        {"residual", metric_json(r.residual)},
                        {"iterations_run", r.iterations_run},
                        {"diverged", r.diverged},
                        {"loss_trace", trace}});
  }
  rep["restarts"] = restarts;
  rep["z_best"] = result.best().z_final;
  if (truth != nullptr) {
    const auto s = score(*truth, result.best().x_hat, 1.0, resolve_sign);
    rep["metrics"] = {{"psnr", metric_json(s.psnr_db)},
                      {"ssim", s.ssim},
                      {"ppe", s.per_pixel_mse},
                      {"sign_resolved", s.sign_resolved},
                      {"ssim_fallback_window", s.ssim_fallback}};
  }
  write_text(dir / "report.json", rep.dump(2) + "\n");
  const ImageTensor& img = result.best().x_hat;
  if (img.shape.c == 1 || img.shape.c == 3) write_png(img, dir / (stem + ".png"));
  write_raw_f32(img, dir / (stem + ".f32"));
}

}  // namespace phasegen
