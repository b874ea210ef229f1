#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "phasegen/config.hpp"
#include "phasegen/error.hpp"
#include "phasegen/generator.hpp"
#include "phasegen/harness.hpp"
#include "phasegen/image_io.hpp"
#include "phasegen/metrics.hpp"
#include "phasegen/prgw.hpp"
#include "phasegen/rng.hpp"
#include "phasegen/solver.hpp"
#include "phasegen/tm.hpp"

namespace phasegen::cli {

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> config;
  std::optional<std::string> out;
};

// Flags that map one-to-one onto config keys.
struct KeyFlags {
  std::map<std::string, std::string> values;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_option_function<std::string>(
        flag, [this, key](const std::string& v) { values[key] = v; }, help);
  }

  void add_bool(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    app->add_flag_function(
        flag, [this, key](std::int64_t) { values[key] = "true"; }, help);
  }

  void apply(ConfigFile& file) const {
    for (const auto& [k, v] : values) file.set_literal(k, v);
  }
};

void add_solver_flags(CLI::App* app, KeyFlags& kf) {
  kf.add(app, "--restarts", "solver.restarts", "Random restarts R");
  kf.add(app, "--iterations", "solver.iterations", "Gradient steps per restart L");
  kf.add(app, "--step", "solver.step_size", "Step size");
  kf.add(app, "--prior", "solver.prior", "Latent prior: normal | uniform");
  kf.add(app, "--precision", "solver.precision", "Generator precision: f32 | f64");
  kf.add(app, "--stop-tol", "solver.stop_tolerance", "Stop a restart once the loss falls below this value");
  kf.add(app, "--threads", "solver.threads", "Restart threads (0 = all cores)");
  kf.add(app, "--trace-stride", "solver.loss_trace_stride", "Loss trace sampling stride");
  kf.add_bool(app, "--line-search", "solver.line_search", "Use backtracking line search");
}

ConfigFile base_config(const Globals& g) {
  ConfigFile file = g.config ? ConfigFile::load(*g.config) : ConfigFile{};
  if (g.seed) file.set_literal("run.seed", std::to_string(*g.seed));
  if (g.out) file.set_literal("run.out", *g.out);
  return file;
}

ImageTensor target_image(const ExperimentConfig& cfg, const GeneratorModel& model,
                         const std::optional<std::string>& image, std::ostream& err) {
  if (image) return fit_to_shape(read_image(*image), model.output_shape(), cfg.dataset.zero_pad);
  ExperimentConfig one = cfg;
  one.dataset.count = 1;
  Dataset ds = load_dataset(one, model);
  for (const auto& w : ds.warnings) err << "warning: " << w << "\n";
  return ds.images.front();
}

int cmd_solve(const Globals& g, const KeyFlags& kf, const std::optional<std::string>& image, std::ostream& out,
              std::ostream& err) {
  ConfigFile file = base_config(g);
  if (!file.has("run.out")) file.set_literal("run.out", "solve_out");
  kf.apply(file);
  if (!image && !file.has("dataset.source")) file.set_literal("dataset.source", "generator");
  ExperimentConfig cfg = ExperimentConfig::from_file(file);
  if (cfg.generator_path.empty()) throw ConfigError("solve needs --generator or generator.path");
  if (cfg.m_values.size() != 1) throw ConfigError("solve needs exactly one measurement count (--m)");
  if (cfg.noise.percent.size() != 1) throw ConfigError("solve needs exactly one noise level (--noise)");
  cfg.solver.validate();
  const GeneratorModel model = load_generator(cfg.generator_path);
  const ImageTensor x = target_image(cfg, model, image, err);

  std::optional<TMDataset> tm;
  if (cfg.op.family == OperatorFamily::transmission_matrix) {
    if (cfg.op.tm_path.empty()) throw ConfigError("TM operator needs --tm or operator.tm_path");
    tm = read_prtm(cfg.op.tm_path);
  }
  const std::size_t m = cfg.m_values.front();
  const double pct = cfg.noise.percent.front();
  const std::uint64_t seed = cell_seed(cfg.seed, 0, m, pct, 0);
  const auto op = build_operator(cfg.op, model.output_shape(), m, mix_seed(seed, {1}), tm ? &*tm : nullptr);
  if (op.cols() != model.output_size()) {
    throw DimensionError("operator acts on n = " + std::to_string(op.cols()) + " values but the generator output " +
                         to_string(model.output_shape()) + " has " + std::to_string(model.output_size()));
  }
  const auto y = measure_magnitude(op, x, pct, cfg.noise.mode, mix_seed(seed, {2}));
  SolverConfig sc = cfg.solver;
  sc.seed = mix_seed(seed, {3});
  const auto result = solve(model, op, y.y, sc);

  std::map<std::string, std::string> meta{{"command", "solve"},
                                          {"generator", cfg.generator_path.string()},
                                          {"operator", to_string(cfg.op.family)},
                                          {"m", std::to_string(m)},
                                          {"noise_pct", format_metric(pct)},
                                          {"noise_mode", to_string(cfg.noise.mode)},
                                          {"noise_sigma", format_metric(y.noise_sigma)},
                                          {"master_seed", std::to_string(cfg.seed)}};
  write_solve_report(cfg.out_dir, "x_hat", sc, result, meta, &x, cfg.resolve_sign);
  if (x.shape.c == 1 || x.shape.c == 3) write_png(x, cfg.out_dir / "target.png");
  const auto s = score(x, result.best().x_hat, 1.0, cfg.resolve_sign);
  out << "best restart " << result.best_index << " residual " << format_metric(result.best().residual) << " psnr "
      << format_metric(s.psnr_db) << " dB\n";
  out << cfg.out_dir.string() << "\n";
  return 0;
}

int cmd_project(const Globals& g, const KeyFlags& kf, const std::string& image, std::ostream& out) {
  ConfigFile file = base_config(g);
  if (!file.has("run.out")) file.set_literal("run.out", "range_out");
  kf.apply(file);
  ExperimentConfig cfg = ExperimentConfig::from_file(file);
  if (cfg.generator_path.empty()) throw ConfigError("project-range needs --generator or generator.path");
  cfg.solver.validate();
  const GeneratorModel model = load_generator(cfg.generator_path);
  const ImageTensor x = fit_to_shape(read_image(image), model.output_shape(), cfg.dataset.zero_pad);
  SolverConfig sc = cfg.solver;
  sc.seed = mix_seed(cfg.seed, {0, 0x7a2ce});
  const auto result = project_to_range_all(model, x, sc);
  std::map<std::string, std::string> meta{{"command", "project-range"},
                                          {"generator", cfg.generator_path.string()},
                                          {"image", image},
                                          {"master_seed", std::to_string(cfg.seed)}};
  write_solve_report(cfg.out_dir, "range", sc, result, meta, &x);
  out << "best restart " << result.best_index << " residual " << format_metric(result.best().residual) << "\n";
  out << cfg.out_dir.string() << "\n";
  return 0;
}

int cmd_sweep(const Globals& g, const KeyFlags& kf, std::ostream& out, std::ostream& err) {
  if (!g.config) throw ConfigError("sweep needs --config <file>");
  ConfigFile file = base_config(g);
  kf.apply(file);
  const ExperimentConfig cfg = ExperimentConfig::from_file(file);
  const SweepReport rep = run_sweep(cfg, &err);
  if (!rep.failures.empty()) err << rep.failures.size() << " cell(s) failed; see failures.csv\n";
  out << rep.bundle.string() << "\n";
  return 0;
}

Shape3 parse_shape(const std::string& s) {
  Shape3 shape{};
  char x1 = 0;
  char x2 = 0;
  std::istringstream in(s);
  if (!(in >> shape.h >> x1 >> shape.w) || x1 != 'x') throw ConfigError("shape must look like HxW or HxWxC");
  if (in >> x2) {
    if (x2 != 'x' || !(in >> shape.c)) throw ConfigError("shape must look like HxW or HxWxC");
  }
  std::string rest;
  if (in >> rest) throw ConfigError("shape must look like HxW or HxWxC");
  return shape;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Phase retrieval with a generative prior", "phasegen"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--config", g.config, "Configuration file (flat key = value, [section] prefixes)");
  app.add_option("--out", g.out, "Output directory");

  KeyFlags solve_flags;
  std::optional<std::string> solve_image;
  auto* solve_cmd = app.add_subcommand("solve", "Recover one image from synthesized magnitude measurements");
  solve_flags.add(solve_cmd, "--generator", "generator.path", "Generator weights (.prgw)");
  solve_cmd->add_option("--image", solve_image, "Target image (PNG/PGM/PPM); default is an in-range sample");
  solve_flags.add(solve_cmd, "--latent-seed", "dataset.selection_seed", "Seed of the in-range target sample");
  solve_flags.add(solve_cmd, "--family", "operator.family", "Operator: gaussian | cdp | tm");
  solve_flags.add(solve_cmd, "--m", "sweep.m", "Number of measurements");
  solve_flags.add(solve_cmd, "--masks", "operator.masks", "CDP mask count");
  solve_flags.add(solve_cmd, "--tm", "operator.tm_path", "Transmission matrix file (.prtm)");
  solve_flags.add(solve_cmd, "--tm-threshold", "operator.tm_threshold", "Maximum TM row residual");
  solve_flags.add(solve_cmd, "--noise", "noise.percent", "Noise level in percent");
  solve_flags.add(solve_cmd, "--noise-mode", "noise.mode", "Noise mode: relative | absolute");
  add_solver_flags(solve_cmd, solve_flags);

  KeyFlags project_flags;
  std::string project_image;
  auto* project_cmd = app.add_subcommand("project-range", "Project an image onto the generator range");
  project_flags.add(project_cmd, "--generator", "generator.path", "Generator weights (.prgw)");
  project_cmd->add_option("--image", project_image, "Image to project")->required();
  add_solver_flags(project_cmd, project_flags);

  KeyFlags sweep_flags;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a measurement / noise sweep from a config file");
  sweep_flags.add(sweep_cmd, "--workers", "run.workers", "Concurrent sweep cells");

  std::string info_path;
  auto* info_cmd = app.add_subcommand("gen-info", "Print the layer table of a generator file");
  info_cmd->add_option("model", info_path, "Generator weights (.prgw)")->required();

  std::string tm_output;
  std::string tm_matrix;
  std::string tm_residuals;
  bool tm_synthetic = false;
  std::size_t tm_rows = 2000;
  std::size_t tm_cols = 1600;
  std::optional<double> tm_sd;
  auto* tm_cmd = app.add_subcommand("make-tm", "Convert CSV transmission matrices or synthesize one");
  tm_cmd->add_option("output", tm_output, "Output .prtm file")->required();
  tm_cmd->add_option("--matrix", tm_matrix, "Matrix text file: rows of interleaved re, im values");
  tm_cmd->add_option("--residuals", tm_residuals, "Residual text file: one value per row");
  tm_cmd->add_flag("--synthetic", tm_synthetic, "Generate seeded complex Gaussian rows");
  tm_cmd->add_option("--rows", tm_rows, "Synthetic row count")->capture_default_str();
  tm_cmd->add_option("--cols", tm_cols, "Synthetic column count n")->capture_default_str();
  tm_cmd->add_option("--entry-sd", tm_sd, "Std. dev. of each real/imaginary part (default 1/sqrt(2 n))");

  std::string gen_output;
  std::string gen_arch = "mlp";
  std::size_t gen_latent = 10;
  std::string gen_shape = "16x16x1";
  std::size_t gen_hidden = 64;
  auto* gen_cmd = app.add_subcommand("make-synthetic-gen", "Write a seeded synthetic generator");
  gen_cmd->add_option("output", gen_output, "Output .prgw file")->required();
  gen_cmd->add_option("--arch", gen_arch, "Architecture: mlp | dcgan")->capture_default_str();
  gen_cmd->add_option("--latent-dim", gen_latent, "Latent dimension k")->capture_default_str();
  gen_cmd->add_option("--shape", gen_shape, "Output shape HxWxC")->capture_default_str();
  gen_cmd->add_option("--hidden", gen_hidden, "Hidden width")->capture_default_str();

  std::vector<std::string> argv_store{"phasegen"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*solve_cmd) return cmd_solve(g, solve_flags, solve_image, out, err);
    if (*project_cmd) return cmd_project(g, project_flags, project_image, out);
    if (*sweep_cmd) return cmd_sweep(g, sweep_flags, out, err);
    if (*info_cmd) {
      write_manifest(load_generator(info_path), out);
      return 0;
    }
    if (*tm_cmd) {
      TMDataset tm;
      if (tm_synthetic) {
        if (!tm_matrix.empty() || !tm_residuals.empty()) {
          throw ConfigError("--synthetic cannot be combined with --matrix/--residuals");
        }
        if (tm_cols == 0) throw ConfigError("--cols must be >= 1");
        const double sd = tm_sd.value_or(1.0 / std::sqrt(2.0 * static_cast<double>(tm_cols)));
        tm = make_synthetic_tm(tm_rows, tm_cols, g.seed.value_or(0), sd);
      } else {
        if (tm_matrix.empty() || tm_residuals.empty()) {
          throw ConfigError("make-tm needs --matrix and --residuals, or --synthetic");
        }
        tm = read_tm_text(tm_matrix, tm_residuals);
      }
      write_prtm(tm, tm_output);
      out << tm_output << " (" << tm.rows() << " x " << tm.cols() << ", " << qualifying_rows(tm, 0.4).size()
          << " rows with residual < 0.4)\n";
      return 0;
    }
    if (*gen_cmd) {
      SyntheticSpec spec;
      spec.seed = g.seed.value_or(spec.seed);
      spec.arch = parse_synthetic_arch(gen_arch);
      spec.latent_dim = gen_latent;
      spec.output = parse_shape(gen_shape);
      spec.hidden = gen_hidden;
      const GeneratorModel model = make_synthetic_generator(spec);
      save_generator(model, gen_output);
      write_manifest(model, out);
      return 0;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DimensionError& e) {
    err << "dimension error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace phasegen::cli
