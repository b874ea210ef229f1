#include <gtest/gtest.h>

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "phasegen/error.hpp"
#include "phasegen/harness.hpp"
#include "phasegen/image_io.hpp"
#include "phasegen/prgw.hpp"
#include "phasegen/rng.hpp"
#include "test_support.hpp"

using namespace phasegen;
using testing_support::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

ExperimentConfig small_sweep(const TempDir& dir) {
  save_generator(testing_support::small_mlp(3, {4, 4, 1}, 2, 8), dir / "g.prgw");
  ExperimentConfig c;
  c.generator_path = dir / "g.prgw";
  c.dataset.source = DatasetSource::generator;
  c.dataset.count = 2;
  c.m_values = {8, 16};
  c.noise.percent = {0, 10};
  c.trials = 2;
  c.solver.restarts = 2;
  c.solver.iterations = 50;
  c.solver.step_size = 0.05;
  c.out_dir = dir / "out";
  c.seed = 5;
  return c;
}

}  // namespace

TEST(Harness, CellSeedMixesEveryCoordinate) {
  const auto base = cell_seed(1, 0, 10, 5.0, 0);
  EXPECT_EQ(base, cell_seed(1, 0, 10, 5.0, 0));
  EXPECT_NE(base, cell_seed(2, 0, 10, 5.0, 0));
  EXPECT_NE(base, cell_seed(1, 1, 10, 5.0, 0));
  EXPECT_NE(base, cell_seed(1, 0, 11, 5.0, 0));
  EXPECT_NE(base, cell_seed(1, 0, 10, 5.5, 0));
  EXPECT_NE(base, cell_seed(1, 0, 10, 5.0, 1));
  EXPECT_EQ(base, mix_seed(1, {0, 10, std::bit_cast<std::uint64_t>(5.0), 0}));
}

TEST(Harness, CsvFormatting) {
  EXPECT_EQ(format_metric(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_EQ(format_metric(20.0), "20");
  RunRecord r;
  r.item = 1;
  r.m = 40;
  r.noise_pct = 5;
  r.trial = 2;
  r.psnr_orig = std::numeric_limits<double>::infinity();
  r.psnr_range = 31.25;
  r.ssim_orig = 1;
  r.ssim_range = 0.5;
  r.ppe = 0;
  r.residual = 1e-9;
  r.wall_ms = 12.3456;
  std::ostringstream out;
  write_run_csv({r}, out);
  const auto ls = lines(out.str());
  ASSERT_EQ(ls.size(), 2U);
  EXPECT_EQ(ls[0], "item,m,noise_pct,trial,psnr_orig,psnr_range,ssim_orig,ssim_range,ppe,residual,wall_ms");
  EXPECT_EQ(ls[1], "1,40,5,2,inf,31.25,1,0.5,0,1e-09,12.346");

  std::ostringstream fail;
  write_failure_csv({{0, 8, 0, 1, 99, "bad \"thing\", here"}}, fail);
  const auto fl = lines(fail.str());
  ASSERT_EQ(fl.size(), 2U);
  EXPECT_EQ(fl[0], "item,m,noise_pct,trial,seed,error");
  EXPECT_EQ(fl[1], "0,8,0,1,99,\"bad \"\"thing\"\", here\"");
}

TEST(Harness, BuildOperatorFamilies) {
  const Shape3 s{4, 4, 1};
  EXPECT_EQ(build_operator({}, s, 7, 1, nullptr).rows(), 7U);
  OperatorSpec cdp;
  cdp.family = OperatorFamily::cdp;
  EXPECT_EQ(build_operator(cdp, s, 8, 1, nullptr).rows(), 8U);
  EXPECT_THROW(build_operator(cdp, s, 7, 1, nullptr), ConfigError);
  OperatorSpec tmspec;
  tmspec.family = OperatorFamily::transmission_matrix;
  EXPECT_THROW(build_operator(tmspec, s, 4, 1, nullptr), ConfigError);
  const auto tm = make_synthetic_tm(50, 16, 1, 0.2);
  EXPECT_EQ(build_operator(tmspec, s, 4, 1, &tm).rows(), 4U);
}

TEST(Harness, DirectoryDatasetSelection) {
  TempDir dir("ds");
  save_generator(testing_support::small_mlp(3, {6, 6, 1}), dir / "g.prgw");
  std::filesystem::create_directories(dir / "imgs");
  for (int i = 0; i < 6; ++i) {
    ImageTensor img({4, 4, 1});
    for (auto& v : img.data) v = i / 10.0;
    write_png(img, dir / "imgs" / ("img" + std::to_string(i) + ".png"));
  }
  const auto model = load_generator(dir / "g.prgw");
  ExperimentConfig c;
  c.generator_path = dir / "g.prgw";
  c.dataset.directory = dir / "imgs";
  c.dataset.count = 3;
  c.dataset.selection_seed = 4;
  const auto a = load_dataset(c, model);
  ASSERT_EQ(a.images.size(), 3U);
  EXPECT_TRUE(std::is_sorted(a.names.begin(), a.names.end()));
  EXPECT_EQ(a.images[0].shape, (Shape3{6, 6, 1}));
  EXPECT_EQ(a.names, load_dataset(c, model).names);
  c.dataset.files = {"img5.png", "img1.png"};
  const auto b = load_dataset(c, model);
  EXPECT_EQ(b.names, (std::vector<std::string>{"img5.png", "img1.png"}));
  EXPECT_NEAR(b.images[0].at(1, 1, 0), 0.5, 1.0 / 255);
}

TEST(Harness, SweepWritesCompleteBundle) {
  TempDir dir("sweep");
  auto cfg = small_sweep(dir);
  const auto rep = run_sweep(cfg);
  EXPECT_EQ(rep.records.size(), 16U);
  EXPECT_TRUE(rep.failures.empty());
  for (const char* f : {"runs.csv", "failures.csv", "summary.json", "effective_config.toml", "grid_m8_noise0.png",
                        "grid_m16_noise10.png"}) {
    EXPECT_TRUE(std::filesystem::exists(cfg.out_dir / f)) << f;
  }
  const auto rows = lines(slurp(cfg.out_dir / "runs.csv"));
  ASSERT_EQ(rows.size(), 17U);
  EXPECT_EQ(rows[0], kRunCsvHeader);
  EXPECT_EQ(rows[1].substr(0, 8), "0,8,0,0,");
  const auto summary = nlohmann::json::parse(slurp(cfg.out_dir / "summary.json"));
  EXPECT_EQ(summary["cell_count"], 16);
  EXPECT_EQ(summary["failure_count"], 0);
  EXPECT_EQ(summary["master_seed"], 5);
  ASSERT_EQ(summary["cells"].size(), 4U);
  EXPECT_EQ(summary["cells"][0]["count"], 4);
  EXPECT_TRUE(summary["cells"][0]["psnr_range"].contains("mean"));

  const auto grid = read_image(cfg.out_dir / "grid_m8_noise0.png");
  EXPECT_EQ(grid.shape.h, 3 * 4 + 4 * 2);
  EXPECT_EQ(grid.shape.w, 2 * 4 + 3 * 2);

  auto reread = ConfigFile::load(cfg.out_dir / "effective_config.toml");
  const auto echo = ExperimentConfig::from_file(reread);
  EXPECT_EQ(echo.m_values, cfg.m_values);
  EXPECT_EQ(echo.seed, cfg.seed);
}

TEST(Harness, SweepIsDeterministicAcrossWorkerCounts) {
  TempDir dir("det");
  auto cfg = small_sweep(dir);
  cfg.write_grids = false;
  const auto a = run_sweep(cfg);
  cfg.workers = 3;
  cfg.out_dir = dir / "out2";
  const auto b = run_sweep(cfg);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].item, b.records[i].item);
    EXPECT_EQ(a.records[i].m, b.records[i].m);
    EXPECT_EQ(a.records[i].seed, b.records[i].seed);
    EXPECT_EQ(a.records[i].residual, b.records[i].residual);
    EXPECT_EQ(a.records[i].psnr_range, b.records[i].psnr_range);
  }
}

TEST(Harness, FailedCellsGoToManifest) {
  TempDir dir("fail");
  auto cfg = small_sweep(dir);
  cfg.op.family = OperatorFamily::cdp;
  cfg.op.cdp_masks = 2;
  cfg.m_values = {8, 40};  // 40 / 2 masks exceeds n = 16
  cfg.noise.percent = {0};
  cfg.trials = 1;
  const auto rep = run_sweep(cfg);
  EXPECT_EQ(rep.records.size(), 2U);
  ASSERT_EQ(rep.failures.size(), 2U);
  for (const auto& f : rep.failures) EXPECT_EQ(f.m, 40U);
  EXPECT_EQ(lines(slurp(cfg.out_dir / "failures.csv")).size(), 3U);
  const auto summary = nlohmann::json::parse(slurp(cfg.out_dir / "summary.json"));
  EXPECT_EQ(summary["failure_count"], 2);
}

TEST(Harness, ConfigErrorsBeforeWork) {
  TempDir dir("cfgerr");
  auto cfg = small_sweep(dir);
  cfg.m_values.clear();
  EXPECT_THROW(run_sweep(cfg), ConfigError);
  EXPECT_FALSE(std::filesystem::exists(cfg.out_dir));

  auto shape = small_sweep(dir);
  shape.dataset.shape = {5, 5, 1};
  EXPECT_THROW(run_sweep(shape), ConfigError);
}

TEST(Harness, SolveReportFiles) {
  TempDir dir("report");
  const auto model = testing_support::small_mlp(3, {4, 4, 1});
  const auto op = make_gaussian(10, 16, 1);
  const auto truth = forward(model, {0.1, 0.2, 0.3});
  const auto y = measure_magnitude(op, truth, 0, NoiseMode::relative, 1);
  SolverConfig sc;
  sc.restarts = 2;
  sc.iterations = 20;
  const auto res = solve(model, op, y.y, sc);
  write_solve_report(dir / "r", "x_hat", sc, res, {{"family", "gaussian"}}, &truth);
  const auto j = nlohmann::json::parse(slurp(dir / "r" / "report.json"));
  EXPECT_EQ(j["meta"]["family"], "gaussian");
  EXPECT_EQ(j["solver"]["restarts"], 2);
  EXPECT_EQ(j["best_index"], res.best_index);
  EXPECT_TRUE(std::filesystem::exists(dir / "r" / "x_hat.png"));
  EXPECT_EQ(std::filesystem::file_size(dir / "r" / "x_hat.f32"), 16U * 4U);
}
