#include "phasegen/solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <random>
#include <thread>

#include "phasegen/error.hpp"
#include "phasegen/rng.hpp"

namespace phasegen {

std::string to_string(LatentPrior p) { return p == LatentPrior::standard_normal ? "normal" : "uniform"; }

LatentPrior parse_latent_prior(const std::string& s) {
  if (s == "normal" || s == "standard_normal") return LatentPrior::standard_normal;
  if (s == "uniform") return LatentPrior::uniform;
  throw ConfigError("unknown latent prior '" + s + "' (expected normal or uniform)");
}

void SolverConfig::validate() const {
  if (restarts < 1) throw ConfigError("solver restarts must be >= 1");
  if (!(step_size > 0.0) || !std::isfinite(step_size)) throw ConfigError("solver step size must be > 0");
  if (loss_trace_stride < 1) throw ConfigError("loss trace stride must be >= 1");
  if (!(stop_tolerance >= 0.0)) throw ConfigError("stop tolerance must be >= 0");
}

LatentVector draw_latent(std::size_t dim, LatentPrior prior, std::uint64_t seed) {
  Rng rng(seed);
  LatentVector z(dim);
  if (prior == LatentPrior::standard_normal) {
    std::normal_distribution<double> d(0.0, 1.0);
    for (auto& v : z) v = d(rng);
  } else {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (auto& v : z) v = d(rng);
  }
  return z;
}

namespace {

// Objectives evaluate the generator at precision T and everything downstream in double.

template <class T>
class MagnitudeObjective {
 public:
  MagnitudeObjective(const GeneratorModel& model, const MeasurementOperator& op, std::span<const double> y)
      : ev_(model), op_(&op), y_(y), z_(model.input_dim()), x_(model.output_size()), u_(op.rows()),
        w_(op.rows()), gx_(op.cols()), cot_(model.output_size()) {}

  double value(std::span<const double> z) {
    run_forward(z);
    double f = 0.0;
    for (std::size_t i = 0; i < u_.size(); ++i) {
      const double r = std::abs(u_[i]) - y_[i];
      f += r * r;
    }
    return f;
  }

  double value_and_gradient(std::span<const double> z, std::span<double> grad) {
    run_forward(z);
    double f = 0.0;
    for (std::size_t i = 0; i < u_.size(); ++i) {
      const double mag = std::abs(u_[i]);
      const double r = mag - y_[i];
      f += r * r;
      w_[i] = mag > 0.0 ? u_[i] * (r / mag) : cplx{};
    }
    op_->apply_adjoint_real(w_, gx_);
    for (std::size_t j = 0; j < gx_.size(); ++j) cot_[j] = static_cast<T>(2.0 * gx_[j]);
    const auto g = ev_.backward(cot_);
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = static_cast<double>(g[i]);
    return f;
  }

  [[nodiscard]] const std::vector<double>& image() const { return x_; }

 private:
  void run_forward(std::span<const double> z) {
    for (std::size_t i = 0; i < z.size(); ++i) z_[i] = static_cast<T>(z[i]);
    const auto out = ev_.forward(z_);
    for (std::size_t j = 0; j < out.size(); ++j) x_[j] = static_cast<double>(out[j]);
    op_->apply(x_, u_);
  }

  GeneratorEvaluator<T> ev_;
  const MeasurementOperator* op_;
  std::span<const double> y_;
  std::vector<T> z_;
  std::vector<double> x_;
  std::vector<cplx> u_;
  std::vector<cplx> w_;
  std::vector<double> gx_;
  std::vector<T> cot_;
};

template <class T>
class RangeObjective {
 public:
  RangeObjective(const GeneratorModel& model, std::span<const double> target)
      : ev_(model), target_(target), z_(model.input_dim()), x_(model.output_size()), cot_(model.output_size()) {}

  double value(std::span<const double> z) {
    run_forward(z);
    double f = 0.0;
    for (std::size_t j = 0; j < x_.size(); ++j) {
      const double d = x_[j] - target_[j];
      f += d * d;
    }
    return f;
  }

  double value_and_gradient(std::span<const double> z, std::span<double> grad) {
    run_forward(z);
    double f = 0.0;
    for (std::size_t j = 0; j < x_.size(); ++j) {
      const double d = x_[j] - target_[j];
      f += d * d;
      cot_[j] = static_cast<T>(2.0 * d);
    }
    const auto g = ev_.backward(cot_);
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] = static_cast<double>(g[i]);
    return f;
  }

  [[nodiscard]] const std::vector<double>& image() const { return x_; }

 private:
  void run_forward(std::span<const double> z) {
    for (std::size_t i = 0; i < z.size(); ++i) z_[i] = static_cast<T>(z[i]);
    const auto out = ev_.forward(z_);
    for (std::size_t j = 0; j < out.size(); ++j) x_[j] = static_cast<double>(out[j]);
  }

  GeneratorEvaluator<T> ev_;
  std::span<const double> target_;
  std::vector<T> z_;
  std::vector<double> x_;
  std::vector<T> cot_;
};

bool diverged_value(double f) { return !std::isfinite(f) || f > kDivergenceLoss; }

template <class Objective>
RestartResult run_chain(Objective& obj, const GeneratorModel& model, const SolverConfig& cfg, std::size_t index) {
  RestartResult res;
  res.index = index;
  LatentVector z = draw_latent(model.input_dim(), cfg.prior, mix_seed(cfg.seed, {index}));
  LatentVector grad(z.size());
  LatentVector trial(z.size());
  double step = cfg.step_size;
  const std::size_t stride = cfg.loss_trace_stride;

  std::size_t t = 0;
  std::size_t last_logged = std::numeric_limits<std::size_t>::max();
  for (; t < cfg.iterations; ++t) {
    const double f = obj.value_and_gradient(z, grad);
    if (t % stride == 0) {
      res.loss_trace.push_back(f);
      last_logged = t;
    }
    if (diverged_value(f) || !all_finite(grad)) {
      res.diverged = true;
      break;
    }
    if (cfg.stop_tolerance > 0.0 && f < cfg.stop_tolerance) break;

    if (!cfg.line_search) {
      for (std::size_t i = 0; i < z.size(); ++i) z[i] -= step * grad[i];
      continue;
    }
    double gnorm2 = 0.0;
    for (double g : grad) gnorm2 += g * g;
    if (gnorm2 == 0.0) break;
    double trial_f = 0.0;
    for (int halvings = 0; halvings < 60; ++halvings) {
      for (std::size_t i = 0; i < z.size(); ++i) trial[i] = z[i] - step * grad[i];
      trial_f = obj.value(trial);
      if (std::isfinite(trial_f) && trial_f <= f - 1e-4 * step * gnorm2) break;
      step *= 0.5;
    }
    z.swap(trial);
    step *= 2.0;
  }
  res.iterations_run = t;

  const double final_f = obj.value(z);
  if (last_logged != t) res.loss_trace.push_back(final_f);
  res.residual = final_f;
  if (diverged_value(final_f)) res.diverged = true;
  res.z_final = std::move(z);
  res.x_hat = ImageTensor(model.output_shape(), obj.image());
  return res;
}

template <class MakeObjective>
SolveResult run_restarts(const GeneratorModel& model, const SolverConfig& cfg, MakeObjective&& make) {
  cfg.validate();
  std::vector<RestartResult> results(cfg.restarts);
  std::size_t workers = cfg.threads == 0 ? std::max(1U, std::thread::hardware_concurrency()) : cfg.threads;
  workers = std::min(workers, cfg.restarts);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    try {
      for (std::size_t j = next++; j < cfg.restarts; j = next++) {
        auto run = [&]<class T>(T) {
          auto obj = make(T{});
          results[j] = run_chain(obj, model, cfg, j);
        };
        if (cfg.precision == Precision::f64) {
          run(double{});
        } else {
          run(float{});
        }
      }
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  SolveResult out;
  bool found = false;
  for (std::size_t j = 0; j < results.size(); ++j) {
    if (results[j].diverged) continue;
    if (!found || results[j].residual < results[out.best_index].residual) {
      out.best_index = j;
      found = true;
    }
  }
  if (!found) throw SolveFailed("all " + std::to_string(cfg.restarts) + " restarts diverged");
  out.restarts = std::move(results);
  return out;
}

void check_problem(const GeneratorModel& model, const MeasurementOperator& op, std::span<const double> y) {
  if (model.output_size() != op.cols()) {
    throw DimensionError("generator output " + to_string(model.output_shape()) + " has " +
                         std::to_string(model.output_size()) + " values but the operator expects n = " +
                         std::to_string(op.cols()));
  }
  if (y.size() != op.rows()) {
    throw DimensionError("measurement vector has length " + std::to_string(y.size()) + ", operator has m = " +
                         std::to_string(op.rows()));
  }
}

void check_latent(const GeneratorModel& model, const LatentVector& z) {
  if (z.size() != model.input_dim()) {
    throw DimensionError("latent vector has length " + std::to_string(z.size()) + ", generator expects " +
                         std::to_string(model.input_dim()));
  }
}

}  // namespace

double loss(const GeneratorModel& model, const MeasurementOperator& op, std::span<const double> y,
            const LatentVector& z, Precision p) {
  check_problem(model, op, y);
  check_latent(model, z);
  if (p == Precision::f64) {
    MagnitudeObjective<double> obj(model, op, y);
    return obj.value(z);
  }
  MagnitudeObjective<float> obj(model, op, y);
  return obj.value(z);
}

LatentVector grad_loss(const GeneratorModel& model, const MeasurementOperator& op, std::span<const double> y,
                       const LatentVector& z, Precision p) {
  check_problem(model, op, y);
  check_latent(model, z);
  LatentVector g(z.size());
  if (p == Precision::f64) {
    MagnitudeObjective<double> obj(model, op, y);
    obj.value_and_gradient(z, g);
  } else {
    MagnitudeObjective<float> obj(model, op, y);
    obj.value_and_gradient(z, g);
  }
  return g;
}

SolveResult solve(const GeneratorModel& model, const MeasurementOperator& op, std::span<const double> y,
                  const SolverConfig& config) {
  check_problem(model, op, y);
  return run_restarts(model, config, [&]<class T>(T) { return MagnitudeObjective<T>(model, op, y); });
}

SolveResult project_to_range_all(const GeneratorModel& model, const ImageTensor& target,
                                 const SolverConfig& config) {
  if (target.shape != model.output_shape() || target.data.size() != model.output_size()) {
    throw DimensionError("target shape " + to_string(target.shape) + " does not match generator output " +
                         to_string(model.output_shape()));
  }
  std::span<const double> t(target.data);
  return run_restarts(model, config, [&]<class T>(T) { return RangeObjective<T>(model, t); });
}

RestartResult project_to_range(const GeneratorModel& model, const ImageTensor& target, const SolverConfig& config) {
  auto all = project_to_range_all(model, target, config);
  return std::move(all.restarts[all.best_index]);
}

}  // namespace phasegen
