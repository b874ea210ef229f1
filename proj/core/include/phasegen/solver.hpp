#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "phasegen/generator.hpp"
#include "phasegen/measure.hpp"
#include "phasegen/types.hpp"

namespace phasegen {

enum class LatentPrior : std::uint8_t { standard_normal, uniform };

std::string to_string(LatentPrior p);
LatentPrior parse_latent_prior(const std::string& s);

/// Restarted fixed-step gradient descent over the latent vector.
///
/// Defaults are R = 10 restarts of L = 10000 steps with step size 1e-3. The
/// step size assumes the Gaussian operator scaling of make_gaussian (E|Ax|^2 =
/// |x|^2) and generator outputs in [0, 1]; other scalings may need a different
/// step or `line_search`.
struct SolverConfig {
  std::size_t restarts = 10;
  std::size_t iterations = 10000;
  double step_size = 1e-3;
  LatentPrior prior = LatentPrior::standard_normal;
  std::uint64_t seed = 0;
  Precision precision = Precision::f32;
  std::size_t loss_trace_stride = 100;
  /// Armijo backtracking starting from the previous accepted step (first step: step_size).
  bool line_search = false;
  /// Stop a chain once its loss drops below this value; 0 disables.
  double stop_tolerance = 0.0;
  /// Worker threads for restarts; 0 uses the hardware concurrency.
  std::size_t threads = 0;

  /// Throws ConfigError when a bound is violated.
  void validate() const;
};

/// A chain is flagged diverged once its loss exceeds this or is non-finite.
inline constexpr double kDivergenceLoss = 1e12;

struct RestartResult {
  std::size_t index = 0;
  LatentVector z_final;
  ImageTensor x_hat;  // forward(model, z_final) at the configured precision
  double residual = 0.0;
  std::vector<double> loss_trace;  // loss at t = 0, s, 2s, ... and at the final iterate
  std::size_t iterations_run = 0;
  bool diverged = false;
};

struct SolveResult {
  std::size_t best_index = 0;
  std::vector<RestartResult> restarts;

  [[nodiscard]] const RestartResult& best() const { return restarts[best_index]; }
};

/// |y - |A G(z)||^2. Throws DimensionError on any size mismatch.
double loss(const GeneratorModel& model, const MeasurementOperator& op, std::span<const double> y,
            const LatentVector& z, Precision p = Precision::f32);

/// Gradient of `loss` with respect to z:
///   u = A G(z),  r = |u| - y,  phase_i = u_i/|u_i| (0 when u_i = 0),
///   grad = J_G(z)^T * 2 Re(A^H (r .* phase)).
LatentVector grad_loss(const GeneratorModel& model, const MeasurementOperator& op, std::span<const double> y,
                       const LatentVector& z, Precision p = Precision::f32);

/// Runs `config.restarts` independent chains; restart j draws its start from a
/// stream seeded by mix_seed(config.seed, {j}). The best chain is the
/// non-diverged one with the smallest residual (ties go to the lower index).
/// Throws SolveFailed if every chain diverges.
SolveResult solve(const GeneratorModel& model, const MeasurementOperator& op, std::span<const double> y,
                  const SolverConfig& config);

/// argmin_z |G(z) - target|^2 using the same restarted descent. The residual of
/// the returned result is that squared distance.
RestartResult project_to_range(const GeneratorModel& model, const ImageTensor& target, const SolverConfig& config);

/// Same as project_to_range but keeps every restart.
SolveResult project_to_range_all(const GeneratorModel& model, const ImageTensor& target, const SolverConfig& config);

/// Draws a latent vector from the prior.
LatentVector draw_latent(std::size_t dim, LatentPrior prior, std::uint64_t seed);

}  // namespace phasegen
