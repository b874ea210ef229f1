#pragma once

#include "phasegen/types.hpp"

namespace phasegen {

struct SsimResult {
  double value = 0.0;
  /// True when the image was smaller than the 11x11 window and a uniform
  /// window of side min(h, w, 7) was used instead.
  bool fallback_window = false;
};

struct ScoreReport {
  double psnr_db = 0.0;  // +infinity when the images are identical
  double ssim = 0.0;
  double per_pixel_mse = 0.0;
  bool sign_resolved = false;  // true when the reconstruction was negated before scoring
  bool ssim_fallback = false;
};

/// 10 log10(peak^2 / MSE); +infinity when MSE = 0.
double psnr(const ImageTensor& x, const ImageTensor& x_hat, double peak = 1.0);

/// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5),
/// C1 = (0.01 peak)^2, C2 = (0.03 peak)^2, averaged over valid window
/// positions and then over channels.
SsimResult ssim_detailed(const ImageTensor& x, const ImageTensor& x_hat, double peak = 1.0);
double ssim(const ImageTensor& x, const ImageTensor& x_hat, double peak = 1.0);

/// Sum of squared differences divided by the number of values.
double per_pixel_error(const ImageTensor& x, const ImageTensor& x_hat);

struct SignResolution {
  ImageTensor image;
  int sign = 1;
};

/// The s in {+1, -1} minimising |x_ref - s x_hat|; ties go to +1.
SignResolution resolve_sign(const ImageTensor& x_ref, const ImageTensor& x_hat);

/// All three metrics; with `resolve_global_sign` the reconstruction is first
/// passed through resolve_sign.
ScoreReport score(const ImageTensor& x, const ImageTensor& x_hat, double peak = 1.0,
                  bool resolve_global_sign = false);

}  // namespace phasegen
