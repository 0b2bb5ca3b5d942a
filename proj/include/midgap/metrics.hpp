#pragma once
#include "midgap/tensor.hpp"

namespace midgap {

// 10 log10(1 / MSE) with peak 1; identical frames give +infinity.
double psnr(const Tensor& pred, const Tensor& truth);

// Mean local SSIM over an 11x11 Gaussian window (sigma 1.5), K1=0.01,
// K2=0.03, L=1, windows fully inside the frame. Color frames are scored per
// channel and averaged. Frames smaller than 11 use the largest odd window
// that fits.
double ssim(const Tensor& pred, const Tensor& truth);

Tensor clamp01_frame(const Tensor& frame);  // metric-side clamp, no gradients

}  // namespace midgap
