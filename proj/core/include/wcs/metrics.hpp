#pragma once

#include "wcs/image.hpp"

namespace wcs {

struct QualityReport {
    double psnr_db = 0.0;  // +infinity for identical images
    double ssim = 0.0;
};

/// Mean squared error in 8-bit units (intensities scaled by 255).
double mse_8bit(const Image& ref, const Image& test);

/// 10 log10(255^2 / MSE); +infinity when MSE is zero.
double psnr(const Image& ref, const Image& test);

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
/// dynamic range 255, averaged over every fully contained window position.
double ssim(const Image& ref, const Image& test);

QualityReport evaluate(const Image& ref, const Image& test);

}  // namespace wcs
