#pragma once

#include <cstddef>

#include "pnpdm/image.hpp"

namespace pnpdm {

struct MetricReport {
    double psnr; // +infinity for identical images
    double ssim;
    double rmse;
};

double rmse(const ImageGrid& a, const ImageGrid& b);
/// 10 log10(peak^2 / MSE); +infinity when MSE = 0.
double psnr(const ImageGrid& a, const ImageGrid& b, double peak = 1.0);

struct SsimParams {
    std::size_t window = 11;
    double gaussian_sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

/// Mean SSIM over all valid (fully inside) window positions.
double ssim(const ImageGrid& a, const ImageGrid& b, const SsimParams& params = {});

MetricReport evaluate(const ImageGrid& reference, const ImageGrid& estimate);

/// Cubic convolution (Keys, a = -0.5), half-pixel centers, edge-clamped.
ImageGrid bicubic_upsample(const ImageGrid& lr, std::size_t factor);
/// The interpolation kernel itself.
double cubic_kernel(double t, double a = -0.5);

} // namespace pnpdm
