#pragma once

#include <cstddef>
#include <vector>

#include "deocc/image.hpp"

namespace deocc {

/// Gaussian-window SSIM for dynamic range 1.
struct SsimParams {
    std::size_t window_size = 11;
    double sigma = 1.5;
    double c1 = 0.01 * 0.01;
    double c2 = 0.03 * 0.03;
};

/// Normalised 1-D Gaussian taps, centred on window_size / 2.
std::vector<double> gaussian_window(std::size_t size, double sigma);

/// Mirror index without edge repetition (-1 -> 1, n -> n - 2).
long reflect_index(long i, long n);

/**
 * Per-pixel SSIM averaged over channels, returned as an H x W x 1 image.
 *
 * Local statistics use a separable Gaussian window with reflection padding:
 * SSIM = ((2 mu_x mu_y + C1)(2 s_xy + C2)) / ((mu_x^2 + mu_y^2 + C1)(s_x^2 + s_y^2 + C2)).
 */
ImageF ssim_map(const ImageF& x, const ImageF& y, const SsimParams& params = {});

/// d(sum_p upstream(p) * SSIM(p)) / dx for a given upstream map (H x W x 1).
ImageF ssim_backward(const ImageF& x, const ImageF& y, const ImageF& upstream, const SsimParams& params = {});

}  // namespace deocc
