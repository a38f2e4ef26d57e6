#include "deocc/ssim.hpp"

#include <cmath>

namespace deocc {
namespace {

struct Plane {
    std::size_t h;
    std::size_t w;
    std::vector<double> v;

    Plane(std::size_t height, std::size_t width) : h(height), w(width), v(height * width, 0.0) {}
    double& operator()(std::size_t y, std::size_t x) { return v[y * w + x]; }
    double operator()(std::size_t y, std::size_t x) const { return v[y * w + x]; }
};

Plane channel_plane(const ImageF& image, std::size_t c) {
    Plane out(image.height(), image.width());
    for (std::size_t p = 0; p < out.v.size(); ++p) {
        out.v[p] = image.storage()[p * image.channels() + c];
    }
    return out;
}

// Separable filter: rows first, then columns.
Plane filter(const Plane& in, const std::vector<double>& taps) {
    const long half = static_cast<long>(taps.size() / 2);
    const long h = static_cast<long>(in.h);
    const long w = static_cast<long>(in.w);
    Plane tmp(in.h, in.w);
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            double s = 0.0;
            for (long k = -half; k <= half; ++k) {
                s += taps[static_cast<std::size_t>(k + half)] *
                     in(static_cast<std::size_t>(y), static_cast<std::size_t>(reflect_index(x + k, w)));
            }
            tmp(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = s;
        }
    }
    Plane out(in.h, in.w);
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            double s = 0.0;
            for (long k = -half; k <= half; ++k) {
                s += taps[static_cast<std::size_t>(k + half)] *
                     tmp(static_cast<std::size_t>(reflect_index(y + k, h)), static_cast<std::size_t>(x));
            }
            out(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = s;
        }
    }
    return out;
}

// Transpose of `filter`: columns first, then rows, scattering through the reflection.
Plane filter_adjoint(const Plane& in, const std::vector<double>& taps) {
    const long half = static_cast<long>(taps.size() / 2);
    const long h = static_cast<long>(in.h);
    const long w = static_cast<long>(in.w);
    Plane tmp(in.h, in.w);
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            const double g = in(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
            for (long k = -half; k <= half; ++k) {
                tmp(static_cast<std::size_t>(reflect_index(y + k, h)), static_cast<std::size_t>(x)) +=
                    taps[static_cast<std::size_t>(k + half)] * g;
            }
        }
    }
    Plane out(in.h, in.w);
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            const double g = tmp(static_cast<std::size_t>(y), static_cast<std::size_t>(x));
            for (long k = -half; k <= half; ++k) {
                out(static_cast<std::size_t>(y), static_cast<std::size_t>(reflect_index(x + k, w))) +=
                    taps[static_cast<std::size_t>(k + half)] * g;
            }
        }
    }
    return out;
}

Plane product(const Plane& a, const Plane& b) {
    Plane out(a.h, a.w);
    for (std::size_t i = 0; i < out.v.size(); ++i) {
        out.v[i] = a.v[i] * b.v[i];
    }
    return out;
}

struct LocalStats {
    Plane mu_x, mu_y, var_x, var_y, cov;
};

LocalStats local_stats(const Plane& x, const Plane& y, const std::vector<double>& taps) {
    LocalStats s{filter(x, taps), filter(y, taps), filter(product(x, x), taps), filter(product(y, y), taps),
                 filter(product(x, y), taps)};
    for (std::size_t i = 0; i < x.v.size(); ++i) {
        s.var_x.v[i] -= s.mu_x.v[i] * s.mu_x.v[i];
        s.var_y.v[i] -= s.mu_y.v[i] * s.mu_y.v[i];
        s.cov.v[i] -= s.mu_x.v[i] * s.mu_y.v[i];
    }
    return s;
}

void check_inputs(const ImageF& x, const ImageF& y, const SsimParams& params) {
    require_same_shape(x, y, "ssim_map");
    if (params.window_size == 0 || params.window_size % 2 == 0) {
        throw ContractError("ssim_map: window size must be odd");
    }
    if (!(params.sigma > 0.0)) {
        throw ContractError("ssim_map: window sigma must be positive");
    }
}

}  // namespace

std::vector<double> gaussian_window(std::size_t size, double sigma) {
    std::vector<double> taps(size);
    const double centre = static_cast<double>(size / 2);
    double total = 0.0;
    for (std::size_t i = 0; i < size; ++i) {
        const double d = static_cast<double>(i) - centre;
        taps[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        total += taps[i];
    }
    for (double& t : taps) {
        t /= total;
    }
    return taps;
}

long reflect_index(long i, long n) {
    if (n <= 1) {
        return 0;
    }
    const long period = 2 * (n - 1);
    long m = i % period;
    if (m < 0) {
        m += period;
    }
    return m < n ? m : period - m;
}

ImageF ssim_map(const ImageF& x, const ImageF& y, const SsimParams& params) {
    check_inputs(x, y, params);
    const auto taps = gaussian_window(params.window_size, params.sigma);
    ImageF out(x.height(), x.width(), 1);
    const auto channels = static_cast<double>(x.channels());
    for (std::size_t c = 0; c < x.channels(); ++c) {
        const LocalStats s = local_stats(channel_plane(x, c), channel_plane(y, c), taps);
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double mx = s.mu_x.v[i];
            const double my = s.mu_y.v[i];
            const double num = (2.0 * mx * my + params.c1) * (2.0 * s.cov.v[i] + params.c2);
            const double den = (mx * mx + my * my + params.c1) * (s.var_x.v[i] + s.var_y.v[i] + params.c2);
            out.storage()[i] += num / den;
        }
    }
    for (double& v : out.storage()) {
        v /= channels;
    }
    return out;
}

ImageF ssim_backward(const ImageF& x, const ImageF& y, const ImageF& upstream, const SsimParams& params) {
    check_inputs(x, y, params);
    if (upstream.height() != x.height() || upstream.width() != x.width() || upstream.channels() != 1) {
        throw ContractError("ssim_backward: upstream must be H x W x 1");
    }
    const auto taps = gaussian_window(params.window_size, params.sigma);
    const auto channels = static_cast<double>(x.channels());
    ImageF grad(x.height(), x.width(), x.channels());
    for (std::size_t c = 0; c < x.channels(); ++c) {
        const Plane xc = channel_plane(x, c);
        const Plane yc = channel_plane(y, c);
        const LocalStats s = local_stats(xc, yc, taps);
        // Upstream sensitivities to mu_x, E[x^2] and E[xy].
        Plane d_mu(x.height(), x.width());
        Plane d_xx(x.height(), x.width());
        Plane d_xy(x.height(), x.width());
        for (std::size_t i = 0; i < xc.v.size(); ++i) {
            const double a = upstream.storage()[i] / channels;
            if (a == 0.0) {
                continue;
            }
            const double mx = s.mu_x.v[i];
            const double my = s.mu_y.v[i];
            const double n1 = 2.0 * mx * my + params.c1;
            const double n2 = 2.0 * s.cov.v[i] + params.c2;
            const double d1 = mx * mx + my * my + params.c1;
            const double d2 = s.var_x.v[i] + s.var_y.v[i] + params.c2;
            const double ssim = (n1 * n2) / (d1 * d2);
            const double ds_dmu = 2.0 * my * n2 / (d1 * d2) - ssim * 2.0 * mx / d1;
            const double ds_dvar = -ssim / d2;
            const double ds_dcov = 2.0 * n1 / (d1 * d2);
            // var_x = E[x^2] - mu_x^2, cov = E[xy] - mu_x mu_y.
            d_mu.v[i] = a * (ds_dmu - 2.0 * mx * ds_dvar - my * ds_dcov);
            d_xx.v[i] = a * ds_dvar;
            d_xy.v[i] = a * ds_dcov;
        }
        const Plane g_mu = filter_adjoint(d_mu, taps);
        const Plane g_xx = filter_adjoint(d_xx, taps);
        const Plane g_xy = filter_adjoint(d_xy, taps);
        for (std::size_t i = 0; i < xc.v.size(); ++i) {
            grad.storage()[i * x.channels() + c] = g_mu.v[i] + 2.0 * xc.v[i] * g_xx.v[i] + yc.v[i] * g_xy.v[i];
        }
    }
    return grad;
}

}  // namespace deocc
