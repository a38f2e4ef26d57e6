#include "deocc/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <thread>

namespace deocc {
namespace {

constexpr std::int64_t kSubpixel = 256;
// Keeps edge-function products inside int64.
constexpr std::int64_t kCoordLimit = std::int64_t{1} << 29;

struct Fixed {
    std::int64_t x;
    std::int64_t y;
};

std::int64_t edge(const Fixed& a, const Fixed& b, const Fixed& p) {
    return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
}

// With positive-area orientation in y-down screen space, top edges run in +x
// and left edges run upwards (negative dy).
bool is_top_left(const Fixed& a, const Fixed& b) {
    const std::int64_t dx = b.x - a.x;
    const std::int64_t dy = b.y - a.y;
    return (dy == 0 && dx > 0) || dy < 0;
}

bool covers(std::int64_t w, bool top_left) {
    return w > 0 || (w == 0 && top_left);
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) {
        --q;
    }
    return q;
}

struct Buffers {
    ImageF* image;
    MaskF* mask;
    std::vector<double>* depth;
    std::vector<long>* triangle;
};

void rasterize_band(const PosedMesh& mesh, const Camera& camera, const SHCoeffs& sh, std::size_t row_begin,
                    std::size_t row_end, Buffers& out) {
    const auto width = static_cast<std::int64_t>(camera.width);
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        std::array<std::uint32_t, 3> idx = mesh.triangles[t];
        bool visible = true;
        std::array<Fixed, 3> s{};
        for (int k = 0; k < 3; ++k) {
            const Vec3& p = mesh.positions[idx[k]];
            if (!(p[2] > camera.z_near)) {
                visible = false;
                break;
            }
            const double u = camera.focal * p[0] / p[2] + camera.cx;
            const double v = camera.focal * p[1] / p[2] + camera.cy;
            const double fu = std::nearbyint(u * kSubpixel);
            const double fv = std::nearbyint(v * kSubpixel);
            if (!(std::abs(fu) < kCoordLimit && std::abs(fv) < kCoordLimit)) {
                visible = false;
                break;
            }
            s[k] = {static_cast<std::int64_t>(fu), static_cast<std::int64_t>(fv)};
        }
        if (!visible) {
            continue;
        }
        std::int64_t area = edge(s[0], s[1], s[2]);
        if (area == 0) {
            continue;
        }
        if (area < 0) {
            std::swap(s[1], s[2]);
            std::swap(idx[1], idx[2]);
            area = -area;
        }

        const std::int64_t min_x = std::min({s[0].x, s[1].x, s[2].x});
        const std::int64_t max_x = std::max({s[0].x, s[1].x, s[2].x});
        const std::int64_t min_y = std::min({s[0].y, s[1].y, s[2].y});
        const std::int64_t max_y = std::max({s[0].y, s[1].y, s[2].y});
        // Pixel i has its centre at 256 i + 128.
        const std::int64_t x0 = std::max<std::int64_t>(0, floor_div(min_x - kSubpixel / 2 + kSubpixel - 1, kSubpixel));
        const std::int64_t x1 = std::min<std::int64_t>(width - 1, floor_div(max_x - kSubpixel / 2, kSubpixel));
        const std::int64_t y0 = std::max<std::int64_t>(static_cast<std::int64_t>(row_begin),
                                                       floor_div(min_y - kSubpixel / 2 + kSubpixel - 1, kSubpixel));
        const std::int64_t y1 =
            std::min<std::int64_t>(static_cast<std::int64_t>(row_end) - 1, floor_div(max_y - kSubpixel / 2, kSubpixel));
        if (x0 > x1 || y0 > y1) {
            continue;
        }
        const bool tl0 = is_top_left(s[1], s[2]);
        const bool tl1 = is_top_left(s[2], s[0]);
        const bool tl2 = is_top_left(s[0], s[1]);
        const Vec3& p0 = mesh.positions[idx[0]];
        const Vec3& p1 = mesh.positions[idx[1]];
        const Vec3& p2 = mesh.positions[idx[2]];
        const double inv_z[3] = {1.0 / p0[2], 1.0 / p1[2], 1.0 / p2[2]};
        const auto inv_area = 1.0 / static_cast<double>(area);

        for (std::int64_t y = y0; y <= y1; ++y) {
            for (std::int64_t x = x0; x <= x1; ++x) {
                const Fixed c{x * kSubpixel + kSubpixel / 2, y * kSubpixel + kSubpixel / 2};
                const std::int64_t w0 = edge(s[1], s[2], c);
                const std::int64_t w1 = edge(s[2], s[0], c);
                const std::int64_t w2 = edge(s[0], s[1], c);
                if (!covers(w0, tl0) || !covers(w1, tl1) || !covers(w2, tl2)) {
                    continue;
                }
                const double b[3] = {static_cast<double>(w0) * inv_area, static_cast<double>(w1) * inv_area,
                                     static_cast<double>(w2) * inv_area};
                const double denom = b[0] * inv_z[0] + b[1] * inv_z[1] + b[2] * inv_z[2];
                const double depth = 1.0 / denom;
                const auto pixel = static_cast<std::size_t>(y) * camera.width + static_cast<std::size_t>(x);
                const double current = (*out.depth)[pixel];
                const long current_tri = (*out.triangle)[pixel];
                if (!(depth < current || (depth == current && static_cast<long>(t) < current_tri))) {
                    continue;
                }
                const double beta[3] = {b[0] * inv_z[0] * depth, b[1] * inv_z[1] * depth, b[2] * inv_z[2] * depth};
                Vec3 normal{0.0, 0.0, 0.0};
                Vec3 albedo{0.0, 0.0, 0.0};
                for (int k = 0; k < 3; ++k) {
                    for (int d = 0; d < 3; ++d) {
                        normal[d] += beta[k] * mesh.normals[idx[k]][d];
                        albedo[d] += beta[k] * mesh.albedo[idx[k]][d];
                    }
                }
                const double len = std::sqrt(normal[0] * normal[0] + normal[1] * normal[1] + normal[2] * normal[2]);
                if (len > 0.0) {
                    normal = {normal[0] / len, normal[1] / len, normal[2] / len};
                } else {
                    normal = {0.0, 0.0, 1.0};
                }
                const double shade = sh_shading(sh, normal);
                for (int d = 0; d < 3; ++d) {
                    out.image->storage()[pixel * 3 + static_cast<std::size_t>(d)] =
                        std::clamp(albedo[d] * shade, 0.0, 1.0);
                }
                (*out.mask)[pixel] = 1.0;
                (*out.depth)[pixel] = depth;
                (*out.triangle)[pixel] = static_cast<long>(t);
            }
        }
    }
}

}  // namespace

void Camera::validate() const {
    if (!(focal > 0.0)) {
        throw ContractError("Camera: focal length must be positive");
    }
    if (!(z_near > 0.0)) {
        throw ContractError("Camera: z_near must be positive");
    }
}

Camera Camera::for_size(std::size_t width, std::size_t height) {
    Camera c;
    c.width = width;
    c.height = height;
    c.focal = 1100.0 * static_cast<double>(std::min(width, height)) / 256.0;
    c.cx = static_cast<double>(width) / 2.0;
    c.cy = static_cast<double>(height) / 2.0;
    return c;
}

namespace sh_constants {
double y0() {
    return 1.0 / (2.0 * std::sqrt(std::numbers::pi));
}
double y1() {
    return std::sqrt(3.0) / (2.0 * std::sqrt(std::numbers::pi));
}
double y2() {
    return std::sqrt(15.0) / (2.0 * std::sqrt(std::numbers::pi));
}
double y6() {
    return std::sqrt(5.0) / (4.0 * std::sqrt(std::numbers::pi));
}
double y8() {
    return std::sqrt(15.0) / (4.0 * std::sqrt(std::numbers::pi));
}
}  // namespace sh_constants

namespace {

std::array<double, 9> sh_basis_unchecked(const Vec3& n) {
    const double x = n[0];
    const double y = n[1];
    const double z = n[2];
    const double c1 = sh_constants::y1();
    const double c2 = sh_constants::y2();
    return {sh_constants::y0(),
            c1 * y,
            c1 * z,
            c1 * x,
            c2 * x * y,
            c2 * y * z,
            sh_constants::y6() * (3.0 * z * z - 1.0),
            c2 * x * z,
            sh_constants::y8() * (x * x - y * y)};
}

}  // namespace

std::array<double, 9> sh_basis(const Vec3& normal) {
    const double len = std::sqrt(normal[0] * normal[0] + normal[1] * normal[1] + normal[2] * normal[2]);
    if (!(std::abs(len - 1.0) <= 1e-6)) {
        throw ContractError("sh_basis: normal must have unit length");
    }
    return sh_basis_unchecked(normal);
}

double sh_shading(const SHCoeffs& sh, const Vec3& normal) {
    const auto y = sh_basis_unchecked(normal);
    double s = 0.0;
    for (std::size_t k = 0; k < 9; ++k) {
        s += sh[k] * y[k];
    }
    return s;
}

RenderResult render(const PosedMesh& mesh, const Camera& camera, const SHCoeffs& sh, const RenderOptions& options) {
    camera.validate();
    const std::size_t pixels = camera.width * camera.height;
    RenderResult result{ImageF(camera.height, camera.width, 3), MaskF(camera.height, camera.width),
                        std::vector<double>(pixels, std::numeric_limits<double>::infinity()),
                        std::vector<long>(pixels, -1)};
    if (mesh.triangles.empty() || pixels == 0) {
        return result;
    }
    Buffers buffers{&result.image, &result.mask, &result.depth, &result.triangle};

    const std::size_t threads = std::clamp<std::size_t>(options.threads, 1, camera.height);
    if (threads == 1) {
        rasterize_band(mesh, camera, sh, 0, camera.height, buffers);
        return result;
    }
    // Bands own disjoint rows, so no synchronisation is needed on the buffers.
    std::vector<std::thread> pool;
    const std::size_t rows_per_band = (camera.height + threads - 1) / threads;
    for (std::size_t b = 0; b < threads; ++b) {
        const std::size_t begin = b * rows_per_band;
        const std::size_t end = std::min(camera.height, begin + rows_per_band);
        if (begin >= end) {
            break;
        }
        pool.emplace_back([&, begin, end] {
            Buffers local = buffers;
            rasterize_band(mesh, camera, sh, begin, end, local);
        });
    }
    for (auto& th : pool) {
        th.join();
    }
    return result;
}

SHCoeffs sh_from(const CoeffVector& coeffs) {
    SHCoeffs sh{};
    const auto ill = coeffs.illumination();
    std::copy(ill.begin(), ill.end(), sh.begin());
    return sh;
}

CoeffRender render_from_coeffs(const MorphableModel& model, const CoeffVector& coeffs, const Camera& camera,
                               const RenderOptions& options) {
    const PosedMesh mesh = synthesize(model, coeffs);
    CoeffRender out{render(mesh, camera, sh_from(coeffs), options), landmarks3d(mesh, model)};
    return out;
}

ImageF depth_image(const RenderResult& result) {
    return ImageF(result.mask.height(), result.mask.width(), 1, result.depth);
}

std::array<double, 2> mask_centroid(const MaskF& mask) {
    double sx = 0.0;
    double sy = 0.0;
    double n = 0.0;
    for (std::size_t y = 0; y < mask.height(); ++y) {
        for (std::size_t x = 0; x < mask.width(); ++x) {
            const double m = mask.at(y, x);
            sx += m * (static_cast<double>(x) + 0.5);
            sy += m * (static_cast<double>(y) + 0.5);
            n += m;
        }
    }
    if (n == 0.0) {
        return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    }
    return {sx / n, sy / n};
}

}  // namespace deocc
