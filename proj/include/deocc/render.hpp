#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "deocc/image.hpp"
#include "deocc/morphable.hpp"

namespace deocc {

/// Pinhole camera at the origin looking down +z; u = f x / z + cx, v = f y / z + cy.
struct Camera {
    double focal = 1100.0;
    double cx = 128.0;
    double cy = 128.0;
    std::size_t width = 256;
    std::size_t height = 256;
    double z_near = 0.1;

    void validate() const;

    /// Focal 1100 px at 256 px, scaled with min(width, height); centred principal point.
    static Camera for_size(std::size_t width, std::size_t height);
};

using SHCoeffs = std::array<double, 9>;

/// Closed-form real SH normalisation constants for bands 0-2.
namespace sh_constants {
double y0();  // 1 / (2 sqrt(pi))
double y1();  // sqrt(3) / (2 sqrt(pi))
double y2();  // sqrt(15) / (2 sqrt(pi)), for xy, yz, xz
double y6();  // sqrt(5) / (4 sqrt(pi))
double y8();  // sqrt(15) / (4 sqrt(pi))
}  // namespace sh_constants

/**
 * Real SH basis [Y0 .. Y8] at a unit normal (x, y, z):
 * Y0 = 0.282095, (Y1, Y2, Y3) = 0.488603 (y, z, x), Y4 = 1.092548 xy,
 * Y5 = 1.092548 yz, Y6 = 0.315392 (3z^2 - 1), Y7 = 1.092548 xz,
 * Y8 = 0.546274 (x^2 - y^2). Constants are evaluated in closed form.
 */
std::array<double, 9> sh_basis(const Vec3& normal);

/// Sum_k sh_k Y_k(n), without the unit-length check.
double sh_shading(const SHCoeffs& sh, const Vec3& normal);

struct RenderOptions {
    /// Row bands rendered concurrently; output is identical for any value.
    std::size_t threads = 1;
};

struct RenderResult {
    ImageF image;               // I_m, RGB
    MaskF mask;                 // M_m, binary
    std::vector<double> depth;  // H*W camera-space z, +inf where nothing was drawn
    /// Index of the winning triangle per pixel, -1 where empty.
    std::vector<long> triangle;
};

/**
 * Z-buffered rasterisation with perspective-correct interpolation.
 *
 * Vertices are snapped to a 1/256 px grid and edge functions are evaluated in
 * integer arithmetic, so the top-left rule is exact and shared edges are
 * watertight. Triangles with any vertex at z <= z_near are skipped. Visibility
 * keeps the smallest (depth, triangle index) pair.
 */
RenderResult render(const PosedMesh& mesh, const Camera& camera, const SHCoeffs& sh, const RenderOptions& options = {});

struct CoeffRender {
    RenderResult render;
    Landmarks landmarks;
};

CoeffRender render_from_coeffs(const MorphableModel& model, const CoeffVector& coeffs, const Camera& camera,
                               const RenderOptions& options = {});

SHCoeffs sh_from(const CoeffVector& coeffs);

/// Depth as a 1-channel image (for DTN1 output).
ImageF depth_image(const RenderResult& result);

/// Pixel-centre centroid (x, y) of a binary mask; NaN when empty.
std::array<double, 2> mask_centroid(const MaskF& mask);

}  // namespace deocc
