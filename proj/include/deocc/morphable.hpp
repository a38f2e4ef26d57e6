#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace deocc {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

inline constexpr std::size_t kRotationCount = 3;
inline constexpr std::size_t kTranslationCount = 3;
inline constexpr std::size_t kShapeCount = 144;
inline constexpr std::size_t kTextureCount = 80;
inline constexpr std::size_t kIlluminationCount = 9;
inline constexpr std::size_t kCoeffCount =
    kRotationCount + kTranslationCount + kShapeCount + kTextureCount + kIlluminationCount;
static_assert(kCoeffCount == 239);

/**
 * Reconstruction parameters, stored as
 * [rotation(3) | translation(3) | shape(144) | texture(80) | illumination(9)].
 *
 * Rotation is X-Y-Z intrinsic Euler angles in radians: R = Rz * Ry * Rx.
 */
class CoeffVector {
public:
    CoeffVector() { values_.fill(0.0); }
    explicit CoeffVector(std::span<const double> values);

    std::span<double> rotation() { return std::span(values_).subspan(0, kRotationCount); }
    std::span<const double> rotation() const { return std::span(values_).subspan(0, kRotationCount); }
    std::span<double> translation() { return std::span(values_).subspan(3, kTranslationCount); }
    std::span<const double> translation() const { return std::span(values_).subspan(3, kTranslationCount); }
    std::span<double> shape() { return std::span(values_).subspan(6, kShapeCount); }
    std::span<const double> shape() const { return std::span(values_).subspan(6, kShapeCount); }
    std::span<double> texture() { return std::span(values_).subspan(150, kTextureCount); }
    std::span<const double> texture() const { return std::span(values_).subspan(150, kTextureCount); }
    std::span<double> illumination() { return std::span(values_).subspan(230, kIlluminationCount); }
    std::span<const double> illumination() const { return std::span(values_).subspan(230, kIlluminationCount); }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    bool operator==(const CoeffVector&) const = default;

private:
    std::array<double, kCoeffCount> values_{};
};

/// Linear shape/albedo model with triangle topology and weighted landmarks.
struct MorphableModel {
    std::size_t vertex_count = 0;
    std::vector<double> mean_shape;    // 3V, xyz interleaved
    std::vector<double> shape_basis;   // 3V x n_shape, column-major
    std::vector<double> mean_albedo;   // 3V, rgb interleaved
    std::vector<double> albedo_basis;  // 3V x n_tex, column-major
    std::vector<std::array<std::uint32_t, 3>> triangles;
    std::vector<std::uint32_t> landmark_indices;
    std::vector<double> landmark_weights;

    std::size_t shape_count() const { return vertex_count == 0 ? 0 : shape_basis.size() / (3 * vertex_count); }
    std::size_t texture_count() const { return vertex_count == 0 ? 0 : albedo_basis.size() / (3 * vertex_count); }

    /// Throws ContractError on any size or index inconsistency.
    void validate() const;

    bool operator==(const MorphableModel&) const = default;
};

struct PosedMesh {
    std::vector<Vec3> positions;  // camera space
    std::vector<Vec3> albedo;
    std::vector<Vec3> normals;  // unit length
    std::vector<std::array<std::uint32_t, 3>> triangles;
};

struct Landmarks {
    std::vector<Vec3> points;
    std::vector<double> weights;
};

/// R = Rz(gamma) * Ry(beta) * Rx(alpha) for angles (alpha, beta, gamma).
Mat3 euler_rotation(double alpha, double beta, double gamma);
Vec3 apply(const Mat3& m, const Vec3& v);

/// Area-weighted vertex normals; (0,0,1) where the incident area vanishes.
std::vector<Vec3> vertex_normals(std::span<const Vec3> positions,
                                 std::span<const std::array<std::uint32_t, 3>> triangles);

PosedMesh synthesize(const MorphableModel& model, const CoeffVector& coeffs);

Landmarks landmarks3d(const PosedMesh& mesh, const MorphableModel& model);

inline constexpr std::size_t kLandmarkCount = 68;
inline constexpr std::size_t kHeavyLandmarkCount = 10;
inline constexpr double kHeavyLandmarkWeight = 20.0;
/// Camera distance of the toy model: coefficients place it at z = 10.
inline constexpr double kToyDepth = 10.0;

/**
 * Deterministic ellipsoidal stand-in for a face model.
 *
 * UV sphere with `ring_count` latitude rings of 2*ring_count vertices plus two
 * poles, centred at the origin in camera axes (x right, y down) with the face
 * looking down -z, i.e. towards a camera at the origin once translated by
 * kToyDepth. The mean albedo carries darker eye/brow/mouth features. Bases are
 * smooth random fields orthonormalised and scaled so a unit weight moves no
 * vertex by more than 5% of the bounding-box diagonal.
 */
MorphableModel toy_model(std::size_t ring_count = 16, std::uint64_t seed = 0);

/// Identity rotation, translation (0, 0, kToyDepth), unit ambient light.
CoeffVector toy_pose();

/*
 * DMM1 layout (little-endian):
 *   "DMM1", u64 V, T, n_shape, n_tex, n_pt,
 *   f32 mean_shape[3V], shape_basis[3V*n_shape] (column-major),
 *   f32 mean_albedo[3V], albedo_basis[3V*n_tex] (column-major),
 *   u32 triangles[3T], u32 landmark_indices[n_pt], f32 landmark_weights[n_pt]
 */
std::vector<std::uint8_t> encode_model(const MorphableModel& model);
MorphableModel decode_model(std::span<const std::uint8_t> bytes);
void save_model(const MorphableModel& model, const std::filesystem::path& path);
MorphableModel load_model(const std::filesystem::path& path);

}  // namespace deocc
