#include "deocc/morphable.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numbers>
#include <string>

#include "deocc/errors.hpp"
#include "deocc/io.hpp"
#include "deocc/random.hpp"

namespace deocc {
namespace {

Vec3 sub(const Vec3& a, const Vec3& b) {
    return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

double dot(const Vec3& a, const Vec3& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

Mat3 mul(const Mat3& a, const Mat3& b) {
    Mat3 out{};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            for (int k = 0; k < 3; ++k) {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    return out;
}

// Column-wise smoothing over the mesh graph, then modified Gram-Schmidt (two passes).
std::vector<double> smooth_orthogonal_basis(std::size_t rows, std::size_t cols, std::size_t vertex_count,
                                            const std::vector<std::vector<std::uint32_t>>& neighbours, Rng& rng,
                                            int smoothing_passes) {
    std::vector<double> basis(rows * cols);
    std::vector<double> scratch(rows);
    for (std::size_t k = 0; k < cols; ++k) {
        double* col = basis.data() + k * rows;
        for (std::size_t r = 0; r < rows; ++r) {
            col[r] = rng.normal();
        }
        for (int pass = 0; pass < smoothing_passes; ++pass) {
            for (std::size_t v = 0; v < vertex_count; ++v) {
                for (std::size_t d = 0; d < 3; ++d) {
                    double s = col[3 * v + d];
                    for (std::uint32_t n : neighbours[v]) {
                        s += col[3 * n + d];
                    }
                    scratch[3 * v + d] = s / static_cast<double>(neighbours[v].size() + 1);
                }
            }
            std::copy(scratch.begin(), scratch.end(), col);
        }
    }
    for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t k = 0; k < cols; ++k) {
            double* col = basis.data() + k * rows;
            for (std::size_t j = 0; j < k; ++j) {
                const double* prev = basis.data() + j * rows;
                double proj = 0.0;
                for (std::size_t r = 0; r < rows; ++r) {
                    proj += col[r] * prev[r];
                }
                for (std::size_t r = 0; r < rows; ++r) {
                    col[r] -= proj * prev[r];
                }
            }
            double norm = 0.0;
            for (std::size_t r = 0; r < rows; ++r) {
                norm += col[r] * col[r];
            }
            norm = std::sqrt(norm);
            for (std::size_t r = 0; r < rows; ++r) {
                col[r] /= norm;
            }
        }
    }
    return basis;
}

// Rescale each column so its largest per-vertex displacement equals `limit`.
void limit_vertex_excursion(std::vector<double>& basis, std::size_t rows, std::size_t cols, double limit) {
    for (std::size_t k = 0; k < cols; ++k) {
        double* col = basis.data() + k * rows;
        double largest = 0.0;
        for (std::size_t v = 0; v < rows / 3; ++v) {
            largest = std::max(largest, std::hypot(col[3 * v], col[3 * v + 1], col[3 * v + 2]));
        }
        const double s = limit / largest;
        for (std::size_t r = 0; r < rows; ++r) {
            col[r] *= s;
        }
    }
}

double smoothstep_disk(double dx, double dy, double radius) {
    const double d = std::hypot(dx, dy) / radius;
    if (d >= 1.0) {
        return 0.0;
    }
    return 1.0 - d * d * (3.0 - 2.0 * d);
}

class ByteWriter {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }
    void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

    std::vector<std::uint8_t> bytes;
};

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        }
        pos_ += 8;
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
        }
        pos_ += 4;
        return v;
    }
    double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
    std::size_t remaining() const { return bytes_.size() - pos_; }

    void need(std::uint64_t n) const {
        if (n > bytes_.size() - pos_) {
            throw FormatError("DMM1: truncated file");
        }
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

CoeffVector::CoeffVector(std::span<const double> values) {
    if (values.size() != kCoeffCount) {
        throw ContractError("CoeffVector: expected 239 values, got " + std::to_string(values.size()));
    }
    for (std::size_t i = 0; i < kCoeffCount; ++i) {
        if (!std::isfinite(values[i])) {
            throw ContractError("CoeffVector: non-finite coefficient at index " + std::to_string(i));
        }
        values_[i] = values[i];
    }
}

void MorphableModel::validate() const {
    const std::size_t n = 3 * vertex_count;
    if (mean_shape.size() != n || mean_albedo.size() != n) {
        throw ContractError("MorphableModel: mean arrays must hold 3V values");
    }
    if (vertex_count == 0) {
        return;
    }
    if (shape_basis.size() % n != 0 || albedo_basis.size() % n != 0) {
        throw ContractError("MorphableModel: basis size is not a multiple of 3V");
    }
    for (const auto& tri : triangles) {
        for (std::uint32_t idx : tri) {
            if (idx >= vertex_count) {
                throw ContractError("MorphableModel: triangle index out of range");
            }
        }
    }
    if (landmark_indices.size() != landmark_weights.size()) {
        throw ContractError("MorphableModel: landmark index/weight count mismatch");
    }
    for (std::uint32_t idx : landmark_indices) {
        if (idx >= vertex_count) {
            throw ContractError("MorphableModel: landmark index out of range");
        }
    }
}

Mat3 euler_rotation(double alpha, double beta, double gamma) {
    const double ca = std::cos(alpha), sa = std::sin(alpha);
    const double cb = std::cos(beta), sb = std::sin(beta);
    const double cg = std::cos(gamma), sg = std::sin(gamma);
    const Mat3 rx{{{1, 0, 0}, {0, ca, -sa}, {0, sa, ca}}};
    const Mat3 ry{{{cb, 0, sb}, {0, 1, 0}, {-sb, 0, cb}}};
    const Mat3 rz{{{cg, -sg, 0}, {sg, cg, 0}, {0, 0, 1}}};
    return mul(rz, mul(ry, rx));
}

Vec3 apply(const Mat3& m, const Vec3& v) {
    return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2], m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}

std::vector<Vec3> vertex_normals(std::span<const Vec3> positions,
                                 std::span<const std::array<std::uint32_t, 3>> triangles) {
    std::vector<Vec3> normals(positions.size(), Vec3{0.0, 0.0, 0.0});
    for (const auto& tri : triangles) {
        // Cross product length is twice the area, which gives area weighting.
        const Vec3 n = cross(sub(positions[tri[1]], positions[tri[0]]), sub(positions[tri[2]], positions[tri[0]]));
        for (std::uint32_t idx : tri) {
            for (int d = 0; d < 3; ++d) {
                normals[idx][d] += n[d];
            }
        }
    }
    for (auto& n : normals) {
        const double len = std::sqrt(dot(n, n));
        if (len > 0.0 && std::isfinite(len)) {
            n = {n[0] / len, n[1] / len, n[2] / len};
        } else {
            n = {0.0, 0.0, 1.0};
        }
    }
    return normals;
}

PosedMesh synthesize(const MorphableModel& model, const CoeffVector& coeffs) {
    const std::size_t v_count = model.vertex_count;
    const std::size_t rows = 3 * v_count;
    if (v_count > 0 && (model.shape_count() != kShapeCount || model.texture_count() != kTextureCount)) {
        throw ContractError("synthesize: model must have 144 shape and 80 texture basis vectors");
    }

    std::vector<double> shape = model.mean_shape;
    std::vector<double> albedo = model.mean_albedo;
    const auto shape_w = coeffs.shape();
    const auto tex_w = coeffs.texture();
    for (std::size_t k = 0; k < kShapeCount && v_count > 0; ++k) {
        if (shape_w[k] == 0.0) {
            continue;
        }
        const double* col = model.shape_basis.data() + k * rows;
        for (std::size_t r = 0; r < rows; ++r) {
            shape[r] += col[r] * shape_w[k];
        }
    }
    for (std::size_t k = 0; k < kTextureCount && v_count > 0; ++k) {
        if (tex_w[k] == 0.0) {
            continue;
        }
        const double* col = model.albedo_basis.data() + k * rows;
        for (std::size_t r = 0; r < rows; ++r) {
            albedo[r] += col[r] * tex_w[k];
        }
    }

    const auto rot = coeffs.rotation();
    const auto t = coeffs.translation();
    const Mat3 r = euler_rotation(rot[0], rot[1], rot[2]);

    PosedMesh mesh;
    mesh.positions.resize(v_count);
    mesh.albedo.resize(v_count);
    for (std::size_t v = 0; v < v_count; ++v) {
        const Vec3 p = apply(r, {shape[3 * v], shape[3 * v + 1], shape[3 * v + 2]});
        mesh.positions[v] = {p[0] + t[0], p[1] + t[1], p[2] + t[2]};
        for (std::size_t d = 0; d < 3; ++d) {
            mesh.albedo[v][d] = std::clamp(albedo[3 * v + d], 0.0, 1.0);
        }
    }
    mesh.triangles = model.triangles;
    mesh.normals = vertex_normals(mesh.positions, mesh.triangles);
    return mesh;
}

Landmarks landmarks3d(const PosedMesh& mesh, const MorphableModel& model) {
    Landmarks out;
    out.points.reserve(model.landmark_indices.size());
    for (std::uint32_t idx : model.landmark_indices) {
        if (idx >= mesh.positions.size()) {
            throw ContractError("landmarks3d: landmark index outside the mesh");
        }
        out.points.push_back(mesh.positions[idx]);
    }
    out.weights = model.landmark_weights;
    return out;
}

MorphableModel toy_model(std::size_t ring_count, std::uint64_t seed) {
    if (ring_count < 4) {
        throw ContractError("toy_model: ring count must be at least 4");
    }
    constexpr double kRx = 0.75;
    constexpr double kRy = 1.0;
    constexpr double kRz = 0.65;
    const std::size_t segments = 2 * ring_count;

    MorphableModel model;
    std::vector<Vec3> verts;
    verts.push_back({0.0, -kRy, 0.0});
    for (std::size_t i = 1; i <= ring_count; ++i) {
        const double theta = std::numbers::pi * static_cast<double>(i) / static_cast<double>(ring_count + 1);
        for (std::size_t j = 0; j < segments; ++j) {
            const double phi = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(segments);
            verts.push_back({kRx * std::sin(theta) * std::sin(phi), -kRy * std::cos(theta),
                             -kRz * std::sin(theta) * std::cos(phi)});
        }
    }
    verts.push_back({0.0, kRy, 0.0});
    const auto v_count = verts.size();
    const auto bottom = static_cast<std::uint32_t>(v_count - 1);
    auto ring_vertex = [&](std::size_t ring, std::size_t seg) {
        return static_cast<std::uint32_t>(1 + ring * segments + (seg % segments));
    };

    auto add_triangle = [&](std::uint32_t a, std::uint32_t b, std::uint32_t c) {
        const Vec3 n = cross(sub(verts[b], verts[a]), sub(verts[c], verts[a]));
        const Vec3 centroid{(verts[a][0] + verts[b][0] + verts[c][0]) / 3.0,
                            (verts[a][1] + verts[b][1] + verts[c][1]) / 3.0,
                            (verts[a][2] + verts[b][2] + verts[c][2]) / 3.0};
        if (dot(n, centroid) < 0.0) {
            std::swap(b, c);
        }
        model.triangles.push_back({a, b, c});
    };
    for (std::size_t j = 0; j < segments; ++j) {
        add_triangle(0, ring_vertex(0, j), ring_vertex(0, j + 1));
    }
    for (std::size_t i = 0; i + 1 < ring_count; ++i) {
        for (std::size_t j = 0; j < segments; ++j) {
            add_triangle(ring_vertex(i, j), ring_vertex(i + 1, j), ring_vertex(i + 1, j + 1));
            add_triangle(ring_vertex(i, j), ring_vertex(i + 1, j + 1), ring_vertex(i, j + 1));
        }
    }
    for (std::size_t j = 0; j < segments; ++j) {
        add_triangle(bottom, ring_vertex(ring_count - 1, j + 1), ring_vertex(ring_count - 1, j));
    }

    model.vertex_count = v_count;
    model.mean_shape.reserve(3 * v_count);
    model.mean_albedo.reserve(3 * v_count);
    for (const auto& p : verts) {
        model.mean_shape.insert(model.mean_shape.end(), p.begin(), p.end());
        // Skin tone with darker eyes and brows, a shaded nose and reddish lips on the front.
        const double front = p[2] < 0.0 ? 1.0 : 0.0;
        const double eyes = front * std::max(smoothstep_disk(p[0] - 0.28, p[1] + 0.22, 0.16),
                                             smoothstep_disk(p[0] + 0.28, p[1] + 0.22, 0.16));
        const double brows = front * std::max(smoothstep_disk(p[0] - 0.28, p[1] + 0.45, 0.14),
                                              smoothstep_disk(p[0] + 0.28, p[1] + 0.45, 0.14));
        const double nose = front * smoothstep_disk(p[0], p[1] - 0.05, 0.14);
        const double mouth = front * smoothstep_disk(p[0] / 1.8, p[1] - 0.42, 0.13);
        Vec3 rgb{0.86, 0.68, 0.58};
        for (int d = 0; d < 3; ++d) {
            rgb[d] *= 1.0 - 0.75 * eyes - 0.55 * brows - 0.2 * nose;
        }
        rgb[0] = rgb[0] * (1.0 - mouth) + 0.72 * mouth;
        rgb[1] = rgb[1] * (1.0 - mouth) + 0.28 * mouth;
        rgb[2] = rgb[2] * (1.0 - mouth) + 0.30 * mouth;
        for (int d = 0; d < 3; ++d) {
            model.mean_albedo.push_back(std::clamp(rgb[d], 0.0, 1.0));
        }
    }

    std::vector<std::vector<std::uint32_t>> neighbours(v_count);
    for (const auto& tri : model.triangles) {
        for (int a = 0; a < 3; ++a) {
            for (int b = 0; b < 3; ++b) {
                if (a != b) {
                    neighbours[tri[a]].push_back(tri[b]);
                }
            }
        }
    }
    for (auto& n : neighbours) {
        std::sort(n.begin(), n.end());
        n.erase(std::unique(n.begin(), n.end()), n.end());
    }

    const double diagonal = 2.0 * std::sqrt(kRx * kRx + kRy * kRy + kRz * kRz);
    Rng rng(seed);
    const std::size_t rows = 3 * v_count;
    model.shape_basis = smooth_orthogonal_basis(rows, kShapeCount, v_count, neighbours, rng, 4);
    limit_vertex_excursion(model.shape_basis, rows, kShapeCount, 0.05 * diagonal);
    model.albedo_basis = smooth_orthogonal_basis(rows, kTextureCount, v_count, neighbours, rng, 4);
    limit_vertex_excursion(model.albedo_basis, rows, kTextureCount, 0.05);

    // Landmarks: a seeded draw from front-facing vertices; the ten nearest the
    // front apex play the nose / inner-mouth role and get weight 20.
    std::vector<std::uint32_t> front;
    for (std::uint32_t v = 0; v < v_count; ++v) {
        if (verts[v][2] < -0.3 * kRz) {
            front.push_back(v);
        }
    }
    for (std::size_t i = front.size(); i > 1; --i) {
        std::swap(front[i - 1], front[rng.below(i)]);
    }
    for (std::size_t i = 0; i < kLandmarkCount; ++i) {
        model.landmark_indices.push_back(front[i % front.size()]);
    }
    std::vector<std::size_t> order(kLandmarkCount);
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    auto apex_distance = [&](std::size_t i) {
        const Vec3& p = verts[model.landmark_indices[i]];
        return std::hypot(p[0], p[1], p[2] + kRz);
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return apex_distance(a) < apex_distance(b); });
    model.landmark_weights.assign(kLandmarkCount, 1.0);
    for (std::size_t i = 0; i < kHeavyLandmarkCount; ++i) {
        model.landmark_weights[order[i]] = kHeavyLandmarkWeight;
    }
    return model;
}

CoeffVector toy_pose() {
    CoeffVector c;
    c.translation()[2] = kToyDepth;
    c.illumination()[0] = 2.0 * std::sqrt(std::numbers::pi);  // 1 / Y_0
    return c;
}

std::vector<std::uint8_t> encode_model(const MorphableModel& model) {
    model.validate();
    ByteWriter w;
    w.bytes = {'D', 'M', 'M', '1'};
    w.u64(model.vertex_count);
    w.u64(model.triangles.size());
    w.u64(model.shape_count());
    w.u64(model.texture_count());
    w.u64(model.landmark_indices.size());
    for (double v : model.mean_shape)
        w.f32(v);
    for (double v : model.shape_basis)
        w.f32(v);
    for (double v : model.mean_albedo)
        w.f32(v);
    for (double v : model.albedo_basis)
        w.f32(v);
    for (const auto& tri : model.triangles) {
        for (std::uint32_t idx : tri)
            w.u32(idx);
    }
    for (std::uint32_t idx : model.landmark_indices)
        w.u32(idx);
    for (double v : model.landmark_weights)
        w.f32(v);
    return std::move(w.bytes);
}

MorphableModel decode_model(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "DMM1", 4) != 0) {
        throw FormatError("DMM1: bad magic");
    }
    ByteReader r(bytes.subspan(4));
    const std::uint64_t v = r.u64();
    const std::uint64_t t = r.u64();
    const std::uint64_t n_shape = r.u64();
    const std::uint64_t n_tex = r.u64();
    const std::uint64_t n_pt = r.u64();
    // Every count must fit in what is left of the file before allocating.
    const std::uint64_t avail = r.remaining() / 4;
    if (v > avail / 3 || t > avail / 3 || n_pt > avail ||
        (v > 0 && (n_shape > avail / (3 * v) || n_tex > avail / (3 * v)))) {
        throw FormatError("DMM1: header counts exceed file size");
    }
    MorphableModel m;
    m.vertex_count = v;
    auto read_f32 = [&](std::vector<double>& out, std::uint64_t count) {
        r.need(4 * count);
        out.resize(count);
        for (auto& x : out)
            x = r.f32();
    };
    read_f32(m.mean_shape, 3 * v);
    read_f32(m.shape_basis, 3 * v * n_shape);
    read_f32(m.mean_albedo, 3 * v);
    read_f32(m.albedo_basis, 3 * v * n_tex);
    r.need(12 * t);
    m.triangles.resize(t);
    for (auto& tri : m.triangles) {
        for (auto& idx : tri)
            idx = r.u32();
    }
    r.need(4 * n_pt);
    m.landmark_indices.resize(n_pt);
    for (auto& idx : m.landmark_indices)
        idx = r.u32();
    read_f32(m.landmark_weights, n_pt);
    if (r.remaining() != 0) {
        throw FormatError("DMM1: trailing bytes");
    }
    try {
        m.validate();
    } catch (const ContractError& e) {
        throw FormatError(std::string("DMM1: ") + e.what());
    }
    return m;
}

void save_model(const MorphableModel& model, const std::filesystem::path& path) {
    write_file_bytes(path, encode_model(model));
}

MorphableModel load_model(const std::filesystem::path& path) {
    return decode_model(read_file_bytes(path));
}

}  // namespace deocc
