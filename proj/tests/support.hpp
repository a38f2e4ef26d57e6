#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "deocc/image.hpp"
#include "deocc/io.hpp"
#include "deocc/morphable.hpp"
#include "deocc/random.hpp"
#include "deocc/render.hpp"

namespace deocc::testing {

inline ImageF random_image(Rng& rng, std::size_t h, std::size_t w, std::size_t c, double lo = 0.0, double hi = 1.0) {
    ImageF image(h, w, c);
    for (double& v : image.storage()) {
        v = rng.uniform(lo, hi);
    }
    return image;
}

inline MaskF random_mask(Rng& rng, std::size_t h, std::size_t w, double density = 0.5) {
    MaskF mask(h, w);
    for (double& v : mask.data()) {
        v = rng.uniform() < density ? 1.0 : 0.0;
    }
    return mask;
}

/// Removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        const auto stamp = static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count());
        path_ = std::filesystem::temp_directory_path() /
                ("deocc-" + tag + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline bool same_bytes(const std::filesystem::path& a, const std::filesystem::path& b) {
    return read_file_bytes(a) == read_file_bytes(b);
}

/// Runs the CLI binary; stdout and stderr go to the given files when non-empty.
inline int run_cli_binary(const std::string& args, const std::filesystem::path& stdout_file = {},
                          const std::filesystem::path& stderr_file = {}) {
    std::string command = std::string(DEOCC_CLI_PATH) + " " + args;
    command += stdout_file.empty() ? " >/dev/null" : " >'" + stdout_file.string() + "'";
    command += stderr_file.empty() ? " 2>/dev/null" : " 2>'" + stderr_file.string() + "'";
    const int status = std::system(command.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/**
 * Toy-model desk scene: the ground truth is the default toy render over a
 * flat background; a square opaque patch covers the face centre; the
 * "reconstruction" I_m is rendered from perturbed texture and lighting.
 */
struct DeskScene {
    ImageF truth;
    ImageF occluded;
    MaskF face_mask;  // visible face, M_f
    ImageF render;    // I_m
    MaskF render_mask;
    MaskF patch;
};

inline DeskScene make_desk_scene(std::size_t size = 128, std::size_t patch_size = 32, std::uint64_t seed = 5) {
    const MorphableModel model = toy_model();
    const Camera camera = Camera::for_size(size, size);
    const CoeffVector truth_coeffs = toy_pose();
    const CoeffRender truth = render_from_coeffs(model, truth_coeffs, camera);

    DeskScene scene;
    scene.truth = truth.render.image;
    const double background[3] = {0.35, 0.4, 0.45};
    for (std::size_t p = 0; p < truth.render.mask.size(); ++p) {
        if (truth.render.mask[p] == 0.0) {
            for (std::size_t k = 0; k < 3; ++k) {
                scene.truth.storage()[3 * p + k] = background[k];
            }
        }
    }

    CoeffVector estimate = truth_coeffs;
    Rng rng(seed);
    for (double& t : estimate.texture()) {
        t += rng.normal(0.0, 0.3);
    }
    estimate.illumination()[0] *= 0.9;
    estimate.illumination()[2] += 0.1;
    const CoeffRender recon = render_from_coeffs(model, estimate, camera);
    scene.render = recon.render.image;
    scene.render_mask = recon.render.mask;

    const auto centre = mask_centroid(truth.render.mask);
    const auto y0 = static_cast<std::size_t>(centre[1]) - patch_size / 2;
    const auto x0 = static_cast<std::size_t>(centre[0]) - patch_size / 2;
    scene.occluded = scene.truth;
    scene.face_mask = truth.render.mask;
    scene.patch = MaskF(size, size);
    for (std::size_t y = y0; y < y0 + patch_size; ++y) {
        for (std::size_t x = x0; x < x0 + patch_size; ++x) {
            scene.patch.at(y, x) = 1.0;
            scene.face_mask.at(y, x) = 0.0;
            scene.occluded.at(y, x, 0) = 0.8;
            scene.occluded.at(y, x, 1) = 0.1;
            scene.occluded.at(y, x, 2) = 0.1;
        }
    }
    return scene;
}

/// Small asset tree for generate_pairs: faces/, occlusions/, swatches/ under `root`.
inline void write_synth_assets(const std::filesystem::path& root, std::uint64_t seed = 1) {
    namespace fs = std::filesystem;
    fs::create_directories(root / "faces");
    fs::create_directories(root / "occlusions");
    fs::create_directories(root / "swatches");
    Rng rng(seed);
    for (int f = 0; f < 2; ++f) {
        const std::size_t size = 48;
        ImageF face = random_image(rng, size, size, 3, 0.3, 0.8);
        MaskF mask(size, size);
        for (std::size_t y = 0; y < size; ++y) {
            for (std::size_t x = 0; x < size; ++x) {
                const double u = (static_cast<double>(x) - 24.0) / 16.0;
                const double v = (static_cast<double>(y) - 24.0) / 20.0;
                mask.at(y, x) = u * u + v * v <= 1.0 ? 1.0 : 0.0;
            }
        }
        save_png(face, root / "faces" / ("face" + std::to_string(f) + ".png"));
        save_mask_png(mask, root / "faces" / ("face" + std::to_string(f) + ".mask.png"));
    }
    for (int o = 0; o < 3; ++o) {
        const std::size_t h = 10 + 4 * static_cast<std::size_t>(o);
        const std::size_t w = 16;
        const ImageF texture = random_image(rng, h, w, 3);
        MaskF alpha(h, w, 1.0);
        for (std::size_t y = 0; y < h; ++y) {
            alpha.at(y, 0) = 0.0;
        }
        save_png(texture, root / "occlusions" / ("occ" + std::to_string(o) + ".png"));
        save_mask_png(alpha, root / "occlusions" / ("occ" + std::to_string(o) + ".mask.png"));
    }
    for (int s = 0; s < 2; ++s) {
        save_png(random_image(rng, 7, 9, 3), root / "swatches" / ("sw" + std::to_string(s) + ".png"));
    }
}

}  // namespace deocc::testing
