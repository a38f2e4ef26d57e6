#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "deocc/image.hpp"

namespace deocc {

/// An occluder: RGB texture plus binary alpha of the same size.
struct OcclusionPatch {
    ImageF texture;
    MaskF alpha;
    std::string name;

    /// Throws ContractError when alpha/texture disagree or alpha is empty.
    void validate() const;
};

/**
 * Similarity transform placing a patch in the face frame.
 *
 * The patch is scaled and rotated about its own centre, then shifted so that
 * with scale 1 and rotation 0 the patch's top-left pixel lands on (dx, dy).
 */
struct PlacementParams {
    double scale = 1.0;
    double rotation = 0.0;  // radians
    double dx = 0.0;
    double dy = 0.0;
    std::uint64_t seed = 0;

    static constexpr double kMinScale = 0.05;
    static constexpr double kMaxScale = 4.0;
    void validate() const;
};

/// Patch warped into a target frame.
struct WarpedPatch {
    ImageF texture;  // bilinear
    MaskF alpha;     // nearest neighbour, re-binarised at 0.5
};

WarpedPatch warp_patch(const OcclusionPatch& patch, const PlacementParams& placement, std::size_t height,
                       std::size_t width);

struct CompositeResult {
    ImageF image;     // I = I_f (1 - M_o) + I_o M_o
    MaskF face_mask;  // M_gt = M_f (1 - M_o)
    MaskF occlusion;  // M_o in the face frame
};

CompositeResult composite(const ImageF& face, const MaskF& face_mask, const OcclusionPatch& patch,
                          const PlacementParams& placement);

/// Applies the layers in order; M_o is their union.
CompositeResult composite_layers(const ImageF& face, const MaskF& face_mask,
                                 const std::vector<std::pair<OcclusionPatch, PlacementParams>>& layers);

/// Texture replaced by `swatch` tiled from (offset_y, offset_x) with wrap-around.
OcclusionPatch substitute_texture(const OcclusionPatch& patch, const ImageF& swatch, std::size_t offset_y,
                                  std::size_t offset_x);
/// Offset drawn uniformly over the swatch from `seed`.
OcclusionPatch substitute_texture(const OcclusionPatch& patch, const ImageF& swatch, std::uint64_t seed);

struct PlacementSampling {
    double min_width_fraction = 0.3;
    double max_width_fraction = 1.2;
    double max_rotation = 0.5235987755982988;  // 30 degrees
    double min_visible_fraction = 0.25;
    int max_attempts = 100;
};

/// Random placement: width fraction, rotation and a translation keeping enough alpha on-image.
PlacementParams sample_placement(const OcclusionPatch& patch, std::size_t height, std::size_t width, std::uint64_t seed,
                                 const PlacementSampling& sampling = {});

/// Fraction of alpha pixels whose centres land inside the target frame.
double visible_fraction(const OcclusionPatch& patch, const PlacementParams& placement, std::size_t height,
                        std::size_t width);

struct FaceAsset {
    std::string name;
    ImageF image;
    MaskF mask;
};

/// `<name>.png` + `<name>.mask.png` pairs, sorted by name.
std::vector<FaceAsset> load_face_assets(const std::filesystem::path& dir);
std::vector<OcclusionPatch> load_occlusion_assets(const std::filesystem::path& dir);
/// Every `.png` in the directory that is not a `.mask.png`.
std::vector<std::pair<std::string, ImageF>> load_swatches(const std::filesystem::path& dir);

/// One occluder of a sample: which asset, which swatch, where.
struct LayerRecord {
    std::string occlusion;
    std::optional<std::string> swatch;
    double scale = 1.0;
    double rotation = 0.0;
    double dx = 0.0;
    double dy = 0.0;
    std::uint64_t seed = 0;  // placement seed; the swatch offset derives from it
};

/**
 * One manifest line. The first layer is flattened into the top-level
 * fields {occlusion, swatch, scale, rotation, dx, dy, seed}; any further
 * layers go to an `extra_layers` array of the same objects.
 */
struct ManifestRecord {
    std::uint64_t index = 0;
    std::string face;
    std::vector<LayerRecord> layers;

    std::string to_json_line() const;
    static ManifestRecord from_json_line(const std::string& line);
};

struct GenerateOptions {
    std::size_t count = 0;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::size_t occlusions_per_sample = 1;
    double swatch_probability = 0.5;
    PlacementSampling sampling;
};

/**
 * Writes `count` samples to `out_dir` and returns the manifest records.
 *
 * Per sample i: `NNNNNN_image`, `NNNNNN_mgt` and `NNNNNN_mo`, each as `.png` and `.dtn`;
 * records go to `manifest.jsonl`. Each sample derives its own seed from
 * (seed, i), so any thread count yields identical files.
 */
std::vector<ManifestRecord> generate_pairs(const std::filesystem::path& faces_dir,
                                           const std::filesystem::path& occlusions_dir,
                                           const std::filesystem::path& swatches_dir,
                                           const std::filesystem::path& out_dir, const GenerateOptions& options);

/// Recompute one sample from its manifest record.
CompositeResult replay_record(const ManifestRecord& record, const std::vector<FaceAsset>& faces,
                              const std::vector<OcclusionPatch>& occlusions,
                              const std::vector<std::pair<std::string, ImageF>>& swatches);

}  // namespace deocc
