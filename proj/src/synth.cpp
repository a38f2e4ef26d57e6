#include "deocc/synth.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <json.hpp>
#include <mutex>
#include <thread>

#include "deocc/io.hpp"
#include "deocc/random.hpp"

namespace deocc {
namespace {

using nlohmann::json;

struct Similarity {
    double cos_r;
    double sin_r;
    double scale;
    double cx;  // patch centre, continuous coordinates
    double cy;
    double dx;
    double dy;

    Similarity(const PlacementParams& p, std::size_t patch_h, std::size_t patch_w)
        : cos_r(std::cos(p.rotation)),
          sin_r(std::sin(p.rotation)),
          scale(p.scale),
          cx(static_cast<double>(patch_w) / 2.0),
          cy(static_cast<double>(patch_h) / 2.0),
          dx(p.dx),
          dy(p.dy) {}

    // patch -> frame
    void forward(double qx, double qy, double& px, double& py) const {
        const double ux = qx - cx;
        const double uy = qy - cy;
        px = scale * (cos_r * ux - sin_r * uy) + cx + dx;
        py = scale * (sin_r * ux + cos_r * uy) + cy + dy;
    }

    // frame -> patch
    void inverse(double px, double py, double& qx, double& qy) const {
        const double ux = px - cx - dx;
        const double uy = py - cy - dy;
        qx = (cos_r * ux + sin_r * uy) / scale + cx;
        qy = (-sin_r * ux + cos_r * uy) / scale + cy;
    }
};

double sample_bilinear(const ImageF& image, double x, double y, std::size_t c) {
    // x, y are in pixel-index space (pixel centres at integers); clamp-to-edge.
    const auto h = static_cast<long>(image.height());
    const auto w = static_cast<long>(image.width());
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const double ax = x - fx;
    const double ay = y - fy;
    const auto x0 = static_cast<long>(fx);
    const auto y0 = static_cast<long>(fy);
    auto px = [&](long yy, long xx) {
        yy = std::clamp(yy, 0L, h - 1);
        xx = std::clamp(xx, 0L, w - 1);
        return image.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx), c);
    };
    if (ax == 0.0 && ay == 0.0) {
        return px(y0, x0);
    }
    return (1.0 - ay) * ((1.0 - ax) * px(y0, x0) + ax * px(y0, x0 + 1)) +
           ay * ((1.0 - ax) * px(y0 + 1, x0) + ax * px(y0 + 1, x0 + 1));
}

std::string sample_stem(std::uint64_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06llu", static_cast<unsigned long long>(index));
    return buf;
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<std::filesystem::path> sorted_pngs(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw IoError("not a directory: " + dir.string());
    }
    std::vector<std::filesystem::path> out;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") {
            out.push_back(entry.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

ImageF as_rgb(const ImageF& image) {
    if (image.channels() == 3) {
        return image;
    }
    ImageF out(image.height(), image.width(), 3);
    for (std::size_t p = 0; p < image.pixel_count(); ++p) {
        for (std::size_t k = 0; k < 3; ++k) {
            out.storage()[p * 3 + k] = image.storage()[p];
        }
    }
    return out;
}

json layer_fields(const LayerRecord& layer) {
    json j;
    j["occlusion"] = layer.occlusion;
    j["swatch"] = layer.swatch ? json(*layer.swatch) : json(nullptr);
    j["scale"] = layer.scale;
    j["rotation"] = layer.rotation;
    j["dx"] = layer.dx;
    j["dy"] = layer.dy;
    j["seed"] = layer.seed;
    return j;
}

LayerRecord parse_layer(const json& j) {
    LayerRecord layer;
    layer.occlusion = j.at("occlusion").get<std::string>();
    if (j.contains("swatch") && !j.at("swatch").is_null()) {
        layer.swatch = j.at("swatch").get<std::string>();
    }
    layer.scale = j.at("scale").get<double>();
    layer.rotation = j.at("rotation").get<double>();
    layer.dx = j.at("dx").get<double>();
    layer.dy = j.at("dy").get<double>();
    layer.seed = j.at("seed").get<std::uint64_t>();
    return layer;
}

PlacementParams placement_of(const LayerRecord& layer) {
    PlacementParams p;
    p.scale = layer.scale;
    p.rotation = layer.rotation;
    p.dx = layer.dx;
    p.dy = layer.dy;
    p.seed = layer.seed;
    return p;
}

std::uint64_t swatch_seed(std::uint64_t layer_seed) {
    return mix_seed(layer_seed, 1);
}

}  // namespace

void OcclusionPatch::validate() const {
    if (texture.channels() != 3) {
        throw ContractError("OcclusionPatch '" + name + "': texture must be RGB");
    }
    if (!alpha.matches(texture)) {
        throw ContractError("OcclusionPatch '" + name + "': alpha and texture dimensions differ");
    }
    require_binary(alpha, "OcclusionPatch");
    if (alpha.count_nonzero() == 0) {
        throw ContractError("OcclusionPatch '" + name + "': alpha is empty");
    }
}

void PlacementParams::validate() const {
    if (!(scale >= kMinScale && scale <= kMaxScale)) {
        throw ContractError("PlacementParams: scale outside [0.05, 4]");
    }
    if (!std::isfinite(rotation) || !std::isfinite(dx) || !std::isfinite(dy)) {
        throw ContractError("PlacementParams: non-finite transform");
    }
}

WarpedPatch warp_patch(const OcclusionPatch& patch, const PlacementParams& placement, std::size_t height,
                       std::size_t width) {
    patch.validate();
    placement.validate();
    const Similarity t(placement, patch.alpha.height(), patch.alpha.width());
    const auto ph = static_cast<double>(patch.alpha.height());
    const auto pw = static_cast<double>(patch.alpha.width());

    WarpedPatch out{ImageF(height, width, 3), MaskF(height, width)};
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            double qx = 0.0;
            double qy = 0.0;
            t.inverse(static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5, qx, qy);
            if (qx < 0.0 || qy < 0.0 || qx >= pw || qy >= ph) {
                continue;
            }
            const auto ix = static_cast<std::size_t>(qx);
            const auto iy = static_cast<std::size_t>(qy);
            if (patch.alpha.at(iy, ix) < 0.5) {
                continue;
            }
            out.alpha.at(y, x) = 1.0;
            for (std::size_t c = 0; c < 3; ++c) {
                out.texture.at(y, x, c) = sample_bilinear(patch.texture, qx - 0.5, qy - 0.5, c);
            }
        }
    }
    return out;
}

CompositeResult composite_layers(const ImageF& face, const MaskF& face_mask,
                                 const std::vector<std::pair<OcclusionPatch, PlacementParams>>& layers) {
    if (face.channels() != 3) {
        throw ContractError("composite: face image must be RGB");
    }
    require_matches(face_mask, face, "composite");
    require_binary(face_mask, "composite");

    CompositeResult out{face, face_mask, MaskF(face.height(), face.width())};
    for (const auto& [patch, placement] : layers) {
        const WarpedPatch warped = warp_patch(patch, placement, face.height(), face.width());
        if (warped.alpha.count_nonzero() == 0) {
            throw ContractError("composite: placement puts occlusion '" + patch.name + "' entirely off-image");
        }
        for (std::size_t p = 0; p < warped.alpha.size(); ++p) {
            const double m = warped.alpha[p];
            if (m == 0.0) {
                continue;
            }
            for (std::size_t c = 0; c < 3; ++c) {
                double& v = out.image.storage()[p * 3 + c];
                v = v * (1.0 - m) + warped.texture.storage()[p * 3 + c] * m;
            }
            out.occlusion[p] = 1.0;
        }
    }
    for (std::size_t p = 0; p < out.face_mask.size(); ++p) {
        out.face_mask[p] = face_mask[p] * (1.0 - out.occlusion[p]);
    }
    return out;
}

CompositeResult composite(const ImageF& face, const MaskF& face_mask, const OcclusionPatch& patch,
                          const PlacementParams& placement) {
    return composite_layers(face, face_mask, {{patch, placement}});
}

OcclusionPatch substitute_texture(const OcclusionPatch& patch, const ImageF& swatch, std::size_t offset_y,
                                  std::size_t offset_x) {
    if (swatch.channels() != 3 || swatch.pixel_count() == 0) {
        throw ContractError("substitute_texture: swatch must be a non-empty RGB image");
    }
    OcclusionPatch out = patch;
    const std::size_t sh = swatch.height();
    const std::size_t sw = swatch.width();
    for (std::size_t y = 0; y < out.texture.height(); ++y) {
        for (std::size_t x = 0; x < out.texture.width(); ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                out.texture.at(y, x, c) = swatch.at((y + offset_y) % sh, (x + offset_x) % sw, c);
            }
        }
    }
    return out;
}

OcclusionPatch substitute_texture(const OcclusionPatch& patch, const ImageF& swatch, std::uint64_t seed) {
    if (swatch.channels() != 3 || swatch.pixel_count() == 0) {
        throw ContractError("substitute_texture: swatch must be a non-empty RGB image");
    }
    Rng rng(seed);
    const std::size_t oy = rng.below(swatch.height());
    const std::size_t ox = rng.below(swatch.width());
    return substitute_texture(patch, swatch, oy, ox);
}

double visible_fraction(const OcclusionPatch& patch, const PlacementParams& placement, std::size_t height,
                        std::size_t width) {
    const Similarity t(placement, patch.alpha.height(), patch.alpha.width());
    std::size_t total = 0;
    std::size_t inside = 0;
    for (std::size_t y = 0; y < patch.alpha.height(); ++y) {
        for (std::size_t x = 0; x < patch.alpha.width(); ++x) {
            if (patch.alpha.at(y, x) < 0.5) {
                continue;
            }
            ++total;
            double px = 0.0;
            double py = 0.0;
            t.forward(static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5, px, py);
            if (px >= 0.0 && py >= 0.0 && px < static_cast<double>(width) && py < static_cast<double>(height)) {
                ++inside;
            }
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(inside) / static_cast<double>(total);
}

PlacementParams sample_placement(const OcclusionPatch& patch, std::size_t height, std::size_t width, std::uint64_t seed,
                                 const PlacementSampling& sampling) {
    patch.validate();
    Rng rng(seed);
    const auto pw = static_cast<double>(patch.alpha.width());
    const auto ph = static_cast<double>(patch.alpha.height());
    const auto fw = static_cast<double>(width);
    const auto fh = static_cast<double>(height);

    PlacementParams p;
    p.seed = seed;
    const double fraction = rng.uniform(sampling.min_width_fraction, sampling.max_width_fraction);
    p.scale = std::clamp(fraction * fw / pw, PlacementParams::kMinScale, PlacementParams::kMaxScale);
    p.rotation = rng.uniform(-sampling.max_rotation, sampling.max_rotation);

    // Centre of the placed patch sampled over the frame grown by the patch half-extent.
    const double half = 0.5 * p.scale * std::hypot(pw, ph);
    for (int attempt = 0; attempt < sampling.max_attempts; ++attempt) {
        const double centre_x = rng.uniform(-half, fw + half);
        const double centre_y = rng.uniform(-half, fh + half);
        p.dx = centre_x - pw / 2.0;
        p.dy = centre_y - ph / 2.0;
        if (visible_fraction(patch, p, height, width) >= sampling.min_visible_fraction) {
            return p;
        }
    }
    p.dx = fw / 2.0 - pw / 2.0;
    p.dy = fh / 2.0 - ph / 2.0;
    return p;
}

std::vector<FaceAsset> load_face_assets(const std::filesystem::path& dir) {
    std::vector<FaceAsset> out;
    for (const auto& path : sorted_pngs(dir)) {
        const std::string file = path.filename().string();
        if (ends_with(file, ".mask.png")) {
            continue;
        }
        const std::string name = path.stem().string();
        const auto mask_path = dir / (name + ".mask.png");
        if (!std::filesystem::exists(mask_path)) {
            throw FormatError("face asset '" + name + "' has no " + mask_path.filename().string());
        }
        FaceAsset asset{name, as_rgb(load_png(path)), load_mask_png(mask_path)};
        require_matches(asset.mask, asset.image, "load_face_assets");
        out.push_back(std::move(asset));
    }
    return out;
}

std::vector<OcclusionPatch> load_occlusion_assets(const std::filesystem::path& dir) {
    std::vector<OcclusionPatch> out;
    for (const auto& asset : load_face_assets(dir)) {
        OcclusionPatch patch{asset.image, asset.mask, asset.name};
        patch.validate();
        out.push_back(std::move(patch));
    }
    return out;
}

std::vector<std::pair<std::string, ImageF>> load_swatches(const std::filesystem::path& dir) {
    std::vector<std::pair<std::string, ImageF>> out;
    for (const auto& path : sorted_pngs(dir)) {
        if (ends_with(path.filename().string(), ".mask.png")) {
            continue;
        }
        out.emplace_back(path.stem().string(), as_rgb(load_png(path)));
    }
    return out;
}

std::string ManifestRecord::to_json_line() const {
    if (layers.empty()) {
        throw ContractError("ManifestRecord: at least one layer is required");
    }
    // Insertion order matters for byte-stable output, so build with ordered_json.
    nlohmann::ordered_json j;
    j["index"] = index;
    j["face"] = face;
    const json first = layer_fields(layers.front());
    for (const char* key : {"occlusion", "swatch", "scale", "rotation", "dx", "dy", "seed"}) {
        j[key] = first.at(key);
    }
    if (layers.size() > 1) {
        nlohmann::ordered_json extra = nlohmann::ordered_json::array();
        for (std::size_t i = 1; i < layers.size(); ++i) {
            const json fields = layer_fields(layers[i]);
            nlohmann::ordered_json entry;
            for (const char* key : {"occlusion", "swatch", "scale", "rotation", "dx", "dy", "seed"}) {
                entry[key] = fields.at(key);
            }
            extra.push_back(entry);
        }
        j["extra_layers"] = extra;
    }
    return j.dump();
}

ManifestRecord ManifestRecord::from_json_line(const std::string& line) {
    json j;
    try {
        j = json::parse(line);
        ManifestRecord r;
        r.index = j.at("index").get<std::uint64_t>();
        r.face = j.at("face").get<std::string>();
        r.layers.push_back(parse_layer(j));
        if (j.contains("extra_layers")) {
            for (const auto& entry : j.at("extra_layers")) {
                r.layers.push_back(parse_layer(entry));
            }
        }
        return r;
    } catch (const json::exception& e) {
        throw FormatError(std::string("manifest line: ") + e.what());
    }
}

CompositeResult replay_record(const ManifestRecord& record, const std::vector<FaceAsset>& faces,
                              const std::vector<OcclusionPatch>& occlusions,
                              const std::vector<std::pair<std::string, ImageF>>& swatches) {
    const auto face =
        std::find_if(faces.begin(), faces.end(), [&](const FaceAsset& f) { return f.name == record.face; });
    if (face == faces.end()) {
        throw FormatError("manifest references unknown face '" + record.face + "'");
    }
    std::vector<std::pair<OcclusionPatch, PlacementParams>> layers;
    for (const auto& layer : record.layers) {
        const auto occ = std::find_if(occlusions.begin(), occlusions.end(),
                                      [&](const OcclusionPatch& o) { return o.name == layer.occlusion; });
        if (occ == occlusions.end()) {
            throw FormatError("manifest references unknown occlusion '" + layer.occlusion + "'");
        }
        OcclusionPatch patch = *occ;
        if (layer.swatch) {
            const auto sw =
                std::find_if(swatches.begin(), swatches.end(), [&](const auto& s) { return s.first == *layer.swatch; });
            if (sw == swatches.end()) {
                throw FormatError("manifest references unknown swatch '" + *layer.swatch + "'");
            }
            patch = substitute_texture(patch, sw->second, swatch_seed(layer.seed));
        }
        layers.emplace_back(std::move(patch), placement_of(layer));
    }
    return composite_layers(face->image, face->mask, layers);
}

std::vector<ManifestRecord> generate_pairs(const std::filesystem::path& faces_dir,
                                           const std::filesystem::path& occlusions_dir,
                                           const std::filesystem::path& swatches_dir,
                                           const std::filesystem::path& out_dir, const GenerateOptions& options) {
    const auto faces = load_face_assets(faces_dir);
    const auto occlusions = load_occlusion_assets(occlusions_dir);
    const auto swatches = load_swatches(swatches_dir);
    if (faces.empty()) {
        throw ContractError("generate_pairs: no face assets in " + faces_dir.string());
    }
    if (occlusions.empty()) {
        throw ContractError("generate_pairs: no occlusion assets in " + occlusions_dir.string());
    }
    if (swatches.empty()) {
        throw ContractError("generate_pairs: no swatches in " + swatches_dir.string());
    }
    if (options.occlusions_per_sample == 0) {
        throw ContractError("generate_pairs: occlusions_per_sample must be positive");
    }
    std::filesystem::create_directories(out_dir);

    std::vector<ManifestRecord> records(options.count);
    auto make_sample = [&](std::size_t index) {
        const std::uint64_t sample_seed = mix_seed(options.seed, index);
        Rng rng(sample_seed);
        const FaceAsset& face = faces[rng.below(faces.size())];
        ManifestRecord record;
        record.index = index;
        record.face = face.name;
        for (std::size_t k = 0; k < options.occlusions_per_sample; ++k) {
            LayerRecord layer;
            layer.seed = mix_seed(sample_seed, 100 + k);
            const OcclusionPatch& occ = occlusions[rng.below(occlusions.size())];
            layer.occlusion = occ.name;
            if (rng.uniform() < options.swatch_probability) {
                layer.swatch = swatches[rng.below(swatches.size())].first;
            }
            const PlacementParams placement =
                sample_placement(occ, face.image.height(), face.image.width(), layer.seed, options.sampling);
            layer.scale = placement.scale;
            layer.rotation = placement.rotation;
            layer.dx = placement.dx;
            layer.dy = placement.dy;
            record.layers.push_back(layer);
        }
        // Rebuild from the record itself so the manifest alone reproduces the files.
        const ManifestRecord parsed = ManifestRecord::from_json_line(record.to_json_line());
        const CompositeResult result = replay_record(parsed, faces, occlusions, swatches);
        const std::string stem = sample_stem(index);
        save_png(result.image, out_dir / (stem + "_image.png"));
        write_tensor(result.image, out_dir / (stem + "_image.dtn"));
        save_mask_png(result.face_mask, out_dir / (stem + "_mgt.png"));
        write_tensor(result.face_mask.to_image(), out_dir / (stem + "_mgt.dtn"));
        save_mask_png(result.occlusion, out_dir / (stem + "_mo.png"));
        write_tensor(result.occlusion.to_image(), out_dir / (stem + "_mo.dtn"));
        records[index] = parsed;
    };

    const std::size_t threads = std::max<std::size_t>(1, std::min(options.threads, options.count));
    if (threads <= 1) {
        for (std::size_t i = 0; i < options.count; ++i) {
            make_sample(i);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_lock;
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < options.count; i = next++) {
                    try {
                        make_sample(i);
                    } catch (...) {
                        std::lock_guard lock(failure_lock);
                        if (!failure) {
                            failure = std::current_exception();
                        }
                    }
                }
            });
        }
        for (auto& th : pool) {
            th.join();
        }
        if (failure) {
            std::rethrow_exception(failure);
        }
    }

    std::string manifest;
    for (const auto& r : records) {
        manifest += r.to_json_line();
        manifest += '\n';
    }
    const std::vector<std::uint8_t> bytes(manifest.begin(), manifest.end());
    write_file_bytes(out_dir / "manifest.jsonl", bytes);
    return records;
}

}  // namespace deocc
