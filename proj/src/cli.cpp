#include "deocc/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "deocc/blend.hpp"
#include "deocc/gradcheck.hpp"
#include "deocc/inpaint.hpp"
#include "deocc/io.hpp"
#include "deocc/losses.hpp"
#include "deocc/maskops.hpp"
#include "deocc/morphable.hpp"
#include "deocc/render.hpp"
#include "deocc/synth.hpp"

namespace deocc {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

bool is_png(const fs::path& path) {
    return path.extension() == ".png";
}

void write_any(const ImageF& image, const fs::path& path) {
    if (is_png(path)) {
        save_png(image, path);
    } else {
        write_tensor(image, path);
    }
}

void write_any(const MaskF& mask, const fs::path& path) {
    if (is_png(path)) {
        save_mask_png(mask, path);
    } else {
        write_tensor(mask.to_image(), path);
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream file(path, std::ios::binary);
    if (!file) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    file << text;
    if (!file) {
        throw IoError("write failed: " + path.string());
    }
}

json read_json(const fs::path& path) {
    std::ifstream file(path);
    if (!file) {
        throw IoError("cannot open " + path.string());
    }
    try {
        return json::parse(file);
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

CoeffVector read_coeffs(const fs::path& path) {
    const json j = read_json(path);
    if (!j.is_array()) {
        throw FormatError(path.string() + ": expected a JSON array of 239 numbers");
    }
    std::vector<double> values;
    for (const auto& v : j) {
        values.push_back(v.get<double>());
    }
    return CoeffVector(values);
}

std::vector<Vec3> read_points(const fs::path& path) {
    const json j = read_json(path);
    std::vector<Vec3> points;
    for (const auto& p : j) {
        if (!p.is_array() || p.size() != 3) {
            throw FormatError(path.string() + ": expected [[x,y,z], ...]");
        }
        points.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
    }
    return points;
}

std::string format_double(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

// Each subcommand registers its options into a struct and a runner.
struct Command {
    CLI::App* app = nullptr;
    std::function<int(std::ostream&)> run;
};

Command add_toymodel(CLI::App& root) {
    auto opts = std::make_shared<std::tuple<std::uint64_t, std::size_t, std::string>>(0, 16, "");
    auto* app = root.add_subcommand("toymodel", "Write the seeded toy morphable model (DMM1)");
    app->add_option("--seed", std::get<0>(*opts), "Basis seed");
    app->add_option("--rings", std::get<1>(*opts), "Latitude rings of the ellipsoid mesh");
    app->add_option("--out", std::get<2>(*opts), "Output model path")->required();
    return {app, [opts](std::ostream&) {
                save_model(toy_model(std::get<1>(*opts), std::get<0>(*opts)), std::get<2>(*opts));
                return kExitOk;
            }};
}

struct RenderOpts {
    std::string model;
    std::uint64_t seed = 0;
    std::string coeffs;
    std::size_t width = 256;
    std::size_t height = 256;
    std::size_t threads = 1;
    std::string out_image;
    std::string out_mask;
    std::string out_depth;
    std::string out_landmarks;
};

Command add_render(CLI::App& root) {
    auto o = std::make_shared<RenderOpts>();
    auto* app = root.add_subcommand("render", "Render I_m, M_m, depth and landmarks from coefficients");
    app->add_option("--model", o->model, "DMM1 model (default: toy model from --seed)")->check(CLI::ExistingFile);
    app->add_option("--seed", o->seed, "Toy model seed when --model is absent");
    app->add_option("--coeffs", o->coeffs, "JSON array of 239 coefficients (default: toy pose)")
        ->check(CLI::ExistingFile);
    app->add_option("--width", o->width, "Image width");
    app->add_option("--height", o->height, "Image height");
    app->add_option("--threads", o->threads, "Rasterizer threads");
    app->add_option("--out-image", o->out_image, "I_m (.png or DTN1)")->required();
    app->add_option("--out-mask", o->out_mask, "M_m (.png or DTN1)")->required();
    app->add_option("--out-depth", o->out_depth, "Depth (DTN1)");
    app->add_option("--out-landmarks", o->out_landmarks, "Landmarks (JSON)");
    return {app, [o](std::ostream&) {
                const MorphableModel model = o->model.empty() ? toy_model(16, o->seed) : load_model(o->model);
                const CoeffVector coeffs = o->coeffs.empty() ? toy_pose() : read_coeffs(o->coeffs);
                const CoeffRender r =
                    render_from_coeffs(model, coeffs, Camera::for_size(o->width, o->height), {o->threads});
                write_any(r.render.image, o->out_image);
                write_any(r.render.mask, o->out_mask);
                if (!o->out_depth.empty()) {
                    write_tensor(depth_image(r.render), o->out_depth);
                }
                if (!o->out_landmarks.empty()) {
                    json pts = json::array();
                    for (const Vec3& p : r.landmarks.points) {
                        pts.push_back({p[0], p[1], p[2]});
                    }
                    write_text(o->out_landmarks, pts.dump() + "\n");
                }
                return kExitOk;
            }};
}

struct SynthOpts {
    std::string faces;
    std::string occlusions;
    std::string swatches;
    std::string out;
    GenerateOptions gen;
};

Command add_synth(CLI::App& root) {
    auto o = std::make_shared<SynthOpts>();
    auto* app = root.add_subcommand("synth", "Generate occluded training pairs and a JSON-lines manifest");
    app->add_option("--faces", o->faces, "Face assets: <name>.png + <name>.mask.png")
        ->required()
        ->check(CLI::ExistingDirectory);
    app->add_option("--occlusions", o->occlusions, "Occlusion assets: <name>.png + <name>.mask.png")
        ->required()
        ->check(CLI::ExistingDirectory);
    app->add_option("--swatches", o->swatches, "Texture swatch PNGs")->required()->check(CLI::ExistingDirectory);
    app->add_option("--out", o->out, "Output directory")->required();
    app->add_option("--count", o->gen.count, "Number of samples");
    app->add_option("--seed", o->gen.seed, "Global seed");
    app->add_option("--threads", o->gen.threads, "Worker threads");
    app->add_option("--per-sample", o->gen.occlusions_per_sample, "Occlusions per sample");
    app->add_option("--swatch-probability", o->gen.swatch_probability, "Chance of swatch substitution per layer");
    app->add_option("--min-scale", o->gen.sampling.min_width_fraction, "Min patch width / face width");
    app->add_option("--max-scale", o->gen.sampling.max_width_fraction, "Max patch width / face width");
    app->add_option("--max-rotation", o->gen.sampling.max_rotation, "Max |rotation| in radians");
    app->add_option("--min-visible", o->gen.sampling.min_visible_fraction, "Min on-image alpha fraction");
    return {app, [o](std::ostream& out) {
                const auto records = generate_pairs(o->faces, o->occlusions, o->swatches, o->out, o->gen);
                out << records.size() << " samples\n";
                return kExitOk;
            }};
}

struct MaskopsOpts {
    std::string mm;
    std::string mf;
    std::string out;
    int radius = kDefaultEdgeErosion;
};

Command add_maskops(CLI::App& root) {
    auto o = std::make_shared<MaskopsOpts>();
    auto op = std::make_shared<std::string>();
    auto* app = root.add_subcommand("maskops", "Mask algebra: occlusion | supervision | background | overlap");
    app->add_option("operation", *op, "occlusion, supervision, background or overlap")
        ->required()
        ->check(CLI::IsMember({"occlusion", "supervision", "background", "overlap"}));
    app->add_option("--mm", o->mm, "Render mask M_m")->required()->check(CLI::ExistingFile);
    app->add_option("--mf", o->mf, "Face mask M_f (not used by background)")->check(CLI::ExistingFile);
    app->add_option("--radius", o->radius, "Erosion radius for background");
    app->add_option("--out", o->out, "Output mask (.png or DTN1); overlap prints to stdout");
    return {app, [o, op](std::ostream& out) {
                const MaskF mm = read_any_mask(o->mm);
                if (*op == "background") {
                    if (o->out.empty()) {
                        throw CLI::RequiredError("--out");
                    }
                    write_any(background_mask(mm, o->radius), o->out);
                    return kExitOk;
                }
                if (o->mf.empty()) {
                    throw CLI::RequiredError("--mf");
                }
                const MaskF mf = read_any_mask(o->mf);
                if (*op == "overlap") {
                    out << format_double(overlap_rate(mm, mf)) << "\n";
                    return kExitOk;
                }
                if (o->out.empty()) {
                    throw CLI::RequiredError("--out");
                }
                write_any(*op == "occlusion" ? occlusion_mask(mm, mf) : supervision_mask(mm, mf), o->out);
                return kExitOk;
            }};
}

struct BlendOpts {
    std::string face;
    std::string face_mask;
    std::string render;
    std::string render_mask;
    std::string out;
    std::string out_tensor;
    BlendParams params;
};

Command add_blend(CLI::App& root) {
    auto o = std::make_shared<BlendOpts>();
    auto* app = root.add_subcommand("blend", "Poisson-blend the visible face with the rendered face (I_p)");
    app->add_option("--face", o->face, "Face image I_f")->required()->check(CLI::ExistingFile);
    app->add_option("--face-mask", o->face_mask, "Face mask M_f")->required()->check(CLI::ExistingFile);
    app->add_option("--render", o->render, "Rendered face I_m")->required()->check(CLI::ExistingFile);
    app->add_option("--render-mask", o->render_mask, "Render mask M_m")->required()->check(CLI::ExistingFile);
    app->add_option("--out", o->out, "I_p as PNG")->required();
    app->add_option("--out-tensor", o->out_tensor, "I_p as DTN1 (unclamped solve)");
    app->add_option("--tolerance", o->params.tolerance, "CG relative residual tolerance");
    app->add_option("--max-iterations", o->params.max_iterations, "CG iteration cap (0: 10 x unknowns)");
    app->add_option("--threads", o->params.threads, "Per-channel solver threads");
    return {app, [o](std::ostream& out) {
                const PoissonSolution s =
                    poisson_blend_raw(read_any_image(o->face), read_any_mask(o->face_mask), read_any_image(o->render),
                                      read_any_mask(o->render_mask), o->params);
                save_png(s.values, o->out);
                if (!o->out_tensor.empty()) {
                    write_tensor(s.values, o->out_tensor);
                }
                for (std::size_t c = 0; c < s.iterations.size(); ++c) {
                    out << "channel " << c << ": " << s.iterations[c] << " iterations, residual "
                        << format_double(s.residuals[c]) << "\n";
                }
                return kExitOk;
            }};
}

struct NoiseOpts {
    std::string image;
    std::string mask;
    std::string out;
    NoiseParams params;
};

Command add_noise(CLI::App& root) {
    auto o = std::make_shared<NoiseOpts>();
    auto* app = root.add_subcommand("noise", "Fill a masked region with clamped Gaussian noise (I_n)");
    app->add_option("--image", o->image, "Input image")->required()->check(CLI::ExistingFile);
    app->add_option("--mask", o->mask, "Region to fill (M_o)")->required()->check(CLI::ExistingFile);
    app->add_option("--out", o->out, "Output (.png or DTN1)")->required();
    app->add_option("--mean", o->params.mean, "Noise mean");
    app->add_option("--stddev", o->params.stddev, "Noise standard deviation");
    app->add_option("--seed", o->params.seed, "Noise seed");
    return {app, [o](std::ostream&) {
                write_any(gaussian_noise_fill(read_any_image(o->image), read_any_mask(o->mask), o->params), o->out);
                return kExitOk;
            }};
}

struct InpaintOpts {
    std::string image;
    std::string face_mask;
    std::string render;
    std::string render_mask;
    std::string out_dir;
    PrepareOptions prep;
    std::size_t embed_dim = 128;
    std::uint64_t embed_seed = 0;
};

Command add_inpaint(CLI::App& root) {
    auto o = std::make_shared<InpaintOpts>();
    auto* app = root.add_subcommand("inpaint", "Minimise the generator objective over pixels");
    app->add_option("--image", o->image, "Occluded image I")->required()->check(CLI::ExistingFile);
    app->add_option("--face-mask", o->face_mask, "Visible face mask M_f")->required()->check(CLI::ExistingFile);
    app->add_option("--render", o->render, "Rendered face I_m")->required()->check(CLI::ExistingFile);
    app->add_option("--render-mask", o->render_mask, "Render mask M_m")->required()->check(CLI::ExistingFile);
    app->add_option("--out-dir", o->out_dir, "Output directory")->required();
    app->add_option("--iters", o->prep.optimizer.iterations, "Adam iterations");
    app->add_option("--lr", o->prep.optimizer.step_size, "Adam step size");
    app->add_option("--beta1", o->prep.optimizer.beta1, "Adam beta1");
    app->add_option("--beta2", o->prep.optimizer.beta2, "Adam beta2");
    app->add_option("--seed", o->prep.noise.seed, "Noise seed for I_n");
    app->add_option("--noise-mean", o->prep.noise.mean, "Noise mean");
    app->add_option("--noise-stddev", o->prep.noise.stddev, "Noise standard deviation");
    app->add_option("--erosion", o->prep.erosion_radius, "Edge erosion radius for M_m and M_bg");
    app->add_option("--ohem", o->prep.ohem_fraction, "OHEM kept fraction for the SSIM term");
    app->add_option("--lambda-pix", o->prep.weights.pix, "Pixel term weight");
    app->add_option("--lambda-sm", o->prep.weights.sm, "SSIM term weight");
    app->add_option("--lambda-bg", o->prep.weights.bg, "Background term weight");
    app->add_option("--lambda-id", o->prep.weights.id, "Identity term weight");
    app->add_option("--lambda-tv", o->prep.weights.tv, "TV term weight");
    app->add_option("--lambda-adv", o->prep.weights.adv, "Adversarial term weight");
    app->add_option("--embed-dim", o->embed_dim, "Toy embedder dimension");
    app->add_option("--embed-seed", o->embed_seed, "Toy embedder seed");
    return {app, [o](std::ostream& out) {
                const InpaintProblem problem =
                    prepare(read_any_image(o->image), read_any_mask(o->face_mask), read_any_image(o->render),
                            read_any_mask(o->render_mask), o->prep);
                const ToyEmbedder embed(o->embed_dim, o->embed_seed);
                const NullDiscriminator disc;
                const InpaintResult r = solve(problem, embed, disc);
                const fs::path dir = o->out_dir;
                fs::create_directories(dir);
                save_png(r.image, dir / "result.png");
                write_tensor(r.image, dir / "result.dtn");
                save_mask_png(problem.occlusion, dir / "occlusion.png");
                save_png(problem.noised, dir / "noised.png");
                save_png(problem.poisson, dir / "poisson.png");
                std::string trace = "step,objective\n";
                for (std::size_t t = 0; t < r.trace.size(); ++t) {
                    trace += std::to_string(t) + "," + format_double(r.trace[t]) + "\n";
                }
                trace += std::to_string(r.trace.size()) + "," + format_double(r.final_value) + "\n";
                write_text(dir / "trace.csv", trace);
                out << "initial " << format_double(r.initial_value) << "\nfinal " << format_double(r.final_value)
                    << "\nbest " << format_double(r.best_value) << " at step " << r.best_step << "\n";
                return kExitOk;
            }};
}

struct LossOpts {
    std::string name;
    std::string input;
    std::string target;
    std::string mask;
    std::string weights;
    std::string out_grad;
    double fraction = kDefaultOhemFraction;
    std::size_t embed_dim = 128;
    std::uint64_t embed_seed = 0;
};

LossReport evaluate_named_loss(const LossOpts& o) {
    auto need = [](const std::string& value, const char* flag) -> const std::string& {
        if (value.empty()) {
            throw CLI::RequiredError(flag);
        }
        return value;
    };
    if (o.name == "coef") {
        return coef_loss(read_coeffs(need(o.input, "--input")), read_coeffs(need(o.target, "--target")));
    }
    if (o.name == "landmark") {
        const auto q_hat = read_points(need(o.input, "--input"));
        const auto q = read_points(need(o.target, "--target"));
        std::vector<double> w(q.size(), 1.0);
        if (!o.weights.empty()) {
            w = read_json(o.weights).get<std::vector<double>>();
        }
        return landmark_loss(q_hat, q, w);
    }
    if (o.name == "tv") {
        return tv_loss(read_any_image(need(o.input, "--input")));
    }
    if (o.name == "dice" || o.name == "bce_ohem") {
        const MaskF pred = MaskF::from_image(read_any_image(need(o.input, "--input")));
        const MaskF gt = read_any_mask(need(o.target, "--target"));
        return o.name == "dice" ? dice_loss(pred, gt) : bce_ohem_loss(pred, gt, o.fraction);
    }
    const ImageF input = read_any_image(need(o.input, "--input"));
    const ImageF target = read_any_image(need(o.target, "--target"));
    if (o.name == "identity") {
        return identity_loss(input, target, ToyEmbedder(o.embed_dim, o.embed_seed));
    }
    const MaskF mask = read_any_mask(need(o.mask, "--mask"));
    if (o.name == "masked_pixel_l2") {
        return masked_pixel_l2(input, target, mask);
    }
    if (o.name == "pixel_l1_face") {
        return pixel_l1_face(input, target, mask);
    }
    if (o.name == "background") {
        return background_loss(input, target, mask);
    }
    return ssim_ohem_loss(input, target, mask, o.fraction);
}

Command add_loss(CLI::App& root) {
    auto o = std::make_shared<LossOpts>();
    auto* app = root.add_subcommand("loss", "Evaluate a named loss; prints the value, writes the gradient");
    app->add_option("name", o->name, "Loss name")
        ->required()
        ->check(CLI::IsMember({"dice", "bce_ohem", "coef", "masked_pixel_l2", "identity", "landmark", "pixel_l1_face",
                               "ssim_ohem", "background", "tv"}));
    app->add_option("--input", o->input, "Differentiated input (image, mask, or JSON for coef/landmark)")
        ->check(CLI::ExistingFile);
    app->add_option("--target", o->target, "Target")->check(CLI::ExistingFile);
    app->add_option("--mask", o->mask, "Mask for masked losses")->check(CLI::ExistingFile);
    app->add_option("--weights", o->weights, "Landmark weights (JSON array, default all 1)")->check(CLI::ExistingFile);
    app->add_option("--fraction", o->fraction, "OHEM kept fraction");
    app->add_option("--embed-dim", o->embed_dim, "Toy embedder dimension");
    app->add_option("--embed-seed", o->embed_seed, "Toy embedder seed");
    app->add_option("--out-grad", o->out_grad, "Gradient output (DTN1, H x W x C; 1 x N x 1 for vectors)");
    return {app, [o](std::ostream& out) {
                const LossReport r = evaluate_named_loss(*o);
                out << format_double(r.value) << "\n";
                if (!o->out_grad.empty()) {
                    Tensor t;
                    if (o->name == "coef" || o->name == "landmark") {
                        t.height = 1;
                        t.width = r.gradient.size();
                        t.channels = 1;
                    } else {
                        const ImageF shape = read_any_image(o->input);
                        t.height = shape.height();
                        t.width = shape.width();
                        t.channels = shape.channels();
                    }
                    t.values.assign(r.gradient.begin(), r.gradient.end());
                    write_tensor(t, o->out_grad);
                }
                return kExitOk;
            }};
}

Command add_gradcheck(CLI::App& root) {
    auto size = std::make_shared<std::size_t>(32);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto options = std::make_shared<GradcheckOptions>();
    auto* app = root.add_subcommand("gradcheck", "Finite-difference check of every analytic loss gradient");
    app->add_option("--size", *size, "Input side length");
    app->add_option("--seed", *seed, "Seed for inputs and probes");
    app->add_option("--probes", options->probes, "Probes per loss");
    app->add_option("--step", options->step, "Central difference step");
    app->add_option("--tolerance", options->tolerance, "Max relative error");
    return {app, [size, seed, options](std::ostream& out) {
                GradcheckOptions local = *options;
                local.seed = *seed;
                const auto results = standard_gradcheck_suite(*size, *seed, local);
                out << format_gradcheck_table(results);
                for (const auto& r : results) {
                    if (!r.passed) {
                        return kExitFailure;
                    }
                }
                return kExitOk;
            }};
}

struct MetricsOpts {
    std::string result;
    std::string truth;
    std::string region;
    std::string method = "Ours";
    std::size_t embed_dim = 128;
    std::uint64_t embed_seed = 0;
    bool header = false;
};

Command add_metrics(CLI::App& root) {
    auto o = std::make_shared<MetricsOpts>();
    auto* app = root.add_subcommand("metrics", "Region L1 / SSIM / PSNR and identity cosine as a TSV row");
    app->add_option("--result", o->result, "Restored image")->required()->check(CLI::ExistingFile);
    app->add_option("--truth", o->truth, "Ground truth image")->required()->check(CLI::ExistingFile);
    app->add_option("--region", o->region, "Evaluation region mask")->required()->check(CLI::ExistingFile);
    app->add_option("--method", o->method, "Row label");
    app->add_option("--embed-dim", o->embed_dim, "Toy embedder dimension");
    app->add_option("--embed-seed", o->embed_seed, "Toy embedder seed");
    app->add_flag("--header", o->header, "Print the column header first");
    return {app, [o](std::ostream& out) {
                const InpaintMetrics m = metrics(read_any_image(o->result), read_any_image(o->truth),
                                                 read_any_mask(o->region), ToyEmbedder(o->embed_dim, o->embed_seed));
                if (o->header) {
                    out << metrics_header() << "\n";
                }
                out << metrics_row(o->method, m) << "\n";
                return kExitOk;
            }};
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Face de-occlusion pipeline tools", "deocc"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);
    std::vector<Command> commands = {add_synth(app),     add_render(app), add_toymodel(app), add_maskops(app),
                                     add_blend(app),     add_noise(app),  add_inpaint(app),  add_loss(app),
                                     add_gradcheck(app), add_metrics(app)};
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e, out, err);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        app.exit(e, err, err);
        return kExitUsage;
    }
    try {
        for (const Command& c : commands) {
            if (c.app->parsed()) {
                return c.run(out);
            }
        }
        return kExitUsage;
    } catch (const CLI::Error& e) {
        err << "deocc: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "deocc: " << e.what() << "\n";
        return kExitFailure;
    }
}

}  // namespace deocc
