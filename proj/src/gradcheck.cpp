#include "deocc/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "deocc/maskops.hpp"
#include "deocc/random.hpp"

namespace deocc {

GradcheckResult gradcheck(const std::string& name, const Objective& f, std::span<const double> x0,
                          const GradcheckOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    if (x0.empty()) {
        throw ContractError("gradcheck: empty input");
    }
    GradcheckResult result;
    result.name = name;
    std::vector<double> x(x0.begin(), x0.end());
    const LossReport base = f(x);
    if (base.gradient.size() != x.size()) {
        throw ContractError("gradcheck: " + name + " gradient size does not match its input");
    }
    std::vector<std::size_t> support;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (base.gradient[i] != 0.0) {
            support.push_back(i);
        }
    }

    Rng rng(options.seed);
    for (std::size_t probe = 0; probe < options.probes; ++probe) {
        std::size_t i = 0;
        if (probe % 2 == 0 && !support.empty()) {
            i = support[rng.below(support.size())];
        } else {
            i = rng.below(x.size());
        }
        const double saved = x[i];
        x[i] = saved + options.step;
        const LossReport plus = f(x);
        x[i] = saved - options.step;
        const LossReport minus = f(x);
        x[i] = saved;
        if (plus.kink_signature != base.kink_signature || minus.kink_signature != base.kink_signature) {
            ++result.skipped;
            continue;
        }
        const double numeric = (plus.value - minus.value) / (2.0 * options.step);
        const double analytic = base.gradient[i];
        const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
        result.max_relative_error = std::max(result.max_relative_error, std::abs(analytic - numeric) / denom);
        ++result.checked;
    }
    result.passed = result.checked > 0 && result.max_relative_error < options.tolerance;
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

namespace {

ImageF random_image(Rng& rng, std::size_t h, std::size_t w, std::size_t c, double lo = 0.05, double hi = 0.95) {
    ImageF image(h, w, c);
    for (double& v : image.storage()) {
        v = rng.uniform(lo, hi);
    }
    return image;
}

MaskF random_mask(Rng& rng, std::size_t h, std::size_t w, double density) {
    MaskF mask(h, w);
    for (double& v : mask.data()) {
        v = rng.uniform() < density ? 1.0 : 0.0;
    }
    return mask;
}

MaskF random_soft(Rng& rng, std::size_t h, std::size_t w) {
    MaskF mask(h, w);
    for (double& v : mask.data()) {
        v = rng.uniform(0.05, 0.95);
    }
    return mask;
}

MaskF box_mask(std::size_t h, std::size_t w, std::size_t margin) {
    MaskF mask(h, w);
    for (std::size_t y = margin; y + margin < h; ++y) {
        for (std::size_t x = margin; x + margin < w; ++x) {
            mask.at(y, x) = 1.0;
        }
    }
    return mask;
}

ImageF as_image(std::span<const double> x, std::size_t h, std::size_t w, std::size_t c) {
    return ImageF(h, w, c, std::vector<double>(x.begin(), x.end()));
}

MaskF as_mask(std::span<const double> x, std::size_t h, std::size_t w) {
    return MaskF(h, w, std::vector<double>(x.begin(), x.end()));
}

}  // namespace

std::vector<GradcheckResult> standard_gradcheck_suite(std::size_t size, std::uint64_t seed,
                                                      const GradcheckOptions& options) {
    if (size < 16) {
        throw ContractError("gradcheck suite: size must be at least 16");
    }
    const std::size_t h = size;
    const std::size_t w = size;
    const std::size_t c = 3;
    Rng rng(mix_seed(seed, 1));
    std::vector<GradcheckResult> results;
    std::uint64_t stream = 0;
    auto run = [&](const std::string& name, const Objective& f, std::span<const double> x0) {
        GradcheckOptions local = options;
        local.seed = mix_seed(options.seed ^ seed, 1000 + stream++);
        results.push_back(gradcheck(name, f, x0, local));
    };

    {
        const MaskF pred = random_soft(rng, h, w);
        const MaskF gt = random_mask(rng, h, w, 0.4);
        run("dice", [&](std::span<const double> x) { return dice_loss(as_mask(x, h, w), gt); }, pred.data());
        run(
            "bce_ohem(f=1)", [&](std::span<const double> x) { return bce_ohem_loss(as_mask(x, h, w), gt, 1.0); },
            pred.data());
        run(
            "bce_ohem(f=0.25)", [&](std::span<const double> x) { return bce_ohem_loss(as_mask(x, h, w), gt, 0.25); },
            pred.data());
    }
    {
        const ImageF i_hat = random_image(rng, h, w, c);
        const ImageF target = random_image(rng, h, w, c);
        const MaskF m = random_mask(rng, h, w, 0.6);
        run(
            "masked_pixel_l2",
            [&](std::span<const double> x) { return masked_pixel_l2(as_image(x, h, w, c), target, m); }, i_hat.data());
        const ToyEmbedder embed(128, mix_seed(seed, 2));
        run(
            "identity", [&](std::span<const double> x) { return identity_loss(as_image(x, h, w, c), target, embed); },
            i_hat.data());
        run(
            "pixel_l1_face", [&](std::span<const double> x) { return pixel_l1_face(as_image(x, h, w, c), target, m); },
            i_hat.data());
        const MaskF region = box_mask(h, w, 4);
        run(
            "ssim_ohem",
            [&](std::span<const double> x) { return ssim_ohem_loss(as_image(x, h, w, c), target, region); },
            i_hat.data());
        const MaskF bg = complement(m);
        run(
            "background", [&](std::span<const double> x) { return background_loss(as_image(x, h, w, c), target, bg); },
            i_hat.data());
        run("tv", [&](std::span<const double> x) { return tv_loss(as_image(x, h, w, c)); }, i_hat.data());
    }
    {
        std::vector<Vec3> q(kLandmarkCount);
        std::vector<Vec3> q_hat(kLandmarkCount);
        std::vector<double> weights(kLandmarkCount, 1.0);
        std::fill(weights.begin(), weights.begin() + kHeavyLandmarkCount, kHeavyLandmarkWeight);
        std::vector<double> flat;
        for (std::size_t i = 0; i < kLandmarkCount; ++i) {
            for (std::size_t k = 0; k < 3; ++k) {
                q[i][k] = rng.uniform(-1.0, 1.0);
                q_hat[i][k] = q[i][k] + rng.normal(0.0, 0.05);
                flat.push_back(q_hat[i][k]);
            }
        }
        run(
            "landmark",
            [&](std::span<const double> x) {
                std::vector<Vec3> pts(x.size() / 3);
                for (std::size_t i = 0; i < pts.size(); ++i) {
                    pts[i] = {x[3 * i], x[3 * i + 1], x[3 * i + 2]};
                }
                return landmark_loss(pts, q, weights);
            },
            flat);
    }
    {
        std::vector<double> d(h * w);
        for (double& v : d) {
            v = rng.uniform(0.05, 0.95);
        }
        run("adversarial_g", [&](std::span<const double> x) { return adversarial_g_loss(x); }, d);
    }
    {
        // Generator objective on a synthetic scene with a differentiable discriminator.
        const ImageF image = random_image(rng, h, w, c);
        const ImageF poisson = random_image(rng, h, w, c);
        const ImageF i_hat = random_image(rng, h, w, c);
        const MaskF render_mask = box_mask(h, w, 3);
        MaskF face_mask = render_mask;
        for (std::size_t y = h / 3; y < h / 2; ++y) {
            for (std::size_t x = w / 3; x < w / 2; ++x) {
                face_mask.at(y, x) = 0.0;
            }
        }
        const MaskF supervision = face_mask;
        const MaskF eroded = erode(render_mask, 3);
        const MaskF background = erode(complement(render_mask), 1);
        const ImageF face = multiply(image, face_mask);
        const ToyEmbedder embed(128, mix_seed(seed, 3));
        const LogisticDiscriminator disc(h, w, c, mix_seed(seed, 4), 0.3);
        run(
            "generator_objective",
            [&](std::span<const double> x) {
                const ImageF im = as_image(x, h, w, c);
                GeneratorParts parts;
                parts.pix = pixel_l1_face(im, face, supervision);
                parts.sm = ssim_ohem_loss(im, poisson, eroded);
                parts.bg = background_loss(im, image, background);
                parts.id = identity_loss(im, face, embed);
                parts.tv = tv_loss(im);
                parts.adv = adversarial_image_loss(im, disc);
                return generator_objective(parts);
            },
            i_hat.data());
    }
    return results;
}

std::string format_gradcheck_table(const std::vector<GradcheckResult>& results) {
    std::string out = "loss                  checked  skipped  max_rel_err  status\n";
    char line[160];
    for (const auto& r : results) {
        std::snprintf(line, sizeof line, "%-20s  %7zu  %7zu  %11.3e  %s\n", r.name.c_str(), r.checked, r.skipped,
                      r.max_relative_error, r.passed ? "PASS" : "FAIL");
        out += line;
    }
    return out;
}

}  // namespace deocc
