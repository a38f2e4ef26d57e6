#include "deocc/inpaint.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "deocc/ssim.hpp"

namespace deocc {
namespace {

bool embeds_to_zero(const EmbeddingProvider& embed, const ImageF& image) {
    try {
        embed.embed(image);
        return false;
    } catch (const ContractError&) {
        return true;
    }
}

}  // namespace

InpaintProblem prepare(const ImageF& image, const MaskF& face_mask, const ImageF& render, const MaskF& render_mask,
                       const PrepareOptions& options) {
    require_same_shape(image, render, "inpaint::prepare");
    require_matches(face_mask, image, "inpaint::prepare");
    require_matches(render_mask, image, "inpaint::prepare");
    require_binary(face_mask, "inpaint::prepare");
    require_binary(render_mask, "inpaint::prepare");
    if (render_mask.count_nonzero() == 0) {
        throw ContractError("inpaint::prepare: render mask is empty, no face prior");
    }

    InpaintProblem problem;
    problem.image = image;
    problem.face_mask = face_mask;
    problem.render = render;
    problem.render_mask = render_mask;
    problem.occlusion = occlusion_mask(render_mask, face_mask);
    problem.supervision = supervision_mask(render_mask, face_mask);
    problem.eroded_render = erode(render_mask, options.erosion_radius);
    problem.background = background_mask(render_mask, options.erosion_radius);
    problem.face = multiply(image, face_mask);
    problem.noised = gaussian_noise_fill(image, problem.occlusion, options.noise);
    problem.poisson = poisson_blend(problem.face, face_mask, render, render_mask, options.blend);
    problem.weights = options.weights;
    problem.ohem_fraction = options.ohem_fraction;
    problem.optimizer = options.optimizer;
    return problem;
}

ImageF initial_estimate(const InpaintProblem& problem) {
    ImageF out = problem.noised;
    const std::size_t c = out.channels();
    for (std::size_t p = 0; p < problem.occlusion.size(); ++p) {
        if (problem.occlusion[p] != 0.0) {
            for (std::size_t k = 0; k < c; ++k) {
                out.storage()[p * c + k] = problem.render.storage()[p * c + k];
            }
        }
    }
    return out;
}

GeneratorEvaluation evaluate_generator(const InpaintProblem& problem, const ImageF& i_hat,
                                       const EmbeddingProvider& embed, const DiscriminatorProvider& disc) {
    GeneratorEvaluation eval;
    GeneratorParts& parts = eval.parts;
    if (problem.supervision.count_nonzero() > 0) {
        parts.pix = pixel_l1_face(i_hat, problem.face, problem.supervision);
    }
    if (problem.eroded_render.count_nonzero() > 0) {
        parts.sm = ssim_ohem_loss(i_hat, problem.poisson, problem.eroded_render, problem.ohem_fraction);
    }
    if (problem.background.count_nonzero() > 0) {
        parts.bg = background_loss(i_hat, problem.image, problem.background);
    }
    if (!embeds_to_zero(embed, problem.face)) {
        parts.id = identity_loss(i_hat, problem.face, embed);
    }
    parts.tv = tv_loss(i_hat);
    parts.adv = adversarial_image_loss(i_hat, disc);
    eval.total = generator_objective(parts, problem.weights);
    return eval;
}

InpaintResult solve(const InpaintProblem& problem, const EmbeddingProvider& embed, const DiscriminatorProvider& disc) {
    const AdamParams& adam = problem.optimizer;
    if (!(adam.step_size > 0.0) || !(adam.beta1 >= 0.0 && adam.beta1 < 1.0) ||
        !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) || !(adam.epsilon > 0.0)) {
        throw ContractError("inpaint::solve: invalid optimizer parameters");
    }
    ImageF x = initial_estimate(problem);
    const std::size_t n = x.size();
    std::vector<double> m(n, 0.0);
    std::vector<double> v(n, 0.0);

    auto evaluate = [&](std::size_t step) {
        LossReport total = evaluate_generator(problem, x, embed, disc).total;
        bool finite = std::isfinite(total.value);
        for (double g : total.gradient) {
            finite = finite && std::isfinite(g);
        }
        if (!finite) {
            throw ConvergenceError("inpaint::solve: non-finite objective at step " + std::to_string(step), total.value,
                                   step);
        }
        return total;
    };

    InpaintResult result;
    result.trace.reserve(adam.iterations);
    double b1t = 1.0;
    double b2t = 1.0;
    for (std::size_t t = 0; t < adam.iterations; ++t) {
        const LossReport current = evaluate(t);
        result.trace.push_back(current.value);
        if (t == 0) {
            result.initial_value = current.value;
        }
        if (t == 0 || current.value < result.best_value) {
            result.best_value = current.value;
            result.best_step = t;
            result.image = x;
        }
        b1t *= adam.beta1;
        b2t *= adam.beta2;
        for (std::size_t i = 0; i < n; ++i) {
            const double g = current.gradient[i];
            m[i] = adam.beta1 * m[i] + (1.0 - adam.beta1) * g;
            v[i] = adam.beta2 * v[i] + (1.0 - adam.beta2) * g * g;
            const double m_hat = m[i] / (1.0 - b1t);
            const double v_hat = v[i] / (1.0 - b2t);
            x.storage()[i] =
                std::clamp(x.storage()[i] - adam.step_size * m_hat / (std::sqrt(v_hat) + adam.epsilon), 0.0, 1.0);
        }
    }
    result.final_value = evaluate(adam.iterations).value;
    if (adam.iterations == 0) {
        result.initial_value = result.final_value;
    }
    if (adam.iterations == 0 || result.final_value < result.best_value) {
        result.best_value = result.final_value;
        result.best_step = adam.iterations;
        result.image = x;
    }
    result.last = std::move(x);
    return result;
}

InpaintMetrics metrics(const ImageF& i_hat, const ImageF& i_gt, const MaskF& region, const EmbeddingProvider& embed) {
    require_same_shape(i_hat, i_gt, "metrics");
    require_matches(region, i_hat, "metrics");
    require_binary(region, "metrics");
    const std::size_t pixels = region.count_nonzero();
    if (pixels == 0) {
        throw ContractError("metrics: region is empty");
    }
    const std::size_t c = i_hat.channels();
    const ImageF map = ssim_map(i_hat, i_gt);
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    double ssim_sum = 0.0;
    for (std::size_t p = 0; p < region.size(); ++p) {
        if (region[p] == 0.0) {
            continue;
        }
        for (std::size_t k = 0; k < c; ++k) {
            const double d = i_hat.storage()[p * c + k] - i_gt.storage()[p * c + k];
            abs_sum += std::abs(d);
            sq_sum += d * d;
        }
        ssim_sum += map.storage()[p];
    }
    const auto elements = static_cast<double>(pixels * c);
    InpaintMetrics out;
    out.l1 = abs_sum / elements;
    out.ssim = ssim_sum / static_cast<double>(pixels);
    const double mse = sq_sum / elements;
    out.psnr = mse > 0.0 ? std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse)) : kPsnrCap;
    const std::vector<double> a = embed.embed(i_hat);
    const std::vector<double> b = embed.embed(i_gt);
    for (std::size_t i = 0; i < a.size(); ++i) {
        out.id += a[i] * b[i];
    }
    return out;
}

std::string metrics_header() {
    return "Method\tL1\tSSIM\tPSNR\tID";
}

std::string metrics_row(const std::string& method, const InpaintMetrics& m) {
    char buffer[128];
    std::snprintf(buffer, sizeof buffer, "\t%.3f\t%.3f\t%.3f\t%.3f", m.l1, m.ssim, m.psnr, m.id);
    return method + buffer;
}

}  // namespace deocc
