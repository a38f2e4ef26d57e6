#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "deocc/blend.hpp"
#include "deocc/image.hpp"
#include "deocc/losses.hpp"
#include "deocc/maskops.hpp"
#include "deocc/providers.hpp"

namespace deocc {

struct AdamParams {
    double step_size = 0.01;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::size_t iterations = 500;
};

struct PrepareOptions {
    NoiseParams noise;
    BlendParams blend;
    int erosion_radius = kDefaultEdgeErosion;
    GeneratorWeights weights;
    double ohem_fraction = kDefaultOhemFraction;
    AdamParams optimizer;
};

/// Everything the pixel-space optimisation needs, with derived inputs precomputed.
struct InpaintProblem {
    ImageF image;         // I
    MaskF face_mask;      // M_f
    ImageF render;        // I_m
    MaskF render_mask;    // M_m
    MaskF occlusion;      // M_o
    MaskF supervision;    // M = M_m * M_f
    MaskF eroded_render;  // M_m eroded
    MaskF background;     // (1 - M_m) eroded
    ImageF face;          // I_f = I * M_f
    ImageF noised;        // I_n
    ImageF poisson;       // I_p
    GeneratorWeights weights;
    double ohem_fraction = kDefaultOhemFraction;
    AdamParams optimizer;
};

/// Throws ContractError when M_m is empty.
InpaintProblem prepare(const ImageF& image, const MaskF& face_mask, const ImageF& render, const MaskF& render_mask,
                       const PrepareOptions& options = {});

/// I_n * (1 - M_o) + I_m * M_o.
ImageF initial_estimate(const InpaintProblem& problem);

struct GeneratorEvaluation {
    GeneratorParts parts;
    LossReport total;
};

/**
 * All generator terms at `i_hat`. A term whose mask is empty (or, for the
 * identity term, whose face image embeds to zero) is left out.
 */
GeneratorEvaluation evaluate_generator(const InpaintProblem& problem, const ImageF& i_hat,
                                       const EmbeddingProvider& embed, const DiscriminatorProvider& disc);

struct InpaintResult {
    ImageF image;               // best iterate
    ImageF last;                // final iterate
    std::vector<double> trace;  // objective at the iterate each step started from
    double initial_value = 0.0;
    double final_value = 0.0;  // objective at `last`
    double best_value = 0.0;
    std::size_t best_step = 0;  // number of updates applied to reach `image`
};

/// Adam on the generator objective over pixels, projected to [0,1] after every step.
InpaintResult solve(const InpaintProblem& problem, const EmbeddingProvider& embed, const DiscriminatorProvider& disc);

inline constexpr double kPsnrCap = 99.0;

struct InpaintMetrics {
    double l1 = 0.0;
    double ssim = 0.0;
    double psnr = 0.0;
    double id = 0.0;
};

/// L1, SSIM and PSNR restricted to `region`; ID is the embedding cosine of the full images.
InpaintMetrics metrics(const ImageF& i_hat, const ImageF& i_gt, const MaskF& region, const EmbeddingProvider& embed);

std::string metrics_header();
/// Tab-separated, three decimals.
std::string metrics_row(const std::string& method, const InpaintMetrics& m);

}  // namespace deocc
