#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "deocc/image.hpp"
#include "deocc/morphable.hpp"
#include "deocc/providers.hpp"
#include "deocc/ssim.hpp"

namespace deocc {

/// Probability / log clamp.
inline constexpr double kProbabilityEpsilon = 1e-7;
inline constexpr double kDefaultOhemFraction = 0.25;

/**
 * Value and analytic gradient of a loss.
 *
 * `gradient` is laid out like the differentiated input (image storage order
 * for images, row-major for masks, xyz-interleaved for landmarks).
 * `kink_signature` hashes every discrete choice the value depends on (OHEM
 * selection, L1 sign pattern, zero-norm pixels, clamping); within a region of
 * constant signature the loss is smooth.
 */
struct LossReport {
    double value = 0.0;
    std::vector<double> gradient;
    ImageF aux;
    std::uint64_t kink_signature = 0;

    ImageF gradient_image(std::size_t height, std::size_t width, std::size_t channels) const;
};

/// Number of elements kept by OHEM: ceil(fraction * n), at least 1.
std::size_t ohem_count(double fraction, std::size_t n);

/// 1 - 2 sum(pred gt) / (sum pred + sum gt).
LossReport dice_loss(const MaskF& pred, const MaskF& gt);

/**
 * Per-pixel binary cross entropy averaged over the hardest ceil(fraction N)
 * pixels (largest loss first, ties to the lower index). `aux` holds the
 * per-pixel loss map.
 */
LossReport bce_ohem_loss(const MaskF& pred, const MaskF& gt, double fraction = kDefaultOhemFraction);

/// Mean absolute coefficient difference over all 239 entries.
LossReport coef_loss(const CoeffVector& c_hat, const CoeffVector& c_gt);

/// (1 / sum M) sum_p M(p) |I_hat(p) - I_f(p)|_2 with the norm taken across channels.
LossReport masked_pixel_l2(const ImageF& i_hat, const ImageF& i_f, const MaskF& m);

/// 1 - cos(F(I_hat), F(I_f)).
LossReport identity_loss(const ImageF& i_hat, const ImageF& i_f, const EmbeddingProvider& embed);

/// (1 / n) sum_i w_i |q_hat_i - q_i|^2.
LossReport landmark_loss(std::span<const Vec3> q_hat, std::span<const Vec3> q, std::span<const double> weights);

struct ReconstructionWeights {
    double pix = 1.92;
    double id = 0.2;
    double ldmk = 1.6e-3;
};

struct ReconstructionParts {
    LossReport coef;
    LossReport pix;
    LossReport id;
    LossReport ldmk;
};

/// Gradients stay split by the input they belong to.
struct ReconstructionReport {
    double value = 0.0;
    std::vector<double> grad_coeffs;
    std::vector<double> grad_image;
    std::vector<double> grad_landmarks;
};

ReconstructionReport reconstruction_objective(const ReconstructionParts& parts,
                                              const ReconstructionWeights& weights = {});

/// (1 / sum M) sum M |I_hat - I_f|, channels summed.
LossReport pixel_l1_face(const ImageF& i_hat, const ImageF& i_f, const MaskF& m);

/**
 * Negated mean SSIM over the hardest (lowest-SSIM) ceil(fraction |M|) pixels
 * of the eroded render mask. SSIM is evaluated on the masked images
 * I_hat * M and I_p * M; `aux` holds that map.
 */
LossReport ssim_ohem_loss(const ImageF& i_hat, const ImageF& i_p, const MaskF& m_eroded,
                          double fraction = kDefaultOhemFraction, const SsimParams& params = {});

/// (1 / sum M_bg) sum M_bg |I_hat - I|, channels summed.
LossReport background_loss(const ImageF& i_hat, const ImageF& i, const MaskF& m_bg);

/// (1 / WHC) (sum |dx I|^2 + sum |dy I|^2) with forward differences.
LossReport tv_loss(const ImageF& i_hat);

/// -mean(log d) over a batch of discriminator outputs; gradient w.r.t. the outputs.
LossReport adversarial_g_loss(std::span<const double> d_out);

/**
 * Discriminator BCE -(mean log d_real + mean log(1 - d_fake)). Gradient is
 * w.r.t. the concatenation [d_real..., d_fake...].
 */
LossReport adversarial_d_loss(std::span<const double> d_real, std::span<const double> d_fake);

/// -log D(I_hat) with the gradient taken through the discriminator to the image.
LossReport adversarial_image_loss(const ImageF& i_hat, const DiscriminatorProvider& disc);

struct GeneratorWeights {
    double pix = 10.0;
    double sm = 5.0;
    double bg = 5.0;
    double id = 0.2;
    double tv = 0.1;
    double adv = 0.01;
};

/// Absent parts contribute nothing.
struct GeneratorParts {
    std::optional<LossReport> pix;
    std::optional<LossReport> sm;
    std::optional<LossReport> bg;
    std::optional<LossReport> id;
    std::optional<LossReport> tv;
    std::optional<LossReport> adv;
};

LossReport generator_objective(const GeneratorParts& parts, const GeneratorWeights& weights = {});

}  // namespace deocc
