#include "deocc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace deocc {
namespace {

// FNV-1a over 64-bit words.
class Signature {
public:
    void add(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            state_ ^= (v >> (8 * i)) & 0xffu;
            state_ *= 0x100000001b3ull;
        }
    }
    void add_sign(double d) { add(d > 0.0 ? 1 : (d < 0.0 ? 2 : 0)); }
    std::uint64_t value() const { return state_; }

private:
    std::uint64_t state_ = 0xcbf29ce484222325ull;
};

double clamp_probability(double p) {
    return std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
}

bool clamped(double p) {
    return p < kProbabilityEpsilon || p > 1.0 - kProbabilityEpsilon;
}

double require_mass(const MaskF& m, const char* what) {
    require_binary(m, what);
    const double mass = m.sum();
    if (!(mass > 0.0)) {
        throw ContractError(std::string(what) + ": mask is empty");
    }
    return mass;
}

void require_unit_range(const MaskF& m, const char* what) {
    for (double v : m.data()) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw ContractError(std::string(what) + ": values must lie in [0,1]");
        }
    }
}

// Indices of the k entries ordered first by `before` (strict weak order on value), ties to the lower index.
template <typename Before>
std::vector<std::size_t> select_k(const std::vector<std::size_t>& candidates, const std::vector<double>& key,
                                  std::size_t k, Before before) {
    std::vector<std::size_t> order = candidates;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return before(key[a], key[b]); });
    order.resize(k);
    std::sort(order.begin(), order.end());
    return order;
}

// Shared body of the masked L1 losses.
LossReport masked_l1(const ImageF& i_hat, const ImageF& target, const MaskF& m, const char* what) {
    require_same_shape(i_hat, target, what);
    require_matches(m, i_hat, what);
    const double mass = require_mass(m, what);
    const std::size_t c = i_hat.channels();
    LossReport report;
    report.gradient.assign(i_hat.size(), 0.0);
    Signature sig;
    double total = 0.0;
    for (std::size_t p = 0; p < m.size(); ++p) {
        if (m[p] == 0.0) {
            continue;
        }
        for (std::size_t k = 0; k < c; ++k) {
            const std::size_t i = p * c + k;
            const double d = i_hat.storage()[i] - target.storage()[i];
            total += std::abs(d);
            report.gradient[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / mass;
            sig.add_sign(d);
        }
    }
    report.value = total / mass;
    report.kink_signature = sig.value();
    return report;
}

}  // namespace

ImageF LossReport::gradient_image(std::size_t height, std::size_t width, std::size_t channels) const {
    return ImageF(height, width, channels, gradient);
}

std::size_t ohem_count(double fraction, std::size_t n) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ContractError("ohem: fraction must lie in (0,1]");
    }
    // The slack keeps exact products such as 0.5 * 4 from rounding up.
    const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
    return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(n, 1));
}

LossReport dice_loss(const MaskF& pred, const MaskF& gt) {
    require_same_shape(pred, gt, "dice_loss");
    require_unit_range(pred, "dice_loss");
    require_binary(gt, "dice_loss");
    double inter = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        inter += pred[i] * gt[i];
        total += pred[i] + gt[i];
    }
    if (!(total > 0.0)) {
        throw ContractError("dice_loss: both masks are empty");
    }
    LossReport report;
    report.value = 1.0 - 2.0 * inter / total;
    report.gradient.resize(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        report.gradient[i] = -2.0 * (gt[i] * total - inter) / (total * total);
    }
    return report;
}

LossReport bce_ohem_loss(const MaskF& pred, const MaskF& gt, double fraction) {
    require_same_shape(pred, gt, "bce_ohem_loss");
    require_unit_range(pred, "bce_ohem_loss");
    require_binary(gt, "bce_ohem_loss");
    const std::size_t n = pred.size();
    if (n == 0) {
        throw ContractError("bce_ohem_loss: empty input");
    }
    const std::size_t k = ohem_count(fraction, n);

    std::vector<double> loss(n);
    ImageF aux(pred.height(), pred.width(), 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double p = clamp_probability(pred[i]);
        loss[i] = -(gt[i] * std::log(p) + (1.0 - gt[i]) * std::log(1.0 - p));
        aux.storage()[i] = loss[i];
    }
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    const auto kept = select_k(all, loss, k, [](double a, double b) { return a > b; });

    LossReport report;
    report.gradient.assign(n, 0.0);
    Signature sig;
    double total = 0.0;
    for (std::size_t i : kept) {
        total += loss[i];
        sig.add(i);
        if (clamped(pred[i])) {
            sig.add(~i);
            continue;
        }
        const double p = pred[i];
        report.gradient[i] = (-gt[i] / p + (1.0 - gt[i]) / (1.0 - p)) / static_cast<double>(k);
    }
    report.value = total / static_cast<double>(k);
    report.aux = std::move(aux);
    report.kink_signature = sig.value();
    return report;
}

LossReport coef_loss(const CoeffVector& c_hat, const CoeffVector& c_gt) {
    LossReport report;
    report.gradient.resize(kCoeffCount);
    Signature sig;
    double total = 0.0;
    const auto n = static_cast<double>(kCoeffCount);
    for (std::size_t i = 0; i < kCoeffCount; ++i) {
        const double d = c_hat[i] - c_gt[i];
        total += std::abs(d);
        report.gradient[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n;
        sig.add_sign(d);
    }
    report.value = total / n;
    report.kink_signature = sig.value();
    return report;
}

LossReport masked_pixel_l2(const ImageF& i_hat, const ImageF& i_f, const MaskF& m) {
    require_same_shape(i_hat, i_f, "masked_pixel_l2");
    require_matches(m, i_hat, "masked_pixel_l2");
    const double mass = require_mass(m, "masked_pixel_l2");
    const std::size_t c = i_hat.channels();
    LossReport report;
    report.gradient.assign(i_hat.size(), 0.0);
    Signature sig;
    double total = 0.0;
    for (std::size_t p = 0; p < m.size(); ++p) {
        if (m[p] == 0.0) {
            continue;
        }
        double norm2 = 0.0;
        for (std::size_t k = 0; k < c; ++k) {
            const double d = i_hat.storage()[p * c + k] - i_f.storage()[p * c + k];
            norm2 += d * d;
        }
        const double norm = std::sqrt(norm2);
        total += norm;
        if (norm == 0.0) {
            sig.add(p);
            continue;
        }
        for (std::size_t k = 0; k < c; ++k) {
            const double d = i_hat.storage()[p * c + k] - i_f.storage()[p * c + k];
            report.gradient[p * c + k] = d / (norm * mass);
        }
    }
    report.value = total / mass;
    report.kink_signature = sig.value();
    return report;
}

LossReport identity_loss(const ImageF& i_hat, const ImageF& i_f, const EmbeddingProvider& embed) {
    require_same_shape(i_hat, i_f, "identity_loss");
    const std::vector<double> target = embed.embed(i_f);
    const std::vector<double> current = embed.embed(i_hat);
    double cosine = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        cosine += current[i] * target[i];
    }
    LossReport report;
    report.value = 1.0 - cosine;
    const ImageF g = embed.cosine_gradient(i_hat, target);
    report.gradient.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        report.gradient[i] = -g.storage()[i];
    }
    return report;
}

LossReport landmark_loss(std::span<const Vec3> q_hat, std::span<const Vec3> q, std::span<const double> weights) {
    if (q_hat.size() != q.size() || weights.size() != q.size()) {
        throw ContractError("landmark_loss: landmark and weight counts differ");
    }
    if (q.empty()) {
        throw ContractError("landmark_loss: no landmarks");
    }
    const auto n = static_cast<double>(q.size());
    LossReport report;
    report.gradient.resize(3 * q.size());
    double total = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        double d2 = 0.0;
        for (std::size_t k = 0; k < 3; ++k) {
            const double d = q_hat[i][k] - q[i][k];
            d2 += d * d;
            report.gradient[3 * i + k] = 2.0 * weights[i] * d / n;
        }
        total += weights[i] * d2;
    }
    report.value = total / n;
    return report;
}

ReconstructionReport reconstruction_objective(const ReconstructionParts& parts, const ReconstructionWeights& weights) {
    if (parts.pix.gradient.size() != parts.id.gradient.size()) {
        throw ContractError("reconstruction_objective: pixel and identity gradients differ in size");
    }
    ReconstructionReport report;
    report.value = parts.coef.value + weights.pix * parts.pix.value + weights.id * parts.id.value +
                   weights.ldmk * parts.ldmk.value;
    report.grad_coeffs = parts.coef.gradient;
    report.grad_image.resize(parts.pix.gradient.size());
    for (std::size_t i = 0; i < report.grad_image.size(); ++i) {
        report.grad_image[i] = weights.pix * parts.pix.gradient[i] + weights.id * parts.id.gradient[i];
    }
    report.grad_landmarks.resize(parts.ldmk.gradient.size());
    for (std::size_t i = 0; i < report.grad_landmarks.size(); ++i) {
        report.grad_landmarks[i] = weights.ldmk * parts.ldmk.gradient[i];
    }
    return report;
}

LossReport pixel_l1_face(const ImageF& i_hat, const ImageF& i_f, const MaskF& m) {
    return masked_l1(i_hat, i_f, m, "pixel_l1_face");
}

LossReport ssim_ohem_loss(const ImageF& i_hat, const ImageF& i_p, const MaskF& m_eroded, double fraction,
                          const SsimParams& params) {
    require_same_shape(i_hat, i_p, "ssim_ohem_loss");
    require_matches(m_eroded, i_hat, "ssim_ohem_loss");
    require_mass(m_eroded, "ssim_ohem_loss");
    const std::size_t c = i_hat.channels();
    ImageF x = i_hat;
    ImageF y = i_p;
    std::vector<std::size_t> inside;
    for (std::size_t p = 0; p < m_eroded.size(); ++p) {
        if (m_eroded[p] == 0.0) {
            for (std::size_t k = 0; k < c; ++k) {
                x.storage()[p * c + k] = 0.0;
                y.storage()[p * c + k] = 0.0;
            }
        } else {
            inside.push_back(p);
        }
    }
    ImageF map = ssim_map(x, y, params);
    const std::size_t k = ohem_count(fraction, inside.size());
    const auto kept = select_k(inside, map.storage(), k, [](double a, double b) { return a < b; });

    ImageF upstream(map.height(), map.width(), 1);
    Signature sig;
    double total = 0.0;
    for (std::size_t p : kept) {
        total += map.storage()[p];
        upstream.storage()[p] = -1.0 / static_cast<double>(k);
        sig.add(p);
    }
    const ImageF g = ssim_backward(x, y, upstream, params);
    LossReport report;
    report.value = -total / static_cast<double>(k);
    report.gradient.assign(i_hat.size(), 0.0);
    for (std::size_t p : inside) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            report.gradient[p * c + ch] = g.storage()[p * c + ch];
        }
    }
    report.aux = std::move(map);
    report.kink_signature = sig.value();
    return report;
}

LossReport background_loss(const ImageF& i_hat, const ImageF& i, const MaskF& m_bg) {
    return masked_l1(i_hat, i, m_bg, "background_loss");
}

LossReport tv_loss(const ImageF& i_hat) {
    const std::size_t h = i_hat.height();
    const std::size_t w = i_hat.width();
    const std::size_t c = i_hat.channels();
    if (h * w < 2 || c == 0) {
        throw ContractError("tv_loss: image needs at least two pixels");
    }
    const auto n = static_cast<double>(i_hat.size());
    LossReport report;
    report.gradient.assign(i_hat.size(), 0.0);
    double total = 0.0;
    const auto& v = i_hat.storage();
    auto edge = [&](std::size_t a, std::size_t b) {
        const double d = v[b] - v[a];
        total += d * d;
        report.gradient[b] += 2.0 * d / n;
        report.gradient[a] -= 2.0 * d / n;
    };
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t k = 0; k < c; ++k) {
                const std::size_t i = (y * w + x) * c + k;
                if (x + 1 < w) {
                    edge(i, i + c);
                }
                if (y + 1 < h) {
                    edge(i, i + w * c);
                }
            }
        }
    }
    report.value = total / n;
    return report;
}

LossReport adversarial_g_loss(std::span<const double> d_out) {
    if (d_out.empty()) {
        throw ContractError("adversarial_g_loss: empty batch");
    }
    const auto n = static_cast<double>(d_out.size());
    LossReport report;
    report.gradient.assign(d_out.size(), 0.0);
    Signature sig;
    double total = 0.0;
    for (std::size_t i = 0; i < d_out.size(); ++i) {
        total -= std::log(clamp_probability(d_out[i]));
        if (clamped(d_out[i])) {
            sig.add(i);
        } else {
            report.gradient[i] = -1.0 / (n * d_out[i]);
        }
    }
    report.value = total / n;
    report.kink_signature = sig.value();
    return report;
}

LossReport adversarial_d_loss(std::span<const double> d_real, std::span<const double> d_fake) {
    if (d_real.empty() || d_fake.empty()) {
        throw ContractError("adversarial_d_loss: empty batch");
    }
    const auto nr = static_cast<double>(d_real.size());
    const auto nf = static_cast<double>(d_fake.size());
    LossReport report;
    report.gradient.assign(d_real.size() + d_fake.size(), 0.0);
    Signature sig;
    double real = 0.0;
    for (std::size_t i = 0; i < d_real.size(); ++i) {
        real += std::log(clamp_probability(d_real[i]));
        if (clamped(d_real[i])) {
            sig.add(i);
        } else {
            report.gradient[i] = -1.0 / (nr * d_real[i]);
        }
    }
    double fake = 0.0;
    for (std::size_t i = 0; i < d_fake.size(); ++i) {
        fake += std::log(1.0 - clamp_probability(d_fake[i]));
        if (clamped(d_fake[i])) {
            sig.add(d_real.size() + i);
        } else {
            report.gradient[d_real.size() + i] = 1.0 / (nf * (1.0 - d_fake[i]));
        }
    }
    report.value = -(real / nr + fake / nf);
    report.kink_signature = sig.value();
    return report;
}

LossReport adversarial_image_loss(const ImageF& i_hat, const DiscriminatorProvider& disc) {
    const double d = disc.probability(i_hat);
    const double batch[1] = {d};
    LossReport report = adversarial_g_loss(batch);
    const double dl_dd = report.gradient[0];
    const ImageF g = disc.gradient(i_hat);
    report.gradient.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        report.gradient[i] = dl_dd * g.storage()[i];
    }
    return report;
}

LossReport generator_objective(const GeneratorParts& parts, const GeneratorWeights& weights) {
    const std::pair<const std::optional<LossReport>*, double> terms[] = {
        {&parts.pix, weights.pix}, {&parts.sm, weights.sm}, {&parts.bg, weights.bg},
        {&parts.id, weights.id},   {&parts.tv, weights.tv}, {&parts.adv, weights.adv},
    };
    LossReport report;
    Signature sig;
    bool sized = false;
    for (const auto& [part, lambda] : terms) {
        if (!part->has_value()) {
            sig.add(0);
            continue;
        }
        const LossReport& r = **part;
        if (!sized) {
            report.gradient.assign(r.gradient.size(), 0.0);
            sized = true;
        } else if (r.gradient.size() != report.gradient.size()) {
            throw ContractError("generator_objective: component gradients differ in size");
        }
        report.value += lambda * r.value;
        for (std::size_t i = 0; i < r.gradient.size(); ++i) {
            report.gradient[i] += lambda * r.gradient[i];
        }
        sig.add(r.kink_signature);
    }
    report.kink_signature = sig.value();
    return report;
}

}  // namespace deocc
