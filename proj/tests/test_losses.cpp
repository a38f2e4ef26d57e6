#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "deocc/gradcheck.hpp"
#include "deocc/losses.hpp"
#include "deocc/maskops.hpp"
#include "deocc/ssim.hpp"
#include "support.hpp"

using namespace deocc;
using deocc::testing::random_image;
using deocc::testing::random_mask;

namespace {

constexpr double kEps = kProbabilityEpsilon;

MaskF soft_mask(Rng& rng, std::size_t h, std::size_t w) {
    MaskF m(h, w);
    for (double& v : m.data()) {
        v = rng.uniform(0.01, 0.99);
    }
    return m;
}

MaskF permuted(const MaskF& m, const std::vector<std::size_t>& order) {
    MaskF out(m.height(), m.width());
    for (std::size_t i = 0; i < order.size(); ++i) {
        out[i] = m[order[i]];
    }
    return out;
}

LossReport synthetic_report(Rng& rng, std::size_t n) {
    LossReport r;
    r.value = rng.uniform(-1.0, 2.0);
    r.gradient.resize(n);
    for (double& g : r.gradient) {
        g = rng.normal();
    }
    return r;
}

// Embeds the mean of channel 0 and channel 1 as a 2-vector.
class TwoChannelEmbedder : public EmbeddingProvider {
public:
    std::size_t dimension() const override { return 2; }
    std::vector<double> embed(const ImageF& image) const override {
        std::vector<double> z = raw(image);
        const double n = std::hypot(z[0], z[1]);
        if (!(n > 0.0)) {
            throw ContractError("zero embedding");
        }
        return {z[0] / n, z[1] / n};
    }
    ImageF cosine_gradient(const ImageF& image, std::span<const double> target) const override {
        const std::vector<double> z = raw(image);
        const double n = std::hypot(z[0], z[1]);
        const double dot = (z[0] * target[0] + z[1] * target[1]) / n;
        ImageF g(image.height(), image.width(), image.channels());
        const double per = 1.0 / static_cast<double>(image.height() * image.width());
        for (std::size_t p = 0; p < image.height() * image.width(); ++p) {
            for (std::size_t k = 0; k < 2; ++k) {
                g.storage()[p * image.channels() + k] = per * (target[k] - dot * z[k] / n) / n;
            }
        }
        return g;
    }

private:
    static std::vector<double> raw(const ImageF& image) {
        std::vector<double> z(2, 0.0);
        const double per = 1.0 / static_cast<double>(image.height() * image.width());
        for (std::size_t p = 0; p < image.height() * image.width(); ++p) {
            z[0] += per * image.storage()[p * image.channels()];
            z[1] += per * image.storage()[p * image.channels() + 1];
        }
        return z;
    }
};

}  // namespace

TEST(DiceTest, HandExamples) {
    Rng rng(1);
    const MaskF gt = random_mask(rng, 6, 6);
    EXPECT_NEAR(dice_loss(gt, gt).value, 0.0, 1e-15);
    EXPECT_NEAR(dice_loss(complement(gt), gt).value, 1.0, 1e-15);
    EXPECT_NEAR(dice_loss(MaskF(1, 2, std::vector<double>{0.5, 0.5}), MaskF(1, 2, std::vector<double>{1, 0})).value,
                0.5, 1e-15);
    EXPECT_THROW(dice_loss(MaskF(2, 2), MaskF(2, 2)), ContractError);
}

TEST(DiceTest, GradientMatchesClosedForm) {
    const MaskF pred(1, 3, std::vector<double>{0.2, 0.7, 0.4});
    const MaskF gt(1, 3, std::vector<double>{1, 0, 1});
    const LossReport r = dice_loss(pred, gt);
    const double inter = 0.2 + 0.4;
    const double sum = 1.3 + 2.0;
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_NEAR(r.gradient[i], -2.0 * (gt[i] * sum - inter) / (sum * sum), 1e-15);
    }
}

TEST(BceTest, HandExamples) {
    const MaskF gt(2, 2, std::vector<double>{1, 0, 0, 1});
    const MaskF near(2, 2, std::vector<double>{1 - kEps, kEps, kEps, 1 - kEps});
    EXPECT_NEAR(bce_ohem_loss(near, gt, 1.0).value, -std::log(1 - kEps), 1e-18);
    EXPECT_NEAR(bce_ohem_loss(MaskF(2, 2, 0.5), gt, 1.0).value, std::log(2.0), 1e-15);
    const MaskF pred(2, 2, std::vector<double>{0.9, 0.1, 0.6, 0.4});
    const LossReport r = bce_ohem_loss(pred, gt, 0.5);
    EXPECT_NEAR(r.value, -std::log(0.4), 1e-15);
    EXPECT_NEAR(r.aux.at(0, 1, 0), -std::log(0.9), 1e-15);
    EXPECT_EQ(r.gradient[0], 0.0);
    EXPECT_NEAR(r.gradient[2], 0.5 * 1.0 / 0.4, 1e-14);
    EXPECT_NEAR(r.gradient[3], -0.5 / 0.4, 1e-14);
}

TEST(BceTest, OhemCountRounding) {
    EXPECT_EQ(ohem_count(0.25, 4), 1u);
    EXPECT_EQ(ohem_count(0.25, 5), 2u);
    EXPECT_EQ(ohem_count(0.001, 5), 1u);
    EXPECT_EQ(ohem_count(1.0, 5), 5u);
    EXPECT_THROW(ohem_count(0.0, 5), ContractError);
    EXPECT_THROW(ohem_count(1.5, 5), ContractError);
}

TEST(BceTest, OhemMonotoneInFraction) {
    Rng rng(2);
    for (int trial = 0; trial < 10; ++trial) {
        const MaskF pred = soft_mask(rng, 8, 8);
        const MaskF gt = random_mask(rng, 8, 8);
        double previous = std::numeric_limits<double>::infinity();
        for (double f : {0.05, 0.1, 0.25, 0.5, 0.75, 1.0}) {
            const double v = bce_ohem_loss(pred, gt, f).value;
            EXPECT_LE(v, previous + 1e-15);
            previous = v;
        }
    }
}

TEST(SegmentationLossTest, PermutationEquivariance) {
    Rng rng(3);
    const MaskF pred = soft_mask(rng, 7, 9);
    const MaskF gt = random_mask(rng, 7, 9);
    std::vector<std::size_t> order(pred.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[rng.below(i)]);
    }
    EXPECT_NEAR(dice_loss(permuted(pred, order), permuted(gt, order)).value, dice_loss(pred, gt).value, 1e-14);
    for (double f : {1.0, 0.25}) {
        EXPECT_NEAR(bce_ohem_loss(permuted(pred, order), permuted(gt, order), f).value,
                    bce_ohem_loss(pred, gt, f).value, 1e-14);
    }
}

TEST(CoefLossTest, Examples) {
    Rng rng(4);
    CoeffVector a;
    CoeffVector b;
    for (std::size_t i = 0; i < kCoeffCount; ++i) {
        a[i] = rng.normal();
        b[i] = rng.normal();
    }
    EXPECT_EQ(coef_loss(a, a).value, 0.0);
    CoeffVector shifted = a;
    for (double& v : shifted.values()) {
        v += 1.0;
    }
    EXPECT_NEAR(coef_loss(shifted, a).value, 1.0, 1e-14);
    double oracle = 0.0;
    for (std::size_t i = 0; i < kCoeffCount; ++i) {
        oracle += std::abs(a[i] - b[i]);
    }
    EXPECT_NEAR(coef_loss(a, b).value, oracle / 239.0, 1e-14);
}

TEST(MaskedL2Test, Examples) {
    Rng rng(5);
    const ImageF x = random_image(rng, 4, 4, 3);
    EXPECT_EQ(masked_pixel_l2(x, x, MaskF(4, 4, 1.0)).value, 0.0);
    ImageF y = x;
    y.at(2, 1, 0) += 0.3;
    y.at(2, 1, 2) += 0.4;
    MaskF m(4, 4);
    m.at(2, 1) = 1.0;
    EXPECT_NEAR(masked_pixel_l2(y, x, m).value, 0.5, 1e-15);
    EXPECT_THROW(masked_pixel_l2(x, x, MaskF(4, 4)), ContractError);
}

TEST(IdentityLossTest, Examples) {
    Rng rng(6);
    const ToyEmbedder embed;
    const ImageF x = random_image(rng, 32, 32, 3);
    EXPECT_NEAR(identity_loss(x, x, embed).value, 0.0, 1e-12);

    const TwoChannelEmbedder two;
    ImageF red(4, 4, 3);
    ImageF green(4, 4, 3);
    for (std::size_t p = 0; p < 16; ++p) {
        red.storage()[3 * p] = 0.7;
        green.storage()[3 * p + 1] = 0.4;
    }
    EXPECT_NEAR(identity_loss(red, green, two).value, 1.0, 1e-15);
}

TEST(IdentityLossTest, MatchesStandaloneCosine) {
    Rng rng(7);
    const ToyEmbedder embed(128, 9);
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> proj(
        embed.projection().data(), 128, 1024);
    for (int trial = 0; trial < 5; ++trial) {
        const ImageF a = random_image(rng, 32, 32, 3);
        const ImageF b = random_image(rng, 32, 32, 3);
        auto gray = [](const ImageF& im) {
            Eigen::VectorXd g(1024);
            for (std::size_t p = 0; p < 1024; ++p) {
                g[static_cast<Eigen::Index>(p)] =
                    (im.storage()[3 * p] + im.storage()[3 * p + 1] + im.storage()[3 * p + 2]) / 3.0;
            }
            return g;
        };
        const Eigen::VectorXd fa = proj * gray(a);
        const Eigen::VectorXd fb = proj * gray(b);
        const double cosine = fa.dot(fb) / (fa.norm() * fb.norm());
        EXPECT_NEAR(identity_loss(a, b, embed).value, 1.0 - cosine, 1e-12);
    }
}

TEST(LandmarkLossTest, Examples) {
    std::vector<Vec3> q(68, Vec3{0.1, 0.2, 0.3});
    std::vector<double> w(68, 1.0);
    w[30] = 20.0;
    EXPECT_EQ(landmark_loss(q, q, w).value, 0.0);
    std::vector<Vec3> moved = q;
    moved[30][2] += 0.1;
    EXPECT_NEAR(landmark_loss(moved, q, w).value, 20.0 * 0.01 / 68.0, 1e-15);
    EXPECT_NEAR(landmark_loss(moved, q, w).value, 2.941e-3, 1e-6);
    EXPECT_THROW(landmark_loss(moved, std::span<const Vec3>(q).first(67), w), ContractError);
}

TEST(ReconstructionTest, WeightedSum) {
    Rng rng(8);
    ReconstructionParts parts;
    EXPECT_EQ(reconstruction_objective(parts).value, 0.0);
    parts.coef.value = 1.0;
    EXPECT_EQ(reconstruction_objective(parts).value, 1.0);
    parts.coef = synthetic_report(rng, kCoeffCount);
    parts.pix = synthetic_report(rng, 12);
    parts.id = synthetic_report(rng, 12);
    parts.ldmk = synthetic_report(rng, 9);
    const ReconstructionWeights w;
    const ReconstructionReport r = reconstruction_objective(parts, w);
    EXPECT_NEAR(r.value, parts.coef.value + 1.92 * parts.pix.value + 0.2 * parts.id.value + 1.6e-3 * parts.ldmk.value,
                1e-14);
    for (std::size_t i = 0; i < 12; ++i) {
        EXPECT_NEAR(r.grad_image[i], 1.92 * parts.pix.gradient[i] + 0.2 * parts.id.gradient[i], 1e-14);
    }
    EXPECT_EQ(r.grad_coeffs, parts.coef.gradient);
    EXPECT_NEAR(r.grad_landmarks[4], 1.6e-3 * parts.ldmk.gradient[4], 1e-18);
}

TEST(PixelL1Test, Examples) {
    Rng rng(9);
    const ImageF x = random_image(rng, 3, 3, 3, 0.2, 0.6);
    MaskF m(3, 3);
    m.at(1, 1) = 1.0;
    EXPECT_EQ(pixel_l1_face(x, x, m).value, 0.0);
    ImageF y = x;
    y.at(1, 1, 0) += 0.1;
    y.at(1, 1, 1) -= 0.2;
    y.at(1, 1, 2) += 0.3;
    y.at(0, 0, 0) += 0.5;
    const LossReport r = pixel_l1_face(y, x, m);
    EXPECT_NEAR(r.value, 0.6, 1e-15);
    const ImageF g = r.gradient_image(3, 3, 3);
    EXPECT_EQ(g.at(1, 1, 0), 1.0);
    EXPECT_EQ(g.at(1, 1, 1), -1.0);
    EXPECT_EQ(g.at(0, 0, 0), 0.0);
}

TEST(SsimOhemTest, IdenticalImagesGiveMinusOne) {
    Rng rng(10);
    const ImageF x = random_image(rng, 20, 20, 3);
    const MaskF m = erode(MaskF(20, 20, 1.0), 3);
    for (double f : {0.1, 0.25, 1.0}) {
        EXPECT_EQ(ssim_ohem_loss(x, x, m, f).value, -1.0);
    }
    EXPECT_THROW(ssim_ohem_loss(x, x, MaskF(20, 20), 0.5), ContractError);
}

TEST(SsimOhemTest, KeepsTheLowestHalf) {
    Rng rng(11);
    const ImageF x = random_image(rng, 16, 16, 3);
    const ImageF y = random_image(rng, 16, 16, 3);
    const MaskF m = random_mask(rng, 16, 16, 0.6);
    const ImageF map = ssim_map(multiply(x, m), multiply(y, m));
    std::vector<double> values;
    for (std::size_t p = 0; p < m.size(); ++p) {
        if (m[p] == 1.0) {
            values.push_back(map.storage()[p]);
        }
    }
    std::sort(values.begin(), values.end());
    const std::size_t k = (values.size() + 1) / 2;
    const double expected =
        -std::accumulate(values.begin(), values.begin() + static_cast<long>(k), 0.0) / static_cast<double>(k);
    EXPECT_NEAR(ssim_ohem_loss(x, y, m, 0.5).value, expected, 1e-14);
}

TEST(SsimOhemTest, NegatedValueFallsWithFraction) {
    Rng rng(12);
    const ImageF x = random_image(rng, 16, 16, 3);
    const ImageF y = random_image(rng, 16, 16, 3);
    const MaskF m = random_mask(rng, 16, 16, 0.7);
    double previous = std::numeric_limits<double>::infinity();
    for (double f : {0.05, 0.25, 0.5, 1.0}) {
        const double v = ssim_ohem_loss(x, y, m, f).value;
        EXPECT_LE(v, previous + 1e-15);
        previous = v;
    }
}

TEST(BackgroundLossTest, Examples) {
    Rng rng(13);
    const ImageF x = random_image(rng, 5, 5, 3, 0.2, 0.8);
    const MaskF m = random_mask(rng, 5, 5);
    EXPECT_EQ(background_loss(x, x, m).value, 0.0);
    ImageF y = x;
    for (double& v : y.storage()) {
        v += 0.1;
    }
    const LossReport r = background_loss(y, x, m);
    EXPECT_NEAR(r.value, 0.3, 1e-14);
    for (std::size_t p = 0; p < m.size(); ++p) {
        for (std::size_t k = 0; k < 3; ++k) {
            EXPECT_EQ(r.gradient[3 * p + k] != 0.0, m[p] == 1.0);
        }
    }
    EXPECT_THROW(background_loss(x, x, MaskF(5, 5)), ContractError);
}

TEST(TvLossTest, Examples) {
    EXPECT_EQ(tv_loss(ImageF(4, 4, 3, 0.3)).value, 0.0);
    const LossReport r = tv_loss(ImageF(1, 2, 1, std::vector<double>{0.0, 1.0}));
    EXPECT_NEAR(r.value, 0.5, 1e-15);
    EXPECT_NEAR(r.gradient[0], -1.0, 1e-15);
    EXPECT_NEAR(r.gradient[1], 1.0, 1e-15);
    EXPECT_THROW(tv_loss(ImageF(1, 1, 3)), ContractError);
}

TEST(AdversarialTest, GeneratorExamples) {
    const std::vector<double> fooled(5, 1.0 - kEps);
    EXPECT_NEAR(adversarial_g_loss(fooled).value, kEps, 1e-12);
    const std::vector<double> half(3, 0.5);
    EXPECT_NEAR(adversarial_g_loss(half).value, std::log(2.0), 1e-15);
    const std::vector<double> mixed{0.2, 0.9, 0.55, 0.7};
    const LossReport r = adversarial_g_loss(mixed);
    EXPECT_NEAR(r.value, -(std::log(0.2) + std::log(0.9) + std::log(0.55) + std::log(0.7)) / 4.0, 1e-15);
    EXPECT_NEAR(r.gradient[0], -1.0 / (4.0 * 0.2), 1e-15);
}

TEST(AdversarialTest, DiscriminatorExamples) {
    const std::vector<double> real(4, 1.0 - kEps);
    const std::vector<double> fake(4, kEps);
    EXPECT_NEAR(adversarial_d_loss(real, fake).value, 2.0 * kEps, 1e-12);
    const std::vector<double> half(2, 0.5);
    EXPECT_NEAR(adversarial_d_loss(half, half).value, 2.0 * std::log(2.0), 1e-15);
    const std::vector<double> r{0.8, 0.6};
    const std::vector<double> f{0.3, 0.1, 0.45};
    const LossReport d = adversarial_d_loss(r, f);
    EXPECT_NEAR(d.value,
                -((std::log(0.8) + std::log(0.6)) / 2.0 + (std::log(0.7) + std::log(0.9) + std::log(0.55)) / 3.0),
                1e-15);
    ASSERT_EQ(d.gradient.size(), 5u);
    EXPECT_NEAR(d.gradient[0], -1.0 / (2.0 * 0.8), 1e-15);
    EXPECT_NEAR(d.gradient[2], 1.0 / (3.0 * 0.7), 1e-15);
}

TEST(GeneratorObjectiveTest, Examples) {
    Rng rng(14);
    EXPECT_EQ(generator_objective({}).value, 0.0);
    GeneratorParts parts;
    parts.tv = LossReport{1.0, std::vector<double>(4, 0.0), {}, 0};
    EXPECT_NEAR(generator_objective(parts).value, 0.1, 1e-16);
}

TEST(GeneratorObjectiveTest, LinearInComponents) {
    Rng rng(15);
    const std::size_t n = 30;
    GeneratorParts parts{synthetic_report(rng, n), synthetic_report(rng, n), synthetic_report(rng, n),
                         synthetic_report(rng, n), synthetic_report(rng, n), synthetic_report(rng, n)};
    for (int trial = 0; trial < 3; ++trial) {
        GeneratorWeights w;
        if (trial > 0) {
            w = {rng.uniform(0, 10), rng.uniform(0, 10), rng.uniform(0, 10),
                 rng.uniform(0, 1),  rng.uniform(0, 1),  rng.uniform(0, 1)};
        }
        const LossReport total = generator_objective(parts, w);
        const double weights[6] = {w.pix, w.sm, w.bg, w.id, w.tv, w.adv};
        const LossReport* reports[6] = {&*parts.pix, &*parts.sm, &*parts.bg, &*parts.id, &*parts.tv, &*parts.adv};
        double value = 0.0;
        for (int k = 0; k < 6; ++k) {
            value += weights[k] * reports[k]->value;
        }
        EXPECT_NEAR(total.value, value, 1e-12);
        for (std::size_t i = 0; i < n; ++i) {
            double g = 0.0;
            for (int k = 0; k < 6; ++k) {
                g += weights[k] * reports[k]->gradient[i];
            }
            EXPECT_NEAR(total.gradient[i], g, 1e-12);
        }
    }
}

TEST(GradcheckTest, StandardSuitePassesAtSmallSize) {
    GradcheckOptions options;
    options.probes = 40;
    const auto results = standard_gradcheck_suite(16, 3, options);
    EXPECT_EQ(results.size(), 12u);
    for (const auto& r : results) {
        EXPECT_TRUE(r.passed) << r.name << " max rel err " << r.max_relative_error;
        EXPECT_GT(r.checked, 0u) << r.name;
    }
}

TEST(GradcheckTest, DetectsAWrongGradient) {
    GradcheckOptions options;
    options.probes = 10;
    const std::vector<double> x{0.3, 0.6, 0.9};
    const GradcheckResult r = gradcheck(
        "broken",
        [](std::span<const double> v) {
            LossReport rep;
            rep.gradient.resize(v.size());
            for (std::size_t i = 0; i < v.size(); ++i) {
                rep.value += v[i] * v[i];
                rep.gradient[i] = v[i];  // should be 2 v
            }
            return rep;
        },
        x, options);
    EXPECT_FALSE(r.passed);
}
