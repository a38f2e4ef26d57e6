#include <gtest/gtest.h>

#include <cmath>

#include "deocc/ssim.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace deocc;
using namespace deocc::oracle;
using deocc::testing::random_image;

TEST(SsimTest, ReflectIndexMirrorsWithoutRepeatingTheEdge) {
    EXPECT_EQ(reflect_index(-1, 5), 1);
    EXPECT_EQ(reflect_index(5, 5), 3);
    EXPECT_EQ(reflect_index(-7, 5), 1);
    EXPECT_EQ(reflect_index(2, 1), 0);
}

TEST(SsimTest, WindowIsNormalisedAndSymmetric) {
    const auto taps = gaussian_window(11, 1.5);
    double total = 0.0;
    for (std::size_t i = 0; i < 11; ++i) {
        total += taps[i];
        EXPECT_EQ(taps[i], taps[10 - i]);
    }
    EXPECT_NEAR(total, 1.0, 1e-15);
}

TEST(SsimTest, MatchesNaiveOracle) {
    Rng rng(1);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t c = trial % 2 == 0 ? 3 : 1;
        const ImageF x = random_image(rng, 16, 16, c);
        const ImageF y = random_image(rng, 16, 16, c);
        const ImageF fast = ssim_map(x, y);
        const ImageF slow = naive_ssim(x, y);
        for (std::size_t i = 0; i < fast.size(); ++i) {
            EXPECT_NEAR(fast.storage()[i], slow.storage()[i], 1e-10);
        }
    }
}

TEST(SsimTest, SelfSimilarityIsOne) {
    Rng rng(2);
    const ImageF x = random_image(rng, 20, 13, 3);
    const ImageF map = ssim_map(x, x);
    for (double v : map.storage()) {
        EXPECT_NEAR(v, 1.0, 1e-12);
    }
}

TEST(SsimTest, SymmetricInArguments) {
    Rng rng(3);
    const ImageF x = random_image(rng, 18, 18, 3);
    const ImageF y = random_image(rng, 18, 18, 3);
    const ImageF a = ssim_map(x, y);
    const ImageF b = ssim_map(y, x);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_NEAR(a.storage()[i], b.storage()[i], 1e-12);
    }
}

TEST(SsimTest, InvertedPatchScoresBelowOne) {
    Rng rng(4);
    const ImageF x = random_image(rng, 16, 16, 1, 0.3, 0.7);
    ImageF y = x;
    for (double& v : y.storage()) {
        v = 1.0 - v;
    }
    const ImageF map = ssim_map(x, y);
    for (double v : map.storage()) {
        EXPECT_LT(v, 1.0);
    }
}

TEST(SsimTest, RejectsMismatchedShapes) {
    EXPECT_THROW(ssim_map(ImageF(4, 4, 3), ImageF(4, 5, 3)), ContractError);
    SsimParams even;
    even.window_size = 10;
    EXPECT_THROW(ssim_map(ImageF(4, 4, 1), ImageF(4, 4, 1), even), ContractError);
}

TEST(SsimTest, BackwardMatchesFiniteDifferences) {
    Rng rng(5);
    const ImageF x = random_image(rng, 14, 12, 3);
    const ImageF y = random_image(rng, 14, 12, 3);
    const ImageF upstream = random_image(rng, 14, 12, 1, -1.0, 1.0);
    auto objective = [&](const ImageF& probe) {
        const ImageF map = ssim_map(probe, y);
        double s = 0.0;
        for (std::size_t i = 0; i < map.size(); ++i) {
            s += upstream.storage()[i] * map.storage()[i];
        }
        return s;
    };
    const ImageF grad = ssim_backward(x, y, upstream);
    const double h = 1e-5;
    for (int probe = 0; probe < 60; ++probe) {
        const std::size_t i = rng.below(x.size());
        ImageF plus = x;
        ImageF minus = x;
        plus.storage()[i] += h;
        minus.storage()[i] -= h;
        const double numeric = (objective(plus) - objective(minus)) / (2.0 * h);
        EXPECT_NEAR(grad.storage()[i], numeric, 1e-6 * std::max(1.0, std::abs(numeric))) << i;
    }
}
