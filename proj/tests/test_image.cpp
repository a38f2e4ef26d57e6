#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "deocc/image.hpp"
#include "deocc/random.hpp"
#include "support.hpp"

using namespace deocc;
using deocc::testing::random_image;
using deocc::testing::random_mask;

namespace {

// Erosion by direct definition: every disk offset must land on a set pixel inside the image.
MaskF erode_oracle(const MaskF& m, int r) {
    MaskF out(m.height(), m.width());
    const long h = static_cast<long>(m.height());
    const long w = static_cast<long>(m.width());
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            bool all = true;
            for (long dy = -r; dy <= r && all; ++dy) {
                for (long dx = -r; dx <= r && all; ++dx) {
                    if (dx * dx + dy * dy > r * r) {
                        continue;
                    }
                    const long yy = y + dy;
                    const long xx = x + dx;
                    all = yy >= 0 && yy < h && xx >= 0 && xx < w && m.at(yy, xx) == 1.0;
                }
            }
            out.at(y, x) = all ? 1.0 : 0.0;
        }
    }
    return out;
}

}  // namespace

TEST(ImageTest, ConstructorRejectsWrongDataLength) {
    EXPECT_THROW(ImageF(2, 2, 3, std::vector<double>(11)), ContractError);
    EXPECT_THROW(MaskF(2, 2, std::vector<double>(3)), ContractError);
}

TEST(ImageTest, InterleavedLayout) {
    ImageF image(2, 3, 3);
    image.at(1, 2, 1) = 0.5;
    EXPECT_EQ(image.storage()[(1 * 3 + 2) * 3 + 1], 0.5);
}

TEST(MaskTest, BinaryDetection) {
    MaskF m(1, 3, std::vector<double>{0.0, 1.0, 1.0});
    EXPECT_TRUE(m.is_binary());
    m[1] = 0.5;
    EXPECT_FALSE(m.is_binary());
    EXPECT_THROW(require_binary(m, "test"), ContractError);
}

TEST(MaskTest, ThresholdIsInclusive) {
    const MaskF m(1, 4, std::vector<double>{0.0, 0.49, 0.5, 0.9});
    const MaskF t = threshold(m);
    EXPECT_EQ(t, MaskF(1, 4, std::vector<double>{0.0, 0.0, 1.0, 1.0}));
}

TEST(ErodeTest, RadiusZeroIsIdentity) {
    Rng rng(1);
    const MaskF m = random_mask(rng, 9, 7);
    EXPECT_EQ(erode(m, 0), m);
}

TEST(ErodeTest, MatchesBruteForceOracle) {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const MaskF m = random_mask(rng, 17, 13, 0.85);
        for (int r : {1, 2, 3}) {
            EXPECT_EQ(erode(m, r), erode_oracle(m, r)) << "trial " << trial << " radius " << r;
        }
    }
}

TEST(ErodeTest, BorderCountsAsZero) {
    const MaskF full(7, 7, 1.0);
    const MaskF e = erode(full, 1);
    EXPECT_EQ(e.at(0, 3), 0.0);
    EXPECT_EQ(e.at(1, 1), 1.0);
    EXPECT_EQ(e.count_nonzero(), 25u);
}

TEST(ErodeTest, RejectsSoftMaskAndNegativeRadius) {
    MaskF m(3, 3, 1.0);
    EXPECT_THROW(erode(m, -1), ContractError);
    m[4] = 0.3;
    EXPECT_THROW(erode(m, 1), ContractError);
}

TEST(NoiseTest, OnlyRegionChangesAndValuesClamped) {
    Rng rng(3);
    const ImageF image = random_image(rng, 16, 16, 3);
    const MaskF region = random_mask(rng, 16, 16);
    const ImageF out = gaussian_noise_fill(image, region, {0.5, 0.2, 9});
    for (std::size_t p = 0; p < region.size(); ++p) {
        for (std::size_t k = 0; k < 3; ++k) {
            const double v = out.storage()[3 * p + k];
            if (region[p] == 0.0) {
                EXPECT_EQ(v, image.storage()[3 * p + k]);
            } else {
                EXPECT_GE(v, 0.0);
                EXPECT_LE(v, 1.0);
            }
        }
    }
}

TEST(NoiseTest, SamplesFollowTheSeededStream) {
    const ImageF image(2, 2, 3, 0.0);
    MaskF region(2, 2);
    region.at(0, 1) = 1.0;
    region.at(1, 0) = 1.0;
    const ImageF out = gaussian_noise_fill(image, region, {0.5, 0.01, 42});
    Rng rng(42);
    for (std::size_t p : {1u, 2u}) {
        for (std::size_t k = 0; k < 3; ++k) {
            EXPECT_EQ(out.storage()[3 * p + k], std::clamp(rng.normal(0.5, 0.01), 0.0, 1.0));
        }
    }
}

TEST(NoiseTest, DeterministicForSeed) {
    const ImageF image(8, 8, 3, 0.2);
    const MaskF region(8, 8, 1.0);
    EXPECT_EQ(gaussian_noise_fill(image, region, {0.5, 0.2, 7}), gaussian_noise_fill(image, region, {0.5, 0.2, 7}));
    EXPECT_NE(gaussian_noise_fill(image, region, {0.5, 0.2, 7}), gaussian_noise_fill(image, region, {0.5, 0.2, 8}));
}

TEST(NoiseTest, UnclampedStreamStatistics) {
    Rng rng(11);
    const int n = 200000;
    double sum = 0.0;
    double sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double v = rng.normal(0.5, 0.2);
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    const double sd = std::sqrt(sq / n - mean * mean);
    EXPECT_NEAR(mean, 0.5, 0.003);
    EXPECT_NEAR(sd, 0.2, 0.003);
}

TEST(ImageOpsTest, GrayIsChannelMean) {
    const ImageF image(1, 1, 3, std::vector<double>{0.3, 0.6, 0.9});
    EXPECT_NEAR(to_gray(image).at(0, 0), 0.6, 1e-15);
}

TEST(ImageOpsTest, MultiplyByMask) {
    const ImageF image(1, 2, 3, 0.7);
    const MaskF mask(1, 2, std::vector<double>{1.0, 0.0});
    const ImageF out = multiply(image, mask);
    EXPECT_EQ(out.at(0, 0, 2), 0.7);
    EXPECT_EQ(out.at(0, 1, 0), 0.0);
}

TEST(RandomTest, BelowStaysInRangeAndSeedsDiffer) {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        EXPECT_LT(rng.below(7), 7u);
    }
    EXPECT_NE(mix_seed(1, 0), mix_seed(1, 1));
    EXPECT_NE(mix_seed(1, 0), mix_seed(2, 0));
}

TEST(ErodeTest, FiveByFiveRadiusOneKeepsInterior) {
    const MaskF e = erode(MaskF(5, 5, 1.0), 1);
    for (std::size_t y = 0; y < 5; ++y) {
        for (std::size_t x = 0; x < 5; ++x) {
            const bool interior = y >= 1 && y <= 3 && x >= 1 && x <= 3;
            EXPECT_EQ(e.at(y, x), interior ? 1.0 : 0.0);
        }
    }
}

TEST(ErodeTest, SinglePixelVanishes) {
    MaskF m(3, 3);
    m.at(1, 1) = 1.0;
    EXPECT_EQ(erode(m, 1).count_nonzero(), 0u);
}

TEST(ErodeTest, RepeatedErosionIsContained) {
    Rng rng(4);
    const MaskF m = random_mask(rng, 20, 20, 0.9);
    for (int a = 0; a <= 2; ++a) {
        const MaskF first = erode(m, a);
        for (int b = 0; b <= 2; ++b) {
            const MaskF second = erode(first, b);
            for (std::size_t i = 0; i < m.size(); ++i) {
                EXPECT_LE(second[i], first[i]);
            }
        }
    }
}

TEST(NoiseTest, EmptyRegionIsIdentityAndZeroSpreadIsConstant) {
    Rng rng(6);
    const ImageF image = random_image(rng, 4, 4, 3);
    EXPECT_EQ(gaussian_noise_fill(image, MaskF(4, 4, 0.0), {}), image);
    EXPECT_EQ(gaussian_noise_fill(image, MaskF(4, 4, 1.0), {0.5, 0.0, 1}), ImageF(4, 4, 3, 0.5));
}

TEST(NoiseTest, RegionSampleMeanNearHalf) {
    const ImageF image(128, 128, 1, 0.0);
    const ImageF out = gaussian_noise_fill(image, MaskF(128, 128, 1.0), {0.5, 0.2, 2024});
    double sum = 0.0;
    for (double v : out.storage()) {
        sum += v;
    }
    EXPECT_NEAR(sum / static_cast<double>(out.size()), 0.5, 0.01);
}
