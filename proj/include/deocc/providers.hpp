#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "deocc/image.hpp"

namespace deocc {

/// Face-recognition style embedding F: image -> unit vector.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual std::size_t dimension() const = 0;
    /// Unit-norm embedding; throws ContractError when the raw feature is zero.
    virtual std::vector<double> embed(const ImageF& image) const = 0;
    /// d/dx of F(x) . target for a fixed unit `target`.
    virtual ImageF cosine_gradient(const ImageF& image, std::span<const double> target) const = 0;
};

/**
 * Seeded linear stand-in for a recognition network.
 *
 * Channel-mean gray image, box-averaged onto a 32 x 32 grid (source pixel
 * (y, x) falls in cell (32 y / H, 32 x / W)), projected by a fixed Gaussian
 * matrix to `dimension` features and normalised.
 */
class ToyEmbedder final : public EmbeddingProvider {
public:
    static constexpr std::size_t kGrid = 32;

    explicit ToyEmbedder(std::size_t dimension = 128, std::uint64_t seed = 0);

    std::size_t dimension() const override { return dimension_; }
    std::vector<double> embed(const ImageF& image) const override;
    ImageF cosine_gradient(const ImageF& image, std::span<const double> target) const override;

    /// Raw feature before normalisation.
    std::vector<double> features(const ImageF& image) const;
    std::span<const double> projection() const { return projection_; }

private:
    std::vector<double> downsample(const ImageF& image) const;

    std::size_t dimension_;
    std::vector<double> projection_;  // dimension x 1024, row-major
};

/// Discriminator D: image -> probability of being real.
class DiscriminatorProvider {
public:
    virtual ~DiscriminatorProvider() = default;

    virtual double probability(const ImageF& image) const = 0;
    /// dD/dx.
    virtual ImageF gradient(const ImageF& image) const = 0;
};

/// Always 0.5 with zero gradient.
class NullDiscriminator final : public DiscriminatorProvider {
public:
    double probability(const ImageF&) const override { return 0.5; }
    ImageF gradient(const ImageF& image) const override;
};

/// sigmoid(w . x / sqrt(n) + bias) with seeded Gaussian w; a differentiable test double.
class LogisticDiscriminator final : public DiscriminatorProvider {
public:
    LogisticDiscriminator(std::size_t height, std::size_t width, std::size_t channels, std::uint64_t seed,
                          double bias = 0.0);

    double probability(const ImageF& image) const override;
    ImageF gradient(const ImageF& image) const override;

private:
    double logit(const ImageF& image) const;

    std::size_t height_;
    std::size_t width_;
    std::size_t channels_;
    std::vector<double> weights_;
    double bias_;
};

}  // namespace deocc
