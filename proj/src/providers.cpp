#include "deocc/providers.hpp"

#include <cmath>

#include "deocc/random.hpp"

namespace deocc {

ToyEmbedder::ToyEmbedder(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), projection_(dimension * kGrid * kGrid) {
    if (dimension == 0) {
        throw ContractError("ToyEmbedder: dimension must be positive");
    }
    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(kGrid * kGrid));
    for (double& v : projection_) {
        v = rng.normal() * scale;
    }
}

std::vector<double> ToyEmbedder::downsample(const ImageF& image) const {
    if (image.height() == 0 || image.width() == 0) {
        throw ContractError("ToyEmbedder: empty image");
    }
    std::vector<double> cells(kGrid * kGrid, 0.0);
    std::vector<double> counts(kGrid * kGrid, 0.0);
    const std::size_t c = image.channels();
    for (std::size_t y = 0; y < image.height(); ++y) {
        const std::size_t gy = y * kGrid / image.height();
        for (std::size_t x = 0; x < image.width(); ++x) {
            const std::size_t gx = x * kGrid / image.width();
            double gray = 0.0;
            for (std::size_t k = 0; k < c; ++k) {
                gray += image.at(y, x, k);
            }
            cells[gy * kGrid + gx] += gray / static_cast<double>(c);
            counts[gy * kGrid + gx] += 1.0;
        }
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (counts[i] > 0.0) {
            cells[i] /= counts[i];
        }
    }
    return cells;
}

std::vector<double> ToyEmbedder::features(const ImageF& image) const {
    const std::vector<double> cells = downsample(image);
    std::vector<double> z(dimension_, 0.0);
    for (std::size_t i = 0; i < dimension_; ++i) {
        const double* row = projection_.data() + i * cells.size();
        double s = 0.0;
        for (std::size_t j = 0; j < cells.size(); ++j) {
            s += row[j] * cells[j];
        }
        z[i] = s;
    }
    return z;
}

std::vector<double> ToyEmbedder::embed(const ImageF& image) const {
    std::vector<double> z = features(image);
    double norm = 0.0;
    for (double v : z) {
        norm += v * v;
    }
    norm = std::sqrt(norm);
    if (!(norm > 0.0)) {
        throw ContractError("ToyEmbedder: zero-norm embedding");
    }
    for (double& v : z) {
        v /= norm;
    }
    return z;
}

ImageF ToyEmbedder::cosine_gradient(const ImageF& image, std::span<const double> target) const {
    if (target.size() != dimension_) {
        throw ContractError("ToyEmbedder: target dimension mismatch");
    }
    const std::vector<double> z = features(image);
    double norm2 = 0.0;
    double zt = 0.0;
    for (std::size_t i = 0; i < dimension_; ++i) {
        norm2 += z[i] * z[i];
        zt += z[i] * target[i];
    }
    const double norm = std::sqrt(norm2);
    if (!(norm > 0.0)) {
        throw ContractError("ToyEmbedder: zero-norm embedding");
    }
    // d/dz of (z . t) / |z|.
    std::vector<double> dz(dimension_);
    for (std::size_t i = 0; i < dimension_; ++i) {
        dz[i] = target[i] / norm - zt * z[i] / (norm2 * norm);
    }
    std::vector<double> d_cells(kGrid * kGrid, 0.0);
    for (std::size_t i = 0; i < dimension_; ++i) {
        const double* row = projection_.data() + i * d_cells.size();
        for (std::size_t j = 0; j < d_cells.size(); ++j) {
            d_cells[j] += row[j] * dz[i];
        }
    }
    std::vector<double> counts(kGrid * kGrid, 0.0);
    for (std::size_t y = 0; y < image.height(); ++y) {
        for (std::size_t x = 0; x < image.width(); ++x) {
            counts[(y * kGrid / image.height()) * kGrid + x * kGrid / image.width()] += 1.0;
        }
    }
    ImageF grad(image.height(), image.width(), image.channels());
    const auto c = static_cast<double>(image.channels());
    for (std::size_t y = 0; y < image.height(); ++y) {
        for (std::size_t x = 0; x < image.width(); ++x) {
            const std::size_t cell = (y * kGrid / image.height()) * kGrid + x * kGrid / image.width();
            const double g = d_cells[cell] / (counts[cell] * c);
            for (std::size_t k = 0; k < image.channels(); ++k) {
                grad.at(y, x, k) = g;
            }
        }
    }
    return grad;
}

ImageF NullDiscriminator::gradient(const ImageF& image) const {
    return ImageF(image.height(), image.width(), image.channels(), 0.0);
}

LogisticDiscriminator::LogisticDiscriminator(std::size_t height, std::size_t width, std::size_t channels,
                                             std::uint64_t seed, double bias)
    : height_(height), width_(width), channels_(channels), weights_(height * width * channels), bias_(bias) {
    Rng rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(1, weights_.size())));
    for (double& w : weights_) {
        w = rng.normal() * scale;
    }
}

double LogisticDiscriminator::logit(const ImageF& image) const {
    if (image.height() != height_ || image.width() != width_ || image.channels() != channels_) {
        throw ContractError("LogisticDiscriminator: image shape mismatch");
    }
    double s = bias_;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        s += weights_[i] * (image.storage()[i] - 0.5);
    }
    return s;
}

double LogisticDiscriminator::probability(const ImageF& image) const {
    return 1.0 / (1.0 + std::exp(-logit(image)));
}

ImageF LogisticDiscriminator::gradient(const ImageF& image) const {
    const double p = probability(image);
    ImageF grad(height_, width_, channels_);
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        grad.storage()[i] = p * (1.0 - p) * weights_[i];
    }
    return grad;
}

}  // namespace deocc
