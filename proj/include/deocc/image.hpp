#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "deocc/errors.hpp"

namespace deocc {

/**
 * Dense H x W x C image of doubles, row-major with interleaved channels.
 *
 * Pipeline images live in [0,1]; gradients and intermediate solves reuse the
 * same container without that range restriction.
 */
class ImageF {
public:
    ImageF() = default;
    ImageF(std::size_t height, std::size_t width, std::size_t channels, double fill = 0.0);
    ImageF(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> data);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t channels() const { return channels_; }
    std::size_t pixel_count() const { return height_ * width_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& at(std::size_t y, std::size_t x, std::size_t c = 0) { return data_[(y * width_ + x) * channels_ + c]; }
    double at(std::size_t y, std::size_t x, std::size_t c = 0) const { return data_[(y * width_ + x) * channels_ + c]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }
    std::vector<double>& storage() { return data_; }
    const std::vector<double>& storage() const { return data_; }

    bool same_shape(const ImageF& other) const {
        return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
    }

    bool operator==(const ImageF& other) const = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::size_t channels_ = 0;
    std::vector<double> data_;
};

/// Single-channel map in [0,1]. Binary masks hold only exact 0 and 1.
class MaskF {
public:
    MaskF() = default;
    MaskF(std::size_t height, std::size_t width, double fill = 0.0);
    MaskF(std::size_t height, std::size_t width, std::vector<double> data);

    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t size() const { return data_.size(); }

    double& at(std::size_t y, std::size_t x) { return data_[y * width_ + x]; }
    double at(std::size_t y, std::size_t x) const { return data_[y * width_ + x]; }
    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::span<double> data() { return data_; }
    std::span<const double> data() const { return data_; }

    /// True when every element is exactly 0 or 1.
    bool is_binary() const;
    double sum() const;
    std::size_t count_nonzero() const;

    bool same_shape(const MaskF& other) const { return height_ == other.height_ && width_ == other.width_; }
    bool matches(const ImageF& image) const { return height_ == image.height() && width_ == image.width(); }

    /// View as a 1-channel image (copy).
    ImageF to_image() const;
    static MaskF from_image(const ImageF& image);

    bool operator==(const MaskF& other) const = default;

private:
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<double> data_;
};

void require_binary(const MaskF& mask, const char* what);
void require_same_shape(const MaskF& a, const MaskF& b, const char* what);
void require_matches(const MaskF& mask, const ImageF& image, const char* what);
void require_same_shape(const ImageF& a, const ImageF& b, const char* what);

/// Elementwise `v >= threshold ? 1 : 0`.
MaskF threshold(const MaskF& mask, double threshold = 0.5);

/// Binary erosion by the disk {(dx,dy) : dx^2 + dy^2 <= radius^2}. Pixels outside the image count as 0.
MaskF erode(const MaskF& mask, int radius);

/// Mean 0.5, stddev 0.2 unless overridden.
struct NoiseParams {
    double mean = 0.5;
    double stddev = 0.2;
    std::uint64_t seed = 0;
};

/**
 * Replace pixels inside `region` with i.i.d. N(mean, stddev^2) samples clamped to [0,1].
 *
 * Samples are drawn in row-major pixel order, channel-interleaved, from the
 * stream of `Rng(seed).normal()`, one sample per covered element.
 */
ImageF gaussian_noise_fill(const ImageF& image, const MaskF& region, const NoiseParams& params);

/// Grayscale as the channel mean.
ImageF to_gray(const ImageF& image);

ImageF multiply(const ImageF& image, const MaskF& mask);

}  // namespace deocc
