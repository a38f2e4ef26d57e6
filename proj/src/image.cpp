#include "deocc/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "deocc/random.hpp"

namespace deocc {

ImageF::ImageF(std::size_t height, std::size_t width, std::size_t channels, double fill)
    : height_(height), width_(width), channels_(channels), data_(height * width * channels, fill) {
    if (channels == 0) {
        throw ContractError("ImageF: channel count must be positive");
    }
}

ImageF::ImageF(std::size_t height, std::size_t width, std::size_t channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    if (channels == 0) {
        throw ContractError("ImageF: channel count must be positive");
    }
    if (data_.size() != height * width * channels) {
        throw ContractError("ImageF: data length does not match dimensions");
    }
}

MaskF::MaskF(std::size_t height, std::size_t width, double fill)
    : height_(height), width_(width), data_(height * width, fill) {}

MaskF::MaskF(std::size_t height, std::size_t width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
    if (data_.size() != height * width) {
        throw ContractError("MaskF: data length does not match dimensions");
    }
}

bool MaskF::is_binary() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

double MaskF::sum() const {
    double s = 0.0;
    for (double v : data_) {
        s += v;
    }
    return s;
}

std::size_t MaskF::count_nonzero() const {
    return static_cast<std::size_t>(std::count_if(data_.begin(), data_.end(), [](double v) { return v != 0.0; }));
}

ImageF MaskF::to_image() const {
    return ImageF(height_, width_, 1, data_);
}

MaskF MaskF::from_image(const ImageF& image) {
    if (image.channels() != 1) {
        throw ContractError("MaskF::from_image: expected a single-channel image");
    }
    return MaskF(image.height(), image.width(), image.storage());
}

void require_binary(const MaskF& mask, const char* what) {
    if (!mask.is_binary()) {
        throw ContractError(std::string(what) + ": mask is not binary");
    }
}

void require_same_shape(const MaskF& a, const MaskF& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ContractError(std::string(what) + ": mask dimensions differ");
    }
}

void require_matches(const MaskF& mask, const ImageF& image, const char* what) {
    if (!mask.matches(image)) {
        throw ContractError(std::string(what) + ": mask and image dimensions differ");
    }
}

void require_same_shape(const ImageF& a, const ImageF& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ContractError(std::string(what) + ": image dimensions differ");
    }
}

MaskF threshold(const MaskF& mask, double level) {
    MaskF out(mask.height(), mask.width());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        out[i] = mask[i] >= level ? 1.0 : 0.0;
    }
    return out;
}

MaskF erode(const MaskF& mask, int radius) {
    require_binary(mask, "erode");
    if (radius < 0) {
        throw ContractError("erode: radius must be non-negative");
    }
    if (radius == 0) {
        return mask;
    }
    const auto h = static_cast<long>(mask.height());
    const auto w = static_cast<long>(mask.width());
    const long r = radius;

    // Half-width of the disk on each row offset.
    std::vector<long> span(static_cast<std::size_t>(2 * r + 1));
    for (long dy = -r; dy <= r; ++dy) {
        long dx = 0;
        while ((dx + 1) * (dx + 1) + dy * dy <= r * r) {
            ++dx;
        }
        span[static_cast<std::size_t>(dy + r)] = dx;
    }

    MaskF out(mask.height(), mask.width());
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            if (mask.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) == 0.0) {
                continue;
            }
            bool keep = true;
            for (long dy = -r; dy <= r && keep; ++dy) {
                const long yy = y + dy;
                const long half = span[static_cast<std::size_t>(dy + r)];
                if (yy < 0 || yy >= h || x - half < 0 || x + half >= w) {
                    keep = false;
                    break;
                }
                for (long dx = -half; dx <= half; ++dx) {
                    if (mask.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(x + dx)) == 0.0) {
                        keep = false;
                        break;
                    }
                }
            }
            out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = keep ? 1.0 : 0.0;
        }
    }
    return out;
}

ImageF gaussian_noise_fill(const ImageF& image, const MaskF& region, const NoiseParams& params) {
    require_matches(region, image, "gaussian_noise_fill");
    require_binary(region, "gaussian_noise_fill");
    if (!(params.stddev >= 0.0)) {
        throw ContractError("gaussian_noise_fill: stddev must be non-negative");
    }
    ImageF out = image;
    Rng rng(params.seed);
    const std::size_t c = image.channels();
    for (std::size_t p = 0; p < region.size(); ++p) {
        if (region[p] == 0.0) {
            continue;
        }
        for (std::size_t k = 0; k < c; ++k) {
            out.storage()[p * c + k] = std::clamp(rng.normal(params.mean, params.stddev), 0.0, 1.0);
        }
    }
    return out;
}

ImageF to_gray(const ImageF& image) {
    ImageF out(image.height(), image.width(), 1);
    const std::size_t c = image.channels();
    for (std::size_t p = 0; p < image.pixel_count(); ++p) {
        double s = 0.0;
        for (std::size_t k = 0; k < c; ++k) {
            s += image.storage()[p * c + k];
        }
        out.storage()[p] = s / static_cast<double>(c);
    }
    return out;
}

ImageF multiply(const ImageF& image, const MaskF& mask) {
    require_matches(mask, image, "multiply");
    ImageF out = image;
    const std::size_t c = image.channels();
    for (std::size_t p = 0; p < mask.size(); ++p) {
        for (std::size_t k = 0; k < c; ++k) {
            out.storage()[p * c + k] *= mask[p];
        }
    }
    return out;
}

}  // namespace deocc
