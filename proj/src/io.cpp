#include "deocc/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <string>

namespace deocc {
namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f != nullptr) {
            std::fclose(f);
        }
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_handler(png_structp png, png_const_charp message) {
    auto* text = static_cast<std::string*>(png_get_error_ptr(png));
    if (text != nullptr) {
        *text = message;
    }
    png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
}

std::uint64_t get_u64(std::span<const std::uint8_t> bytes, std::size_t offset) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v |= static_cast<std::uint64_t>(bytes[offset + static_cast<std::size_t>(i)]) << (8 * i);
    }
    return v;
}

bool has_png_extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    return ext == ".png";
}

}  // namespace

std::uint8_t to_byte(double v) {
    const double clamped = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::floor(clamped * 255.0 + 0.5));
}

ImageF load_png(const std::filesystem::path& path) {
    FilePtr file(std::fopen(path.string().c_str(), "rb"));
    if (!file) {
        throw IoError("load_png: cannot open " + path.string());
    }
    std::uint8_t signature[8] = {};
    if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
        throw FormatError("load_png: not a PNG file: " + path.string());
    }

    std::string message;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_handler, png_warning_handler);
    png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
    if (png == nullptr || info == nullptr) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("load_png: libpng initialisation failed");
    }

    std::vector<std::uint8_t> pixels;
    std::vector<png_bytep> rows;
    png_uint_32 width = 0;
    png_uint_32 height = 0;
    int bit_depth = 0;
    int color_type = 0;
    volatile bool unsupported = false;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("load_png: " + message + " (" + path.string() + ")");
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    png_get_IHDR(png, info, &width, &height, &bit_depth, &color_type, nullptr, nullptr, nullptr);
    if (bit_depth != 8 || (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_RGB)) {
        unsupported = true;
    } else {
        const std::size_t channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
        pixels.resize(static_cast<std::size_t>(width) * height * channels);
        rows.resize(height);
        for (png_uint_32 y = 0; y < height; ++y) {
            rows[y] = pixels.data() + static_cast<std::size_t>(y) * width * channels;
        }
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);
    }
    png_destroy_read_struct(&png, &info, nullptr);

    if (unsupported) {
        throw FormatError("load_png: only 8-bit gray or RGB PNG is supported (" + path.string() + ")");
    }
    const std::size_t channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
    ImageF out(height, width, channels);
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        out.storage()[i] = static_cast<double>(pixels[i]) / 255.0;
    }
    return out;
}

void save_png(const ImageF& image, const std::filesystem::path& path) {
    if (image.channels() != 1 && image.channels() != 3) {
        throw ContractError("save_png: channels must be 1 or 3");
    }
    if (image.height() == 0 || image.width() == 0) {
        throw ContractError("save_png: PNG cannot hold an empty image");
    }
    std::vector<std::uint8_t> pixels(image.size());
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        pixels[i] = to_byte(image.storage()[i]);
    }
    std::vector<png_bytep> rows(image.height());
    for (std::size_t y = 0; y < image.height(); ++y) {
        rows[y] = pixels.data() + y * image.width() * image.channels();
    }

    FilePtr file(std::fopen(path.string().c_str(), "wb"));
    if (!file) {
        throw IoError("save_png: cannot open " + path.string() + " for writing");
    }
    std::string message;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_error_handler, png_warning_handler);
    png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
    if (png == nullptr || info == nullptr) {
        png_destroy_write_struct(&png, &info);
        throw IoError("save_png: libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("save_png: " + message + " (" + path.string() + ")");
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width()), static_cast<png_uint_32>(image.height()), 8,
                 image.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fflush(file.get()) != 0) {
        throw IoError("save_png: write failed for " + path.string());
    }
}

MaskF load_mask_png(const std::filesystem::path& path, double level) {
    ImageF image = load_png(path);
    if (image.channels() != 1) {
        image = to_gray(image);
    }
    return threshold(MaskF::from_image(image), level);
}

void save_mask_png(const MaskF& mask, const std::filesystem::path& path) {
    save_png(mask.to_image(), path);
}

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor) {
    const std::uint64_t count = tensor.height * tensor.width * tensor.channels;
    if (count != tensor.values.size()) {
        throw ContractError("encode_tensor: payload length does not match dimensions");
    }
    std::vector<std::uint8_t> out;
    out.reserve(kTensorHeaderBytes + 4 * tensor.values.size());
    for (char ch : {'D', 'T', 'N', '1', '\0', '\0', '\0', '\0'}) {
        out.push_back(static_cast<std::uint8_t>(ch));
    }
    put_u64(out, tensor.height);
    put_u64(out, tensor.width);
    put_u64(out, tensor.channels);
    for (float v : tensor.values) {
        const auto bits = std::bit_cast<std::uint32_t>(v);
        for (int i = 0; i < 4; ++i) {
            out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
        }
    }
    return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kTensorHeaderBytes) {
        throw FormatError("DTN1: truncated header");
    }
    if (std::memcmp(bytes.data(), "DTN1", 4) != 0) {
        throw FormatError("DTN1: bad magic");
    }
    if (bytes[4] != 0 || bytes[5] != 0 || bytes[6] != 0 || bytes[7] != 0) {
        throw FormatError("DTN1: reserved bytes must be zero");
    }
    Tensor t;
    t.height = get_u64(bytes, 8);
    t.width = get_u64(bytes, 16);
    t.channels = get_u64(bytes, 24);

    constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();
    std::uint64_t count = t.height;
    if (t.width != 0 && count > kMax / t.width) {
        throw FormatError("DTN1: dimension overflow");
    }
    count *= t.width;
    if (t.channels != 0 && count > kMax / t.channels) {
        throw FormatError("DTN1: dimension overflow");
    }
    count *= t.channels;
    if (count > (kMax - kTensorHeaderBytes) / 4) {
        throw FormatError("DTN1: dimension overflow");
    }
    const std::uint64_t expected = kTensorHeaderBytes + 4 * count;
    if (bytes.size() < expected) {
        throw FormatError("DTN1: truncated payload");
    }
    if (bytes.size() > expected) {
        throw FormatError("DTN1: trailing bytes after payload");
    }
    t.values.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) {
            bits |= static_cast<std::uint32_t>(bytes[kTensorHeaderBytes + 4 * i + static_cast<std::uint64_t>(b)])
                    << (8 * b);
        }
        t.values[i] = std::bit_cast<float>(bits);
    }
    return t;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

void write_tensor(const Tensor& tensor, const std::filesystem::path& path) {
    write_file_bytes(path, encode_tensor(tensor));
}

Tensor read_tensor(const std::filesystem::path& path) {
    return decode_tensor(read_file_bytes(path));
}

Tensor to_tensor(const ImageF& image) {
    Tensor t;
    t.height = image.height();
    t.width = image.width();
    t.channels = image.channels();
    t.values.assign(image.storage().begin(), image.storage().end());
    return t;
}

ImageF to_image(const Tensor& tensor) {
    if (tensor.channels == 0) {
        throw FormatError("DTN1: zero-channel tensor cannot be an image");
    }
    std::vector<double> data(tensor.values.begin(), tensor.values.end());
    return ImageF(tensor.height, tensor.width, tensor.channels, std::move(data));
}

void write_tensor(const ImageF& image, const std::filesystem::path& path) {
    write_tensor(to_tensor(image), path);
}

ImageF read_image_tensor(const std::filesystem::path& path) {
    return to_image(read_tensor(path));
}

ImageF read_any_image(const std::filesystem::path& path) {
    return has_png_extension(path) ? load_png(path) : read_image_tensor(path);
}

MaskF read_any_mask(const std::filesystem::path& path) {
    if (has_png_extension(path)) {
        return load_mask_png(path);
    }
    ImageF image = read_image_tensor(path);
    if (image.channels() != 1) {
        throw FormatError("mask tensor must have one channel: " + path.string());
    }
    return MaskF::from_image(image);
}

}  // namespace deocc
