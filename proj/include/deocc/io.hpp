#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "deocc/image.hpp"

namespace deocc {

/// 8-bit gray or RGB PNG to [0,1] floats (v/255). Other layouts raise FormatError.
ImageF load_png(const std::filesystem::path& path);
/// Writes round(clamp(v,0,1)*255) with halves rounded up. Channels must be 1 or 3.
void save_png(const ImageF& image, const std::filesystem::path& path);

MaskF load_mask_png(const std::filesystem::path& path, double level = 0.5);
void save_mask_png(const MaskF& mask, const std::filesystem::path& path);

std::uint8_t to_byte(double v);

/// Dimensions plus payload of a DTN1 file.
struct Tensor {
    std::uint64_t height = 0;
    std::uint64_t width = 0;
    std::uint64_t channels = 0;
    std::vector<float> values;
};

/*
 * DTN1 layout (little-endian):
 *   0..3   magic "DTN1"
 *   4..7   reserved, zero
 *   8..31  u64 H, W, C
 *   32..   H*W*C f32, row-major, channel-interleaved
 */
inline constexpr std::size_t kTensorHeaderBytes = 32;

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const Tensor& tensor, const std::filesystem::path& path);
Tensor read_tensor(const std::filesystem::path& path);

void write_tensor(const ImageF& image, const std::filesystem::path& path);
ImageF read_image_tensor(const std::filesystem::path& path);

Tensor to_tensor(const ImageF& image);
ImageF to_image(const Tensor& tensor);

/// PNG for `.png` paths, DTN1 otherwise.
ImageF read_any_image(const std::filesystem::path& path);
MaskF read_any_mask(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace deocc
