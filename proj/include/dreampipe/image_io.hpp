#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dreampipe/image.hpp"

namespace dreampipe {

// PNG: 8-bit gray, gray+alpha, RGB or RGBA. Other bit depths are rejected.
Image8 decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const Image8& image);
Image8 load_png(const std::filesystem::path& path);
void save_png(const std::filesystem::path& path, const Image8& image);

// PFM: "Pf" (1 channel) or "PF" (3 channels), scale -1 (little-endian),
// rows stored bottom-to-top as in the reference format. Writing always emits
// little-endian; reading accepts either byte order. Values round-trip bit-exactly.
ImageF decode_pfm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pfm(const ImageF& image);
ImageF load_pfm(const std::filesystem::path& path);
void save_pfm(const std::filesystem::path& path, const ImageF& image);

// Masks from either format: 8-bit PNG is scaled to [0,1], PFM is taken as is.
MaskImage load_mask(const std::filesystem::path& path, MaskSpace space);
void save_mask_png(const std::filesystem::path& path, const MaskImage& mask);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace dreampipe
