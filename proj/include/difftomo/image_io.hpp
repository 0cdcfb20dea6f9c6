#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace difftomo {

/// Grayscale raster, row-major, 8- or 16-bit samples stored widened.
struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    int bit_depth = 8;
    std::vector<std::uint16_t> pixels;

    std::uint16_t max_value() const noexcept { return bit_depth == 16 ? 0xFFFF : 0xFF; }
};

/// Reads PNG (any gray/RGB variant, reduced to gray) or binary/ASCII PGM.
/// The format is chosen by extension. Throws std::runtime_error on failure.
GrayImage read_gray_image(const std::filesystem::path& path);

/// Writes .png or .pgm (by extension) at the image's bit depth.
void write_gray_image(const std::filesystem::path& path, const GrayImage& image);

}  // namespace difftomo
