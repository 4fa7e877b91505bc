#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace fracgrad {

/// Decoded image, interleaved channels, values scaled to [0, 1].
struct Image {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;
    std::vector<double> pixels;
};

/// Reads PNG (8/16-bit, any colour type) or binary/ASCII PGM. Throws
/// FormatError for anything else.
Image read_image(const std::filesystem::path& path);

/// Mean over channels (alpha dropped).
Image to_luma(const Image& image);

/// Bilinear resize with half-pixel centres; constant images stay constant.
Image resize_bilinear(const Image& image, std::size_t width, std::size_t height);

/// 8-bit grayscale PNG writer for single-channel images.
void write_png_gray(const std::filesystem::path& path, const Image& image);

} // namespace fracgrad
