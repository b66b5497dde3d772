#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cysto::png {

// Interleaved 8-bit raster, row-major. channels is 1 (gray) or 3 (RGB).
struct Image8 {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;

    static Image8 blank(int h, int w, int c);
    std::uint8_t& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
    std::uint8_t at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c]; }
};

// Decodes any PNG to 8-bit. Grayscale files stay single-channel, everything
// else (palette, 16-bit, alpha) is folded down to plain RGB.
Image8 read_image(const std::string& path);

void write_image(const std::string& path, const Image8& img);

}  // namespace cysto::png
