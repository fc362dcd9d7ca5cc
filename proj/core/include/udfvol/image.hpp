#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace udfvol {

// 8-bit image, row major, origin at the top-left. channels is 3 (RGB) or
// 4 (RGBA).
struct Image {
    int width = 0, height = 0, channels = 0;
    std::vector<uint8_t> pixels;

    Image() = default;
    Image(int w, int h, int c) : width(w), height(h), channels(c), pixels(size_t(w) * h * c, 0) {}

    uint8_t& at(int x, int y, int c) { return pixels[(size_t(y) * width + x) * channels + c]; }
    uint8_t at(int x, int y, int c) const {
        return pixels[(size_t(y) * width + x) * channels + c];
    }
};

// Strict 8-bit RGB/RGBA PNG I/O; anything else (palette, gray, 16-bit)
// is rejected so that a save/load round trip is always byte exact.
Image load_png(const std::string& path);
void save_png(const std::string& path, const Image& img);

}  // namespace udfvol
