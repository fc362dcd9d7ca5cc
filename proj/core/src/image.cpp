#include "udfvol/image.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <stdexcept>

namespace udfvol {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Image load_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("cannot open PNG: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("failed to decode PNG: " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);
    if (bit_depth != 8 || (color_type != PNG_COLOR_TYPE_RGB && color_type != PNG_COLOR_TYPE_RGBA)) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("unsupported PNG format (need 8-bit RGB or RGBA): " + path);
    }

    Image img(int(png_get_image_width(png, info)), int(png_get_image_height(png, info)),
              color_type == PNG_COLOR_TYPE_RGBA ? 4 : 3);
    std::vector<png_bytep> rows(size_t(img.height));
    const size_t stride = size_t(img.width) * img.channels;
    for (int y = 0; y < img.height; ++y) rows[size_t(y)] = img.pixels.data() + y * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void save_png(const std::string& path, const Image& img) {
    if (img.width <= 0 || img.height <= 0 || (img.channels != 3 && img.channels != 4))
        throw std::runtime_error("save_png: image must be RGB or RGBA with positive size");
    if (img.pixels.size() != size_t(img.width) * img.height * img.channels)
        throw std::runtime_error("save_png: pixel buffer size mismatch");

    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot write PNG: " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw std::runtime_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("failed to encode PNG: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, png_uint_32(img.width), png_uint_32(img.height), 8,
                 img.channels == 4 ? PNG_COLOR_TYPE_RGBA : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const size_t stride = size_t(img.width) * img.channels;
    for (int y = 0; y < img.height; ++y)
        png_write_row(png, const_cast<png_bytep>(img.pixels.data() + y * stride));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace udfvol
