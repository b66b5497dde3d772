#include "cystonet/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

#include "cystonet/tensor.hpp"

namespace cysto::png {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void io_fail(const std::string& what, const std::string& path) {
    raise(ErrorKind::Io, what + ": " + path);
}

}  // namespace

Image8 Image8::blank(int h, int w, int c) {
    if (h <= 0 || w <= 0 || (c != 1 && c != 3)) raise(ErrorKind::InvalidArgument, "bad raster dims");
    Image8 img;
    img.height = h;
    img.width = w;
    img.channels = c;
    img.pixels.assign(static_cast<std::size_t>(h) * w * c, 0);
    return img;
}

Image8 read_image(const std::string& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) io_fail("cannot open", path);

    png_byte header[8];
    if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0)
        io_fail("not a PNG file", path);

    png_structp read = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = read ? png_create_info_struct(read) : nullptr;
    if (!read || !info) {
        png_destroy_read_struct(&read, &info, nullptr);
        io_fail("libpng init failed", path);
    }
    std::vector<png_bytep> rows;
    Image8 img;
    if (setjmp(png_jmpbuf(read))) {
        png_destroy_read_struct(&read, &info, nullptr);
        io_fail("PNG decode failed", path);
    }
    png_init_io(read, file.get());
    png_set_sig_bytes(read, 8);
    png_read_info(read, info);

    const png_byte color = png_get_color_type(read, info);
    if (png_get_bit_depth(read, info) == 16) png_set_strip_16(read);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(read);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(read, info) < 8) png_set_expand_gray_1_2_4_to_8(read);
    if (png_get_valid(read, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(read);
    png_set_strip_alpha(read);
    png_read_update_info(read, info);

    img.height = static_cast<int>(png_get_image_height(read, info));
    img.width = static_cast<int>(png_get_image_width(read, info));
    img.channels = static_cast<int>(png_get_channels(read, info));
    if (img.channels != 1 && img.channels != 3) {
        png_destroy_read_struct(&read, &info, nullptr);
        io_fail("unsupported channel layout", path);
    }
    img.pixels.resize(static_cast<std::size_t>(img.height) * img.width * img.channels);
    rows.resize(img.height);
    for (int y = 0; y < img.height; ++y)
        rows[y] = img.pixels.data() + static_cast<std::size_t>(y) * img.width * img.channels;
    png_read_image(read, rows.data());
    png_read_end(read, nullptr);
    png_destroy_read_struct(&read, &info, nullptr);
    return img;
}

void write_image(const std::string& path, const Image8& img) {
    if (img.channels != 1 && img.channels != 3) raise(ErrorKind::InvalidArgument, "write_image: channels must be 1 or 3");
    if (img.pixels.size() != static_cast<std::size_t>(img.height) * img.width * img.channels)
        raise(ErrorKind::InvalidArgument, "write_image: pixel buffer does not match dims");

    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) io_fail("cannot create", path);

    png_structp write = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = write ? png_create_info_struct(write) : nullptr;
    if (!write || !info) {
        png_destroy_write_struct(&write, &info);
        io_fail("libpng init failed", path);
    }
    std::vector<png_bytep> rows(img.height);
    if (setjmp(png_jmpbuf(write))) {
        png_destroy_write_struct(&write, &info);
        io_fail("PNG encode failed", path);
    }
    png_init_io(write, file.get());
    png_set_IHDR(write, info, img.width, img.height, 8,
                 img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(write, info);
    for (int y = 0; y < img.height; ++y)
        rows[y] = const_cast<png_bytep>(img.pixels.data() + static_cast<std::size_t>(y) * img.width * img.channels);
    png_write_image(write, rows.data());
    png_write_end(write, nullptr);
    png_destroy_write_struct(&write, &info);
}

}  // namespace cysto::png
