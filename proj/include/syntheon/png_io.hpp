#ifndef SYNTHEON_PNG_IO_HPP
#define SYNTHEON_PNG_IO_HPP

#include "syntheon/geometry.hpp"

#include <png.h>

#include <bit>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <memory>

namespace syntheon
{

/// Decoded PNG: samples widened to 16 bits, `bit_depth` tells the original range.
struct PngImage
{
    int width = 0, height = 0, channels = 0, bit_depth = 8;
    std::vector<std::uint16_t> samples;
};

namespace detail
{

struct FileCloser
{
    void operator()(std::FILE* f) const noexcept
    {
        if (f)
            std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline FilePtr open_file(const std::filesystem::path& path, const char* mode)
{
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f)
        throw Error("io", std::string("cannot open ") + path.string());
    return f;
}

} // namespace detail

/// Writes 8- or 16-bit gray (1), RGB (3) or RGBA (4) samples, row-major interleaved.
/// 16-bit samples are given in native order.
inline void write_png(const std::filesystem::path& path, int width, int height, int channels, int bit_depth,
                      const void* samples)
{
    if ((bit_depth != 8 && bit_depth != 16) || (channels != 1 && channels != 3 && channels != 4))
        throw Error("range", "write_png: unsupported format");
    auto file = detail::open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error("io", "write_png: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error("io", "write_png: encode failed for " + path.string());
    }
    png_init_io(png, file.get());
    const int color = channels == 1 ? PNG_COLOR_TYPE_GRAY : channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_RGBA;
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth, color,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (bit_depth == 16 && std::endian::native == std::endian::little)
        png_set_swap(png);
    const std::size_t row_bytes = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
    auto* base = static_cast<const unsigned char*>(samples);
    for (int y = 0; y < height; ++y)
        png_write_row(png, const_cast<png_bytep>(base + row_bytes * y));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    if (std::fflush(file.get()) != 0)
        throw Error("io", "write_png: flush failed for " + path.string());
}

/// Reads any non-interlaced or interlaced PNG; palettes are expanded to RGB, sub-8-bit
/// gray to 8 bits.
inline PngImage read_png(const std::filesystem::path& path)
{
    auto file = detail::open_file(path, "rb");
    unsigned char header[8];
    if (std::fread(header, 1, 8, file.get()) != 8 || png_sig_cmp(header, 0, 8) != 0)
        throw Error("parse", "not a PNG file: " + path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error("io", "read_png: libpng init failed");
    }
    PngImage out;
    std::vector<png_bytep> rows;
    std::vector<unsigned char> raw;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error("parse", "read_png: decode failed for " + path.string());
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE)
        png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS))
        png_set_tRNS_to_alpha(png);
    if (depth == 16 && std::endian::native == std::endian::little)
        png_set_swap(png);
    png_set_interlace_handling(png);
    png_read_update_info(png, info);

    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = png_get_channels(png, info);
    out.bit_depth = png_get_bit_depth(png, info);
    const std::size_t row_bytes = png_get_rowbytes(png, info);
    raw.resize(row_bytes * out.height);
    rows.resize(out.height);
    for (int y = 0; y < out.height; ++y)
        rows[y] = raw.data() + row_bytes * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    const std::size_t n = static_cast<std::size_t>(out.width) * out.height * out.channels;
    out.samples.resize(n);
    if (out.bit_depth == 16) {
        std::memcpy(out.samples.data(), raw.data(), n * 2);
    } else {
        for (std::size_t i = 0; i < n; ++i)
            out.samples[i] = raw[i];
    }
    return out;
}

/// PNG as float RGB in [0, 1]; gray is replicated, alpha dropped.
inline Image read_png_rgb(const std::filesystem::path& path)
{
    const PngImage png = read_png(path);
    const double scale = png.bit_depth == 16 ? 1.0 / 65535.0 : 1.0 / 255.0;
    Image img(png.width, png.height, 3);
    const bool gray = png.channels <= 2;
    for (int y = 0; y < png.height; ++y)
        for (int x = 0; x < png.width; ++x) {
            const std::size_t base = (static_cast<std::size_t>(y) * png.width + x) * png.channels;
            for (int c = 0; c < 3; ++c)
                img.at(x, y, c) = static_cast<float>(png.samples[base + (gray ? 0 : c)] * scale);
        }
    return img;
}

} // namespace syntheon

#endif // SYNTHEON_PNG_IO_HPP
