#include "maeanom/image_io.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>

namespace maeanom {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void append_bytes(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + length);
}

void flush_noop(png_structp) {}

// Encodes rows via libpng into `sink` (a FILE* or a byte vector).
template <typename SetupIo>
void encode(int width, int height, int bit_depth, int color_type, const std::vector<std::uint8_t>& packed,
            SetupIo setup_io) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png: cannot create write struct");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png: cannot create info struct");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("png: encoding failed");
    }
    setup_io(png);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const int channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
    const std::size_t stride = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
    for (int r = 0; r < height; ++r) png_write_row(png, const_cast<png_bytep>(packed.data() + r * stride));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

RawImage read_png_gray(const std::filesystem::path& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw IoError("cannot open image " + path.string());
    png_byte sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw FormatError(path.string() + " is not a PNG file");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png: cannot create read struct");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png: cannot create info struct");
    }
    std::vector<std::uint8_t> buffer;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("corrupt PNG: " + path.string());
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE) {
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    }
    if (depth == 16) png_set_swap(png);  // little-endian samples
    png_read_update_info(png, info);
    depth = png_get_bit_depth(png, info);

    const auto width = static_cast<int>(png_get_image_width(png, info));
    const auto height = static_cast<int>(png_get_image_height(png, info));
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    buffer.resize(rowbytes * height);
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    for (int r = 0; r < height; ++r) rows[static_cast<std::size_t>(r)] = buffer.data() + r * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    RawImage out;
    out.bit_depth = depth;
    out.values.resize(height, width);
    for (int r = 0; r < height; ++r) {
        const std::uint8_t* row = rows[static_cast<std::size_t>(r)];
        for (int c = 0; c < width; ++c) {
            out.values(r, c) = depth == 16 ? static_cast<double>(row[2 * c] | (row[2 * c + 1] << 8)) : row[c];
        }
    }
    return out;
}

void write_png_gray(const std::filesystem::path& path, const Matrix& values, int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16) throw InvalidArgument("png: bit depth must be 8 or 16");
    const double max_value = bit_depth == 16 ? 65535.0 : 255.0;
    const auto h = static_cast<int>(values.rows());
    const auto w = static_cast<int>(values.cols());
    std::vector<std::uint8_t> packed(static_cast<std::size_t>(h) * w * (bit_depth / 8));
    std::size_t k = 0;
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const double v = values(r, c);
            if (!(v >= 0.0 && v <= max_value) || v != std::round(v)) {
                throw InvalidArgument("png: sample value out of range for bit depth");
            }
            const auto u = static_cast<std::uint32_t>(v);
            if (bit_depth == 16) {
                packed[k++] = static_cast<std::uint8_t>(u >> 8);  // PNG is big-endian
                packed[k++] = static_cast<std::uint8_t>(u & 0xff);
            } else {
                packed[k++] = static_cast<std::uint8_t>(u);
            }
        }
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) throw IoError("cannot write image " + path.string());
    encode(w, h, bit_depth, PNG_COLOR_TYPE_GRAY, packed, [&](png_structp png) { png_init_io(png, file.get()); });
}

void write_png_unit(const std::filesystem::path& path, const Image& image) {
    const Matrix scaled = (image.cwiseMax(0.0).cwiseMin(1.0) * 65535.0).array().round().matrix();
    write_png_gray(path, scaled, 16);
}

std::vector<std::uint8_t> encode_png_rgb(int width, int height, const std::vector<std::uint8_t>& rgb) {
    if (rgb.size() != static_cast<std::size_t>(width) * height * 3) throw InvalidArgument("png: RGB buffer size mismatch");
    std::vector<std::uint8_t> bytes;
    encode(width, height, 8, PNG_COLOR_TYPE_RGB, rgb,
           [&](png_structp png) { png_set_write_fn(png, &bytes, append_bytes, flush_noop); });
    return bytes;
}

void write_png_rgb(const std::filesystem::path& path, int width, int height, const std::vector<std::uint8_t>& rgb) {
    const auto bytes = encode_png_rgb(width, height, rgb);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write image " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace maeanom
