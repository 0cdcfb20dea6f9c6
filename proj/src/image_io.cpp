#include "difftomo/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>

namespace difftomo {
namespace {

std::string lower_extension(const std::filesystem::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

struct FileCloser {
    void operator()(std::FILE* f) const noexcept {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw std::runtime_error("cannot open " + path.string());
    return f;
}

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
    (void)png;
    throw std::runtime_error(std::string("libpng: ") + msg);
}

void png_warn(png_structp, png_const_charp) {}

GrayImage read_png(const std::filesystem::path& path) {
    FilePtr file = open_file(path, "rb");
    png_byte signature[8];
    if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0)
        throw std::runtime_error(path.string() + ": not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    if (!png) throw std::runtime_error("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp* png;
        png_infop* info;
        ~Guard() { png_destroy_read_struct(png, info, nullptr); }
    } guard{&png, &info};
    if (!info) throw std::runtime_error("png_create_info_struct failed");

    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE)
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    if (depth == 16) png_set_swap(png);  // host order for little-endian readers below
    png_read_update_info(png, info);

    GrayImage img;
    img.width = png_get_image_width(png, info);
    img.height = png_get_image_height(png, info);
    img.bit_depth = png_get_bit_depth(png, info) == 16 ? 16 : 8;
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    std::vector<png_byte> rows(rowbytes * img.height);
    std::vector<png_bytep> row_ptrs(img.height);
    for (std::size_t y = 0; y < img.height; ++y) row_ptrs[y] = rows.data() + y * rowbytes;
    png_read_image(png, row_ptrs.data());

    img.pixels.resize(img.width * img.height);
    for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t x = 0; x < img.width; ++x) {
            const png_byte* row = row_ptrs[y];
            img.pixels[y * img.width + x] =
                img.bit_depth == 16 ? static_cast<std::uint16_t>(row[2 * x] | (row[2 * x + 1] << 8)) : row[x];
        }
    }
    return img;
}

void write_png(const std::filesystem::path& path, const GrayImage& img) {
    FilePtr file = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
    if (!png) throw std::runtime_error("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    struct Guard {
        png_structp* png;
        png_infop* info;
        ~Guard() { png_destroy_write_struct(png, info); }
    } guard{&png, &info};
    if (!info) throw std::runtime_error("png_create_info_struct failed");

    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), img.bit_depth,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    const std::size_t bpp = img.bit_depth == 16 ? 2 : 1;
    std::vector<png_byte> row(img.width * bpp);
    for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t x = 0; x < img.width; ++x) {
            const std::uint16_t v = img.pixels[y * img.width + x];
            if (bpp == 2) {
                row[2 * x] = static_cast<png_byte>(v >> 8);
                row[2 * x + 1] = static_cast<png_byte>(v & 0xFF);
            } else {
                row[x] = static_cast<png_byte>(v);
            }
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
}

// PGM header tokens may be separated by whitespace and '#' comments.
std::size_t pgm_token(std::istream& in) {
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string skip;
            std::getline(in, skip);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    std::size_t v = 0;
    if (!(in >> v)) throw std::runtime_error("malformed PGM header");
    return v;
}

GrayImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    char magic[2];
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '2'))
        throw std::runtime_error(path.string() + ": not a PGM file");
    GrayImage img;
    img.width = pgm_token(in);
    img.height = pgm_token(in);
    const std::size_t maxval = pgm_token(in);
    if (maxval == 0 || maxval > 65535) throw std::runtime_error(path.string() + ": bad PGM maxval");
    img.bit_depth = maxval > 255 ? 16 : 8;
    img.pixels.resize(img.width * img.height);

    if (magic[1] == '2') {
        for (auto& p : img.pixels) p = static_cast<std::uint16_t>(pgm_token(in));
        return img;
    }
    in.get();  // single whitespace before raster
    const std::size_t bpp = img.bit_depth == 16 ? 2 : 1;
    std::vector<unsigned char> raw(img.pixels.size() * bpp);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) throw std::runtime_error(path.string() + ": truncated PGM");
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        img.pixels[i] = bpp == 2 ? static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]) : raw[i];
    return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << "P5\n" << img.width << ' ' << img.height << '\n' << img.max_value() << '\n';
    const std::size_t bpp = img.bit_depth == 16 ? 2 : 1;
    std::vector<unsigned char> raw(img.pixels.size() * bpp);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        if (bpp == 2) {
            raw[2 * i] = static_cast<unsigned char>(img.pixels[i] >> 8);
            raw[2 * i + 1] = static_cast<unsigned char>(img.pixels[i] & 0xFF);
        } else {
            raw[i] = static_cast<unsigned char>(img.pixels[i]);
        }
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace

GrayImage read_gray_image(const std::filesystem::path& path) {
    const auto ext = lower_extension(path);
    if (ext == ".png") return read_png(path);
    if (ext == ".pgm") return read_pgm(path);
    throw std::runtime_error("unsupported image format: " + path.string());
}

void write_gray_image(const std::filesystem::path& path, const GrayImage& image) {
    if (image.pixels.size() != image.width * image.height || image.width == 0 || image.height == 0)
        throw std::invalid_argument("write_gray_image: inconsistent image");
    if (image.bit_depth != 8 && image.bit_depth != 16) throw std::invalid_argument("write_gray_image: bit depth");
    const auto ext = lower_extension(path);
    if (ext == ".png") return write_png(path, image);
    if (ext == ".pgm") return write_pgm(path, image);
    throw std::runtime_error("unsupported image format: " + path.string());
}

}  // namespace difftomo
