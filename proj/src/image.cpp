#include "woundstage/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "woundstage/errors.hpp"

namespace woundstage {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

ImageU8 read_png(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw DataError("cannot open image file: " + path.string());

    png_byte header[8];
    if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8) != 0)
        throw DataError("not a PNG file: " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("png reader allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("png reader allocation failed");
    }

    ImageU8 img;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("corrupt PNG file: " + path.string());
    }

    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    png_byte color_type = png_get_color_type(png, info);
    png_byte bit_depth = png_get_bit_depth(png, info);

    // Normalize everything to 8-bit RGB.
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    if (png_get_rowbytes(png, info) != w * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("unexpected PNG row layout: " + path.string());
    }

    img.width = static_cast<int>(w);
    img.height = static_cast<int>(h);
    img.pixels.resize(static_cast<std::size_t>(w) * h * 3);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = img.pixels.data() + static_cast<std::size_t>(y) * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_png(const std::filesystem::path& path, const ImageU8& img) {
    if (img.width <= 0 || img.height <= 0 ||
        img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * 3)
        throw UsageError("write_png: image buffer does not match its dimensions");

    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw DataError("cannot open file for writing: " + path.string());

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("png writer allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("png writer allocation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("PNG write failed: " + path.string());
    }

    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
                 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y)
        png_write_row(png, const_cast<png_bytep>(img.at(0, y)));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Hsv rgb_to_hsv(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
    double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
    double mx = std::max({r, g, b});
    double mn = std::min({r, g, b});
    double d = mx - mn;
    Hsv out{0.0, 0.0, mx};
    if (mx > 0.0) out.s = d / mx;
    if (d > 0.0) {
        double h;
        if (mx == r)
            h = (g - b) / d;
        else if (mx == g)
            h = 2.0 + (b - r) / d;
        else
            h = 4.0 + (r - g) / d;
        h *= 60.0;
        if (h < 0.0) h += 360.0;
        if (h >= 360.0) h -= 360.0;
        out.h = h;
    }
    return out;
}

std::vector<double> luminance_plane(const ImageU8& img) {
    std::vector<double> out(static_cast<std::size_t>(img.width) * img.height);
    const std::uint8_t* p = img.pixels.data();
    for (std::size_t i = 0; i < out.size(); ++i, p += 3) out[i] = luminance(p[0], p[1], p[2]);
    return out;
}

ImageU8 rotate90(const ImageU8& img) {
    // Counterclockwise: (x, y) -> (y, W-1-x) in the destination.
    ImageU8 out(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const std::uint8_t* s = img.at(x, y);
            std::uint8_t* d = out.at(y, img.width - 1 - x);
            d[0] = s[0];
            d[1] = s[1];
            d[2] = s[2];
        }
    return out;
}

ImageU8 rotate180(const ImageU8& img) {
    ImageU8 out(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const std::uint8_t* s = img.at(x, y);
            std::uint8_t* d = out.at(img.width - 1 - x, img.height - 1 - y);
            d[0] = s[0];
            d[1] = s[1];
            d[2] = s[2];
        }
    return out;
}

ImageU8 rotate270(const ImageU8& img) {
    ImageU8 out(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const std::uint8_t* s = img.at(x, y);
            std::uint8_t* d = out.at(img.height - 1 - y, x);
            d[0] = s[0];
            d[1] = s[1];
            d[2] = s[2];
        }
    return out;
}

ImageU8 flip_horizontal(const ImageU8& img) {
    ImageU8 out(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const std::uint8_t* s = img.at(x, y);
            std::uint8_t* d = out.at(img.width - 1 - x, y);
            d[0] = s[0];
            d[1] = s[1];
            d[2] = s[2];
        }
    return out;
}

ImageU8 flip_vertical(const ImageU8& img) {
    ImageU8 out(img.width, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const std::uint8_t* s = img.at(x, y);
            std::uint8_t* d = out.at(x, img.height - 1 - y);
            d[0] = s[0];
            d[1] = s[1];
            d[2] = s[2];
        }
    return out;
}

std::vector<double> resize_bilinear_plane(const std::vector<double>& src, int src_w, int src_h,
                                          int dst_w, int dst_h) {
    if (src_w <= 0 || src_h <= 0 || dst_w <= 0 || dst_h <= 0)
        throw UsageError("resize_bilinear: dimensions must be positive");
    if (src.size() != static_cast<std::size_t>(src_w) * src_h)
        throw UsageError("resize_bilinear: plane size does not match dimensions");

    std::vector<double> out(static_cast<std::size_t>(dst_w) * dst_h);
    double sx = static_cast<double>(src_w) / dst_w;
    double sy = static_cast<double>(src_h) / dst_h;
    for (int dy = 0; dy < dst_h; ++dy) {
        double fy = (dy + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(src_h - 1));
        int y0 = static_cast<int>(fy);
        int y1 = std::min(y0 + 1, src_h - 1);
        double wy = fy - y0;
        for (int dx = 0; dx < dst_w; ++dx) {
            double fx = (dx + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(src_w - 1));
            int x0 = static_cast<int>(fx);
            int x1 = std::min(x0 + 1, src_w - 1);
            double wx = fx - x0;
            double top = src[static_cast<std::size_t>(y0) * src_w + x0] * (1.0 - wx) +
                         src[static_cast<std::size_t>(y0) * src_w + x1] * wx;
            double bot = src[static_cast<std::size_t>(y1) * src_w + x0] * (1.0 - wx) +
                         src[static_cast<std::size_t>(y1) * src_w + x1] * wx;
            out[static_cast<std::size_t>(dy) * dst_w + dx] = top * (1.0 - wy) + bot * wy;
        }
    }
    return out;
}

ImageU8 resize_bilinear(const ImageU8& img, int dst_w, int dst_h) {
    if (img.width == dst_w && img.height == dst_h) return img;
    std::size_t n = static_cast<std::size_t>(img.width) * img.height;
    ImageU8 out(dst_w, dst_h);
    std::vector<double> plane(n);
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < n; ++i) plane[i] = img.pixels[i * 3 + c];
        std::vector<double> r = resize_bilinear_plane(plane, img.width, img.height, dst_w, dst_h);
        for (std::size_t i = 0; i < r.size(); ++i)
            out.pixels[i * 3 + c] = static_cast<std::uint8_t>(std::clamp(std::lround(r[i]), 0l, 255l));
    }
    return out;
}

void gaussian_blur_plane(std::vector<double>& plane, int width, int height, double sigma) {
    if (sigma <= 0) throw UsageError("gaussian blur: sigma must be positive");
    if (plane.size() != static_cast<std::size_t>(width) * height)
        throw UsageError("gaussian blur: plane size does not match dimensions");
    int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        double v = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        kernel[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (double& v : kernel) v /= sum;

    std::vector<double> tmp(plane.size());
    for (int y = 0; y < height; ++y) {
        const double* row = plane.data() + static_cast<std::size_t>(y) * width;
        double* dst = tmp.data() + static_cast<std::size_t>(y) * width;
        for (int x = 0; x < width; ++x) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i) {
                int xi = std::clamp(x + i, 0, width - 1);
                acc += kernel[static_cast<std::size_t>(i + radius)] * row[xi];
            }
            dst[x] = acc;
        }
    }
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double acc = 0;
            for (int i = -radius; i <= radius; ++i) {
                int yi = std::clamp(y + i, 0, height - 1);
                acc += kernel[static_cast<std::size_t>(i + radius)] *
                       tmp[static_cast<std::size_t>(yi) * width + x];
            }
            plane[static_cast<std::size_t>(y) * width + x] = acc;
        }
}

}  // namespace woundstage
