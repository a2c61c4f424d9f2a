#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace woundstage {

// 8-bit interleaved RGB image, row major.
struct ImageU8 {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // size = width * height * 3

    ImageU8() = default;
    ImageU8(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

    std::uint8_t* at(int x, int y) { return pixels.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
    const std::uint8_t* at(int x, int y) const {
        return pixels.data() + 3 * (static_cast<std::size_t>(y) * width + x);
    }
};

// PNG I/O. Reading converts any PNG variant (palette, grayscale, 16-bit,
// alpha) to 8-bit RGB. Throws DataError on unreadable files.
ImageU8 read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const ImageU8& img);

struct Hsv {
    double h;  // degrees in [0, 360)
    double s;  // [0, 1]
    double v;  // [0, 1]
};

Hsv rgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b);

// Rec.601 luma from 8-bit RGB, in [0, 255].
inline double luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    return 0.299 * r + 0.587 * g + 0.114 * b;
}

// Whole-image luma plane, row major, length width*height.
std::vector<double> luminance_plane(const ImageU8& img);

// Lossless geometric transforms. Rotations are counterclockwise.
ImageU8 rotate90(const ImageU8& img);
ImageU8 rotate180(const ImageU8& img);
ImageU8 rotate270(const ImageU8& img);
ImageU8 flip_horizontal(const ImageU8& img);  // mirror across the vertical axis
ImageU8 flip_vertical(const ImageU8& img);    // mirror across the horizontal axis

// Bilinear resampling of a single float plane with the half-pixel center
// convention: src = (dst + 0.5) * scale - 0.5, clamped to the valid range.
// Identity when sizes match.
std::vector<double> resize_bilinear_plane(const std::vector<double>& src, int src_w, int src_h,
                                          int dst_w, int dst_h);

// In-place separable Gaussian blur, kernel radius ceil(3*sigma), replicated
// borders, normalized weights.
void gaussian_blur_plane(std::vector<double>& plane, int width, int height, double sigma);

// Same resampling applied per RGB channel, rounded back to 8 bits.
ImageU8 resize_bilinear(const ImageU8& img, int dst_w, int dst_h);

}  // namespace woundstage
