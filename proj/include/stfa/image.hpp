#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace stfa {

// Grayscale raster, row-major, values in [0,1].
struct Image {
    int h = 0;
    int w = 0;
    std::vector<double> px;

    Image() = default;
    Image(int h_, int w_, double fill = 0.0);

    double& at(int y, int x) { return px[static_cast<std::size_t>(y) * w + x]; }
    double at(int y, int x) const { return px[static_cast<std::size_t>(y) * w + x]; }
};

// Interleaved RGB raster, values in [0,1].
struct ColorImage {
    int h = 0;
    int w = 0;
    std::vector<double> px;  // 3 doubles per pixel

    ColorImage() = default;
    ColorImage(int h_, int w_, double fill = 0.0);

    double& at(int y, int x, int c) { return px[(static_cast<std::size_t>(y) * w + x) * 3 + c]; }
    double at(int y, int x, int c) const { return px[(static_cast<std::size_t>(y) * w + x) * 3 + c]; }
};

Image luma(const ColorImage& img);

// 8-bit binary PGM (P5) / PPM (P6). Values are clamped to [0,1] on write
// and scaled by the file's maxval on read. Failures throw DataError.
Image read_pgm(const std::filesystem::path& path);
ColorImage read_ppm(const std::filesystem::path& path);
Image read_gray(const std::filesystem::path& path);  // PGM directly, PPM via luma
void write_pgm(const std::filesystem::path& path, const Image& img);
void write_ppm(const std::filesystem::path& path, const ColorImage& img);

}  // namespace stfa
