#include "stfa/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "stfa/errors.hpp"

namespace stfa {

namespace {

void check_extents(int h, int w) {
    if (h <= 0 || w <= 0) throw DataError("image extents must be positive, got " + std::to_string(h) + "x" + std::to_string(w));
}

std::uint8_t to_byte(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {}
        } else if (!std::isspace(c)) {
            tok.push_back(static_cast<char>(c));
            while ((c = in.peek()) != EOF && !std::isspace(c) && c != '#') tok.push_back(static_cast<char>(in.get()));
            return tok;
        }
    }
    return tok;
}

struct NetpbmHeader {
    std::string magic;
    int w = 0, h = 0, maxval = 0;
};

NetpbmHeader read_header(std::istream& in, const std::filesystem::path& path) {
    NetpbmHeader hd;
    hd.magic = next_token(in);
    try {
        hd.w = std::stoi(next_token(in));
        hd.h = std::stoi(next_token(in));
        hd.maxval = std::stoi(next_token(in));
    } catch (const std::exception&) {
        throw DataError("malformed netpbm header in " + path.string());
    }
    if (hd.w <= 0 || hd.h <= 0) throw DataError("bad image extents in " + path.string());
    if (hd.maxval <= 0 || hd.maxval > 255) throw DataError("unsupported maxval " + std::to_string(hd.maxval) + " in " + path.string());
    in.get();  // single whitespace byte before the raster
    return hd;
}

std::vector<std::uint8_t> read_raster(std::istream& in, std::size_t count, const std::filesystem::path& path) {
    std::vector<std::uint8_t> raw(count);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(in.gcount()) != count) throw DataError("truncated raster in " + path.string());
    return raw;
}

}  // namespace

Image::Image(int h_, int w_, double fill) : h(h_), w(w_) {
    check_extents(h_, w_);
    px.assign(static_cast<std::size_t>(h_) * w_, fill);
}

ColorImage::ColorImage(int h_, int w_, double fill) : h(h_), w(w_) {
    check_extents(h_, w_);
    px.assign(static_cast<std::size_t>(h_) * w_ * 3, fill);
}

Image luma(const ColorImage& img) {
    Image out(img.h, img.w);
    for (std::size_t i = 0; i < out.px.size(); ++i)
        out.px[i] = 0.299 * img.px[3 * i] + 0.587 * img.px[3 * i + 1] + 0.114 * img.px[3 * i + 2];
    return out;
}

Image read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    auto hd = read_header(in, path);
    if (hd.magic != "P5") throw DataError("expected P5 magic in " + path.string() + ", got " + hd.magic);
    auto raw = read_raster(in, static_cast<std::size_t>(hd.w) * hd.h, path);
    Image img(hd.h, hd.w);
    for (std::size_t i = 0; i < raw.size(); ++i) img.px[i] = raw[i] / static_cast<double>(hd.maxval);
    return img;
}

ColorImage read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    auto hd = read_header(in, path);
    if (hd.magic != "P6") throw DataError("expected P6 magic in " + path.string() + ", got " + hd.magic);
    auto raw = read_raster(in, static_cast<std::size_t>(hd.w) * hd.h * 3, path);
    ColorImage img(hd.h, hd.w);
    for (std::size_t i = 0; i < raw.size(); ++i) img.px[i] = raw[i] / static_cast<double>(hd.maxval);
    return img;
}

Image read_gray(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    in.close();
    if (m0 == 'P' && m1 == '5') return read_pgm(path);
    if (m0 == 'P' && m1 == '6') return luma(read_ppm(path));
    throw DataError("unsupported image format in " + path.string() + " (want binary PGM or PPM)");
}

void write_pgm(const std::filesystem::path& path, const Image& img) {
    check_extents(img.h, img.w);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "P5\n" << img.w << " " << img.h << "\n255\n";
    std::vector<std::uint8_t> raw(img.px.size());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = to_byte(img.px[i]);
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw DataError("short write to " + path.string());
}

void write_ppm(const std::filesystem::path& path, const ColorImage& img) {
    check_extents(img.h, img.w);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "P6\n" << img.w << " " << img.h << "\n255\n";
    std::vector<std::uint8_t> raw(img.px.size());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = to_byte(img.px[i]);
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw DataError("short write to " + path.string());
}

}  // namespace stfa
