#ifndef SALFOLD_IMAGE_HPP
#define SALFOLD_IMAGE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <png.h>

#include "salfold/error.hpp"

namespace salfold {

/// Grayscale image with intensities in [0, 255], stored row-major.
///
/// Values are kept as doubles so that averaging during folding does not
/// accumulate quantization error; they are rounded to 8 bits only on export.
/// Index formula: pixel(row y, col x) = data[y * width + x].
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    GrayImage() = default;
    GrayImage(int w, int h, double fill = 0.0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}
    GrayImage(int w, int h, std::vector<double> values)
        : width(w), height(h), data(std::move(values)) {}

    double at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
    double& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
    std::size_t pixels() const { return data.size(); }
};

/// Minimum width/height accepted by the processing pipeline (one LBP
/// radius-2 neighborhood per block cell at the 4x4 grid).
inline constexpr int kMinImageDim = 8;

inline void require_min_dims(const GrayImage& img, const std::string& what = "image") {
    if (img.width < kMinImageDim || img.height < kMinImageDim)
        raise(Errc::image_too_small,
              what + " is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                  ", minimum is " + std::to_string(kMinImageDim) + "x" +
                  std::to_string(kMinImageDim));
}

// ---------------------------------------------------------------- block grid

/// Balanced n x n partition of an image. Boundary k of `cols+1` gives the
/// first pixel column of cell k; remainder pixels go to the leading cells,
/// so cell sizes differ by at most one.
struct BlockGrid {
    int rows = 0;
    int cols = 0;
    std::vector<int> row_bounds; // rows+1 offsets, row_bounds[0]=0, back()=height
    std::vector<int> col_bounds;

    int cell_width(int j) const { return col_bounds[j + 1] - col_bounds[j]; }
    int cell_height(int i) const { return row_bounds[i + 1] - row_bounds[i]; }
};

inline std::vector<int> balanced_bounds(int length, int n) {
    std::vector<int> b(static_cast<std::size_t>(n) + 1, 0);
    const int base = length / n;
    const int rem = length % n;
    for (int k = 0; k < n; ++k) b[k + 1] = b[k] + base + (k < rem ? 1 : 0);
    return b;
}

inline BlockGrid make_grid(int width, int height, int n) {
    if (n < 1 || width < n || height < n)
        raise(Errc::grid_too_fine, std::to_string(n) + "x" + std::to_string(n) +
                                       " grid does not fit a " + std::to_string(width) + "x" +
                                       std::to_string(height) + " image");
    BlockGrid g;
    g.rows = g.cols = n;
    g.row_bounds = balanced_bounds(height, n);
    g.col_bounds = balanced_bounds(width, n);
    return g;
}

inline BlockGrid make_grid(const GrayImage& img, int n) {
    return make_grid(img.width, img.height, n);
}

// ------------------------------------------------------------------- resize

/// Bilinear resampling with the half-pixel coordinate convention
/// (src = (dst + 0.5) * scale - 0.5). Identity when sizes match.
inline GrayImage resize_bilinear(const GrayImage& src, int new_w, int new_h) {
    if (new_w < 1 || new_h < 1) raise(Errc::internal, "resize to empty image");
    if (new_w == src.width && new_h == src.height) return src;
    GrayImage dst(new_w, new_h);
    const double sx = static_cast<double>(src.width) / new_w;
    const double sy = static_cast<double>(src.height) / new_h;
    for (int y = 0; y < new_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        fy = std::min(std::max(fy, 0.0), static_cast<double>(src.height - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, src.height - 1);
        const double wy = fy - y0;
        for (int x = 0; x < new_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            fx = std::min(std::max(fx, 0.0), static_cast<double>(src.width - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, src.width - 1);
            const double wx = fx - x0;
            const double top = src.at(y0, x0) + wx * (src.at(y0, x1) - src.at(y0, x0));
            const double bot = src.at(y1, x0) + wx * (src.at(y1, x1) - src.at(y1, x0));
            dst.at(y, x) = top + wy * (bot - top);
        }
    }
    return dst;
}

// ------------------------------------------------------------------ PGM I/O

namespace detail {

inline int pgm_next_token(std::istream& in, std::string& tok) {
    tok.clear();
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') { // comment runs to end of line
            while ((c = in.get()) != EOF && c != '\n') {}
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return 1;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok.empty() ? 0 : 1;
}

} // namespace detail

inline GrayImage load_pgm(std::istream& in, const std::string& name) {
    std::string tok;
    if (!detail::pgm_next_token(in, tok) || tok != "P5")
        raise(Errc::unsupported_format, name + ": not a P5 PGM");
    long w = 0, h = 0, maxval = 0;
    auto read_long = [&](long& out) {
        if (!detail::pgm_next_token(in, tok)) raise(Errc::unsupported_format, name + ": truncated PGM header");
        try {
            out = std::stol(tok);
        } catch (...) {
            raise(Errc::unsupported_format, name + ": bad PGM header token '" + tok + "'");
        }
    };
    read_long(w);
    read_long(h);
    read_long(maxval);
    if (w < 1 || h < 1) raise(Errc::unsupported_format, name + ": bad PGM dimensions");
    if (maxval < 1 || maxval > 255)
        raise(Errc::unsupported_format, name + ": only 8-bit PGM supported (maxval " +
                                            std::to_string(maxval) + ")");
    GrayImage img(static_cast<int>(w), static_cast<int>(h));
    std::vector<unsigned char> raw(img.pixels());
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size())
        raise(Errc::unsupported_format, name + ": truncated PGM payload");
    for (std::size_t i = 0; i < raw.size(); ++i) img.data[i] = raw[i];
    return img;
}

inline std::uint8_t quantize_u8(double v) {
    const double r = std::nearbyint(v);
    return static_cast<std::uint8_t>(std::min(255.0, std::max(0.0, r)));
}

/// Rounds all intensities to the 8-bit values an export would produce.
inline GrayImage quantized(const GrayImage& img) {
    GrayImage out(img.width, img.height);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = static_cast<double>(quantize_u8(img.data[i]));
    return out;
}

inline void save_pgm(const GrayImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::io_error, "cannot write " + path);
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> raw(img.pixels());
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = quantize_u8(img.data[i]);
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) raise(Errc::io_error, "short write to " + path);
}

// ------------------------------------------------------------------ PNG I/O

namespace detail {

struct PngReadCloser {
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::FILE* fp = nullptr;
    ~PngReadCloser() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (fp) std::fclose(fp);
    }
};

struct PngWriteCloser {
    png_structp png = nullptr;
    png_infop info = nullptr;
    std::FILE* fp = nullptr;
    ~PngWriteCloser() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (fp) std::fclose(fp);
    }
};

} // namespace detail

/// Decodes an 8-bit grayscale or RGB PNG. RGB is reduced by the unweighted
/// channel mean. Palette, 16-bit and alpha variants are rejected.
inline GrayImage load_png(const std::string& path) {
    detail::PngReadCloser ctx;
    ctx.fp = std::fopen(path.c_str(), "rb");
    if (!ctx.fp) raise(Errc::unreadable_file, path);
    ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!ctx.png) raise(Errc::internal, "libpng init failed");
    ctx.info = png_create_info_struct(ctx.png);
    if (!ctx.info) raise(Errc::internal, "libpng info init failed");
    if (setjmp(png_jmpbuf(ctx.png)))
        raise(Errc::unsupported_format, path + ": PNG decode error");
    png_init_io(ctx.png, ctx.fp);
    png_read_info(ctx.png, ctx.info);

    const png_uint_32 w = png_get_image_width(ctx.png, ctx.info);
    const png_uint_32 h = png_get_image_height(ctx.png, ctx.info);
    const int depth = png_get_bit_depth(ctx.png, ctx.info);
    const int color = png_get_color_type(ctx.png, ctx.info);
    if (depth != 8 || (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_RGB))
        raise(Errc::unsupported_format,
              path + ": only 8-bit grayscale or RGB PNG supported");
    png_set_interlace_handling(ctx.png);
    png_read_update_info(ctx.png, ctx.info);

    const int channels = (color == PNG_COLOR_TYPE_RGB) ? 3 : 1;
    std::vector<unsigned char> raw(static_cast<std::size_t>(w) * h * channels);
    std::vector<png_bytep> rows(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = raw.data() + static_cast<std::size_t>(y) * w * channels;
    png_read_image(ctx.png, rows.data());
    png_read_end(ctx.png, nullptr);

    GrayImage img(static_cast<int>(w), static_cast<int>(h));
    if (channels == 1) {
        for (std::size_t i = 0; i < img.pixels(); ++i) img.data[i] = raw[i];
    } else {
        for (std::size_t i = 0; i < img.pixels(); ++i) {
            const std::size_t o = i * 3;
            img.data[i] = (raw[o] + raw[o + 1] + raw[o + 2]) / 3.0;
        }
    }
    return img;
}

inline void save_png_gray8(const GrayImage& img, const std::string& path) {
    detail::PngWriteCloser ctx;
    ctx.fp = std::fopen(path.c_str(), "wb");
    if (!ctx.fp) raise(Errc::io_error, "cannot write " + path);
    ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!ctx.png) raise(Errc::internal, "libpng init failed");
    ctx.info = png_create_info_struct(ctx.png);
    if (!ctx.info) raise(Errc::internal, "libpng info init failed");
    if (setjmp(png_jmpbuf(ctx.png))) raise(Errc::io_error, path + ": PNG encode error");
    png_init_io(ctx.png, ctx.fp);
    png_set_IHDR(ctx.png, ctx.info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(ctx.png, ctx.info);
    std::vector<unsigned char> row(static_cast<std::size_t>(img.width));
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) row[x] = quantize_u8(img.at(y, x));
        png_write_row(ctx.png, row.data());
    }
    png_write_end(ctx.png, nullptr);
}

// ----------------------------------------------------------------- dispatch

/// Loads a PGM (P5) or PNG image, sniffing the format from the file header.
inline GrayImage load_image(const std::string& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) raise(Errc::unreadable_file, path);
    unsigned char magic[8] = {0};
    probe.read(reinterpret_cast<char*>(magic), 8);
    if (probe.gcount() < 2) raise(Errc::unsupported_format, path + ": file too short");
    if (magic[0] == 'P' && magic[1] == '5') {
        probe.seekg(0);
        return load_pgm(probe, path);
    }
    static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (probe.gcount() == 8 && std::equal(magic, magic + 8, png_sig)) {
        probe.close();
        return load_png(path);
    }
    raise(Errc::unsupported_format, path + ": unrecognized image format");
}

} // namespace salfold

#endif
