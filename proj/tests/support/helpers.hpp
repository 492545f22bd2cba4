#ifndef TESTS_SUPPORT_HELPERS_HPP
#define TESTS_SUPPORT_HELPERS_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <png.h>
#include <sstream>
#include <string>
#include <vector>

#include "salfold/image.hpp"
#include "salfold/util.hpp"

namespace testing {

/// Unique scratch directory, removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "salfold_test") {
        const auto base = std::filesystem::temp_directory_path();
        for (int i = 0; i < 10000; ++i) {
            auto candidate = base / (tag + "_" + std::to_string(counter_++));
            std::error_code ec;
            if (std::filesystem::create_directory(candidate, ec)) {
                path_ = candidate;
                return;
            }
        }
        throw std::runtime_error("could not create a scratch directory");
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    static inline int counter_ = 0;
    std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

/// Random 8-bit-valued image from the library RNG (deterministic per seed).
inline salfold::GrayImage random_image(int w, int h, std::uint64_t seed) {
    salfold::GrayImage img(w, h);
    salfold::Rng rng(seed);
    for (auto& v : img.data) v = static_cast<double>(rng.below(256));
    return img;
}

/// Minimal 8-bit RGB PNG writer for decoder tests.
inline void write_rgb_png(const std::string& path, int w, int h,
                          const std::vector<unsigned char>& rgb) {
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw std::runtime_error("cannot write " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw std::runtime_error("PNG encode error for " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < h; ++y)
        png_write_row(png, const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(y) * w * 3));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

} // namespace testing

#endif
