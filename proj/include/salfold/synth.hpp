#ifndef SALFOLD_SYNTH_HPP
#define SALFOLD_SYNTH_HPP

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "salfold/error.hpp"
#include "salfold/image.hpp"
#include "salfold/manifest.hpp"
#include "salfold/util.hpp"

namespace salfold {

/// Parameters of the desk-scale synthetic x-ray-like corpus.
struct SynthSpec {
    int classes = 4;
    int train_per_class = 50;
    int test_per_class = 20;
    int image_size = 64;      // square images
    double noise = 0.05;      // uniform noise amplitude as a fraction of 255
    std::uint64_t seed = 1;
};

namespace detail {

inline char digit36(int v) { return v < 10 ? static_cast<char>('0' + v) : static_cast<char>('a' + v - 10); }

/// Class codes share a common stem and differ in a controlled set of
/// positions: two base-36 digits of the class index appear in the T and D
/// axes and one derived digit in A; the B axis is constant across classes.
inline IrmaCode synth_code(int cls) {
    const char d1 = digit36((cls / 36) % 36);
    const char d2 = digit36(cls % 36);
    IrmaCode c;
    c.axes[0] = std::string("11") + d1 + d2;
    c.axes[1] = std::string("1") + d1 + d2;
    c.axes[2] = std::string(1, digit36((cls * 7) % 10)) + "00";
    c.axes[3] = "500";
    return c;
}

/// Per-class texture: oriented sinusoidal stripes inside a centred disc on a
/// dark background. Instances of one class differ only by noise, so class
/// mean images reproduce the pattern.
inline GrayImage synth_image(const SynthSpec& spec, int cls, std::uint64_t stream) {
    const int n = spec.image_size;
    GrayImage img(n, n);
    const double theta = std::numbers::pi * cls / spec.classes;
    const double wavelength = 6.0 + 2.0 * (cls % 4);
    const double ct = std::cos(theta), st = std::sin(theta);
    const double cx = (n - 1) / 2.0, cy = (n - 1) / 2.0;
    const double radius = 0.42 * n;
    Rng rng(stream);
    for (int y = 0; y < n; ++y) {
        for (int x = 0; x < n; ++x) {
            const double dx = x - cx, dy = y - cy;
            double v;
            if (dx * dx + dy * dy <= radius * radius) {
                const double phase = 2.0 * std::numbers::pi * (x * ct + y * st) / wavelength;
                v = 128.0 + 60.0 * std::sin(phase);
            } else {
                v = 25.0;
            }
            if (spec.noise > 0.0) v += (rng.uniform() * 2.0 - 1.0) * spec.noise * 255.0;
            img.at(y, x) = std::min(255.0, std::max(0.0, v));
        }
    }
    return img;
}

} // namespace detail

/// Renders the corpus under `out_dir` (8-bit PGMs plus `manifest.tsv`) and
/// returns the manifest. Deterministic for a fixed spec: every image draws
/// from its own splitmix-derived stream, independent of generation order.
inline DatasetManifest generate_synthetic_corpus(const SynthSpec& spec,
                                                 const std::string& out_dir) {
    if (spec.classes < 2) raise(Errc::invalid_spec, "need at least 2 classes");
    if (spec.train_per_class < 1) raise(Errc::invalid_spec, "need at least 1 training image per class");
    if (spec.test_per_class < 0) raise(Errc::invalid_spec, "negative test count");
    if (spec.image_size < kMinImageDim)
        raise(Errc::invalid_spec, "image size below the processing minimum");
    if (spec.noise < 0.0 || spec.noise > 1.0) raise(Errc::invalid_spec, "noise must be in [0, 1]");

    std::filesystem::create_directories(out_dir);
    DatasetManifest m;
    auto emit = [&](Split split, int per_class) {
        for (int cls = 0; cls < spec.classes; ++cls) {
            for (int i = 0; i < per_class; ++i) {
                std::uint64_t key = spec.seed;
                key ^= 0x632BE59BD9B4E019ull * static_cast<std::uint64_t>(cls + 1);
                key ^= 0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(i + 1);
                key ^= (split == Split::test) ? 0xD1B54A32D192ED03ull : 0;
                const GrayImage img = detail::synth_image(spec, cls, key);
                char name[64];
                std::snprintf(name, sizeof name, "c%02d_%s%03d.pgm", cls, split_name(split), i);
                const auto path = std::filesystem::path(out_dir) / name;
                save_pgm(img, path.string());
                m.entries.push_back({path.string(), detail::synth_code(cls), split});
            }
        }
    };
    emit(Split::train, spec.train_per_class);
    emit(Split::test, spec.test_per_class);
    write_manifest(m, (std::filesystem::path(out_dir) / "manifest.tsv").string());
    return m;
}

} // namespace salfold

#endif
