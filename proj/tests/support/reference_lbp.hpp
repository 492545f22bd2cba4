#ifndef TESTS_SUPPORT_REFERENCE_LBP_HPP
#define TESTS_SUPPORT_REFERENCE_LBP_HPP

// Naive reimplementation of the multi-block pattern features, written
// directly from the documented sampling and mapping conventions with no
// shared helpers or precomputed tables. The optimized extractor must match
// it bit for bit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "salfold/image.hpp"
#include "salfold/lbp.hpp"

namespace reference {

inline int circular_transitions(int code) {
    int t = 0;
    for (int k = 0; k < 8; ++k) {
        const int a = (code >> k) & 1;
        const int b = (code >> ((k + 1) % 8)) & 1;
        if (a != b) ++t;
    }
    return t;
}

// rank of a uniform code among the uniform codes in ascending order; 58 else
inline int uniform_bin(int code) {
    if (circular_transitions(code) > 2) return 58;
    int rank = 0;
    for (int c = 0; c < code; ++c)
        if (circular_transitions(c) <= 2) ++rank;
    return rank;
}

inline double bilinear_sample(const salfold::GrayImage& img, int x, int y, double dx, double dy) {
    auto snap = [](double d) {
        const double r = std::nearbyint(d);
        return (std::abs(d - r) < 1e-9) ? r : d;
    };
    dx = snap(dx);
    dy = snap(dy);
    const int ox = static_cast<int>(std::floor(dx));
    const int oy = static_cast<int>(std::floor(dy));
    const double fx = dx - ox;
    const double fy = dy - oy;
    const int x0 = x + ox, y0 = y + oy;
    const int x1 = std::min(x0 + 1, img.width - 1);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double v00 = img.at(y0, x0);
    if (fx == 0.0 && fy == 0.0) return v00;
    const double v01 = img.at(y0, x1);
    const double v10 = img.at(y1, x0);
    const double v11 = img.at(y1, x1);
    return v00 + fx * (v01 - v00) + fy * (v10 - v00) + fx * fy * (v00 - v01 - v10 + v11);
}

inline int pattern_code(const salfold::GrayImage& img, int x, int y, int radius,
                        salfold::LbpNeighborhood mode) {
    const double center = img.at(y, x);
    int code = 0;
    for (int k = 0; k < 8; ++k) {
        double dx, dy;
        if (mode == salfold::LbpNeighborhood::square) {
            const int r = radius;
            const int ring[8][2] = {{r, 0}, {r, -r}, {0, -r}, {-r, -r},
                                    {-r, 0}, {-r, r}, {0, r}, {r, r}};
            dx = ring[k][0];
            dy = ring[k][1];
        } else {
            const double angle = 2.0 * std::numbers::pi * k / 8;
            dx = radius * std::cos(angle);
            dy = -radius * std::sin(angle);
        }
        if (bilinear_sample(img, x, y, dx, dy) >= center) code |= 1 << k;
    }
    return code;
}

/// P=8 feature extraction: per cell of the balanced grid and per radius, a
/// histogram of codes over the pixels whose neighborhood fits in the image,
/// L1-normalized per slice. Cells row-major, radii in order within a cell.
inline std::vector<double> extract(const salfold::GrayImage& img, const salfold::LbpParams& p) {
    auto bounds = [](int len, int n) {
        std::vector<int> b(static_cast<std::size_t>(n) + 1, 0);
        for (int k = 0; k < n; ++k)
            b[static_cast<std::size_t>(k) + 1] =
                b[static_cast<std::size_t>(k)] + len / n + (k < len % n ? 1 : 0);
        return b;
    };
    const auto rb = bounds(img.height, p.grid);
    const auto cb = bounds(img.width, p.grid);
    const int bins = p.uniform ? 59 : 256;
    std::vector<double> out(static_cast<std::size_t>(p.grid) * p.grid * p.radii.size() * bins,
                            0.0);
    for (int ci = 0; ci < p.grid; ++ci) {
        for (int cj = 0; cj < p.grid; ++cj) {
            for (std::size_t ri = 0; ri < p.radii.size(); ++ri) {
                const int r = p.radii[ri];
                const std::size_t slice =
                    ((static_cast<std::size_t>(ci) * p.grid + cj) * p.radii.size() + ri) * bins;
                double count = 0.0;
                const int y0 = std::max(rb[static_cast<std::size_t>(ci)], r);
                const int y1 = std::min(rb[static_cast<std::size_t>(ci) + 1], img.height - r);
                const int x0 = std::max(cb[static_cast<std::size_t>(cj)], r);
                const int x1 = std::min(cb[static_cast<std::size_t>(cj) + 1], img.width - r);
                for (int y = y0; y < y1; ++y) {
                    for (int x = x0; x < x1; ++x) {
                        const int code = pattern_code(img, x, y, r, p.mode);
                        const int bin = p.uniform ? uniform_bin(code) : code;
                        out[slice + static_cast<std::size_t>(bin)] += 1.0;
                        count += 1.0;
                    }
                }
                if (count > 0.0)
                    for (int b = 0; b < bins; ++b)
                        out[slice + static_cast<std::size_t>(b)] /= count;
            }
        }
    }
    return out;
}

} // namespace reference

#endif
