#ifndef SALFOLD_LBP_HPP
#define SALFOLD_LBP_HPP

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "salfold/error.hpp"
#include "salfold/image.hpp"
#include "salfold/util.hpp"

namespace salfold {

enum class LbpNeighborhood { circular, square };

struct LbpParams {
    int neighbors = 8;                       // P; must be 8 while uniform mapping is on
    std::vector<int> radii = {1, 2};         // sampling radii (the two texture scales)
    int grid = 3;                            // n of the n x n block grid
    bool uniform = true;                     // 59-bin u2 mapping
    LbpNeighborhood mode = LbpNeighborhood::circular;

    int bins() const { return uniform ? 59 : (1 << neighbors); }
    std::size_t dims() const {
        return static_cast<std::size_t>(grid) * grid * bins() * radii.size();
    }

    /// Canonical single-token description; persisted with features and models
    /// so that mismatched extraction settings fail loudly.
    std::string fingerprint() const {
        std::ostringstream os;
        os << "lbp:P=" << neighbors << ",radii=";
        for (std::size_t i = 0; i < radii.size(); ++i) os << (i ? "|" : "") << radii[i];
        os << ",grid=" << grid << ",uniform=" << (uniform ? 1 : 0) << ",mode="
           << (mode == LbpNeighborhood::circular ? "circular" : "square");
        return os.str();
    }
};

// ------------------------------------------------------------ uniform mapping

namespace detail {

inline int circular_transitions(int code, int p = 8) {
    const int mask = (1 << p) - 1;
    const int rot = ((code << 1) | (code >> (p - 1))) & mask;
    return std::popcount(static_cast<unsigned>(code ^ rot));
}

inline std::array<int, 256> build_uniform_table() {
    std::array<int, 256> table{};
    int next = 0;
    for (int code = 0; code < 256; ++code)
        table[static_cast<std::size_t>(code)] = (circular_transitions(code) <= 2) ? next++ : -1;
    for (auto& v : table)
        if (v < 0) v = 58; // catch-all bin for the non-uniform codes
    return table;
}

} // namespace detail

/// Bin index in [0, 58]: the 58 uniform codes (at most two circular 0/1
/// transitions) get bins 0..57 in ascending code order, everything else 58.
inline int uniform_map(int code) {
    static const std::array<int, 256> table = detail::build_uniform_table();
    return table[static_cast<std::size_t>(code)];
}

// ------------------------------------------------------------------ sampling

namespace detail {

struct SampleOffset {
    int ox, oy;     // floor of the offset
    double fx, fy;  // fractional parts; 0 means the sample is on the grid
};

inline SampleOffset decompose_offset(double dx, double dy) {
    // Offsets within 1e-9 of an integer are snapped so that the cardinal
    // samples are exact pixel reads.
    auto snap = [](double d) {
        const double r = std::nearbyint(d);
        return (std::abs(d - r) < 1e-9) ? r : d;
    };
    dx = snap(dx);
    dy = snap(dy);
    SampleOffset s;
    s.ox = static_cast<int>(std::floor(dx));
    s.oy = static_cast<int>(std::floor(dy));
    s.fx = dx - s.ox;
    s.fy = dy - s.oy;
    return s;
}

/// Canonical interpolation form. Exact at fx=fy=0 and on constant patches:
/// v = v00 + fx(v01-v00) + fy(v10-v00) + fx*fy(v00-v01-v10+v11).
inline double sample_at(const GrayImage& img, int x, int y, const SampleOffset& o) {
    const int x0 = x + o.ox, y0 = y + o.oy;
    const int x1 = std::min(x0 + 1, img.width - 1);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double v00 = img.at(y0, x0);
    if (o.fx == 0.0 && o.fy == 0.0) return v00;
    const double v01 = img.at(y0, x1);
    const double v10 = img.at(y1, x0);
    const double v11 = img.at(y1, x1);
    return v00 + o.fx * (v01 - v00) + o.fy * (v10 - v00) + o.fx * o.fy * (v00 - v01 - v10 + v11);
}

/// Neighbor k sits at angle 2*pi*k/P counterclockwise from east (y axis
/// points down, so north is -y). Square mode walks the axis-aligned ring
/// through the same eight compass points.
inline std::vector<SampleOffset> neighbor_offsets(int radius, int p, LbpNeighborhood mode) {
    std::vector<SampleOffset> out;
    out.reserve(static_cast<std::size_t>(p));
    if (mode == LbpNeighborhood::square) {
        if (p != 8) raise(Errc::bad_config, "square neighborhood is defined for P=8");
        const int r = radius;
        const int sq[8][2] = {{r, 0}, {r, -r}, {0, -r}, {-r, -r}, {-r, 0}, {-r, r}, {0, r}, {r, r}};
        for (auto& d : sq) out.push_back(decompose_offset(d[0], d[1]));
    } else {
        for (int k = 0; k < p; ++k) {
            const double angle = 2.0 * std::numbers::pi * k / p;
            out.push_back(decompose_offset(radius * std::cos(angle), -radius * std::sin(angle)));
        }
    }
    return out;
}

inline int code_from_offsets(const GrayImage& img, int x, int y,
                             const std::vector<SampleOffset>& offsets) {
    const double center = img.at(y, x);
    int code = 0;
    for (std::size_t k = 0; k < offsets.size(); ++k)
        if (sample_at(img, x, y, offsets[k]) >= center) code |= 1 << k;
    return code;
}

} // namespace detail

/// Pattern code at (x, y): bit k set iff neighbor k >= center.
inline int lbp_code(const GrayImage& img, int x, int y, int radius, int p = 8,
                    LbpNeighborhood mode = LbpNeighborhood::circular) {
    if (x < radius || y < radius || x >= img.width - radius || y >= img.height - radius)
        raise(Errc::out_of_bounds, "radius-" + std::to_string(radius) +
                                       " neighborhood does not fit at (" + std::to_string(x) +
                                       ", " + std::to_string(y) + ")");
    return detail::code_from_offsets(img, x, y, detail::neighbor_offsets(radius, p, mode));
}

// ----------------------------------------------------------------- extraction

/// Multi-block multi-radius histogram features.
///
/// Per grid cell and radius, codes are histogrammed over every pixel whose
/// neighborhood fits inside the *image* (cells do not clip neighborhoods;
/// pixels near the image border are skipped). Each bins-sized slice is
/// L1-normalized. Layout: cells row-major, radii in declaration order within
/// a cell.
inline std::vector<double> extract_features(const GrayImage& img, const LbpParams& params) {
    if (params.uniform && params.neighbors != 8)
        raise(Errc::bad_config, "uniform mapping requires P=8");
    if (params.radii.empty()) raise(Errc::bad_config, "no radii configured");
    int rmax = 0;
    for (int r : params.radii) {
        if (r < 1) raise(Errc::bad_config, "radii must be positive");
        rmax = std::max(rmax, r);
    }
    const BlockGrid grid = make_grid(img, params.grid);
    for (int i = 0; i < grid.rows; ++i)
        for (int j = 0; j < grid.cols; ++j)
            if (grid.cell_height(i) < 2 * rmax + 1 || grid.cell_width(j) < 2 * rmax + 1)
                raise(Errc::block_too_small,
                      "cell (" + std::to_string(i) + "," + std::to_string(j) + ") is " +
                          std::to_string(grid.cell_width(j)) + "x" +
                          std::to_string(grid.cell_height(i)) + ", needs " +
                          std::to_string(2 * rmax + 1));

    const int bins = params.bins();
    const std::size_t n_cells = static_cast<std::size_t>(params.grid) * params.grid;
    std::vector<double> features(n_cells * params.radii.size() * bins, 0.0);

    // One code pass per radius over the valid region, then per-cell counting.
    std::vector<int> codes(img.pixels());
    for (std::size_t ri = 0; ri < params.radii.size(); ++ri) {
        const int r = params.radii[ri];
        const auto offsets = detail::neighbor_offsets(r, params.neighbors, params.mode);
        for (int y = r; y < img.height - r; ++y)
            for (int x = r; x < img.width - r; ++x)
                codes[static_cast<std::size_t>(y) * img.width + x] =
                    detail::code_from_offsets(img, x, y, offsets);

        for (int ci = 0; ci < grid.rows; ++ci) {
            const int y0 = std::max(grid.row_bounds[ci], r);
            const int y1 = std::min(grid.row_bounds[ci + 1], img.height - r);
            for (int cj = 0; cj < grid.cols; ++cj) {
                const int x0 = std::max(grid.col_bounds[cj], r);
                const int x1 = std::min(grid.col_bounds[cj + 1], img.width - r);
                const std::size_t slice =
                    ((static_cast<std::size_t>(ci) * grid.cols + cj) * params.radii.size() + ri) *
                    bins;
                double count = 0.0;
                for (int y = y0; y < y1; ++y) {
                    for (int x = x0; x < x1; ++x) {
                        const int code = codes[static_cast<std::size_t>(y) * img.width + x];
                        const int bin = params.uniform ? uniform_map(code) : code;
                        features[slice + static_cast<std::size_t>(bin)] += 1.0;
                        count += 1.0;
                    }
                }
                if (count > 0.0)
                    for (int b = 0; b < bins; ++b) features[slice + static_cast<std::size_t>(b)] /= count;
            }
        }
    }
    return features;
}

// --------------------------------------------------------------- feature sets

/// Labeled feature matrix plus the extraction fingerprint it was built with.
struct SampleSet {
    std::size_t dims = 0;
    std::string fingerprint;
    std::vector<int> labels;
    std::vector<double> values; // row-major, labels.size() x dims

    std::size_t rows() const { return labels.size(); }
    const double* row(std::size_t i) const { return values.data() + i * dims; }
    void add(int label, const std::vector<double>& v) {
        if (dims == 0) dims = v.size();
        if (v.size() != dims) raise(Errc::dimension_mismatch, "ragged feature row");
        labels.push_back(label);
        values.insert(values.end(), v.begin(), v.end());
    }
};

inline void save_features(const SampleSet& s, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::io_error, "cannot write " + path);
    out << "salfold-features 1\n";
    out << "rows " << s.rows() << " dims " << s.dims << "\n";
    out << "fingerprint " << s.fingerprint << "\n";
    for (std::size_t i = 0; i < s.rows(); ++i) {
        out << s.labels[i];
        const double* r = s.row(i);
        for (std::size_t d = 0; d < s.dims; ++d) out << " " << fmt_double(r[d]);
        out << "\n";
    }
    if (!out) raise(Errc::io_error, "short write to " + path);
}

inline SampleSet load_features(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::unreadable_file, path);
    std::string magic, key;
    int version = 0;
    in >> magic >> version;
    if (magic != "salfold-features" || version != 1)
        raise(Errc::corrupt_feature_file, path + ": bad header");
    std::size_t rows = 0;
    SampleSet s;
    in >> key >> rows;
    if (key != "rows") raise(Errc::corrupt_feature_file, path + ": missing rows");
    in >> key >> s.dims;
    if (key != "dims") raise(Errc::corrupt_feature_file, path + ": missing dims");
    in >> key >> s.fingerprint;
    if (key != "fingerprint") raise(Errc::corrupt_feature_file, path + ": missing fingerprint");
    s.labels.reserve(rows);
    s.values.reserve(rows * s.dims);
    for (std::size_t i = 0; i < rows; ++i) {
        int label;
        if (!(in >> label)) raise(Errc::corrupt_feature_file, path + ": truncated at row " + std::to_string(i));
        s.labels.push_back(label);
        for (std::size_t d = 0; d < s.dims; ++d) {
            double v;
            if (!(in >> v)) raise(Errc::corrupt_feature_file, path + ": truncated at row " + std::to_string(i));
            s.values.push_back(v);
        }
    }
    return s;
}

} // namespace salfold

#endif
