#ifndef SALFOLD_SALIENCY_HPP
#define SALFOLD_SALIENCY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

#include "salfold/error.hpp"
#include "salfold/image.hpp"
#include "salfold/util.hpp"

namespace salfold {

struct SaliencyParams {
    int patch_size = 7;           // odd window side, border-replicated
    int k_nearest = 64;           // most-similar patches entering the score
    double position_weight = 3.0; // c in d_int / (1 + c * d_pos)
    std::vector<double> scales = {1.0, 0.8, 0.5, 0.3};
    int working_resolution = 128; // maps are computed on a square this size
    double attended_threshold = 0.8; // fraction of the map maximum
};

/// Per-pixel saliency in [0, 1], row-major.
struct SaliencyMap {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
    double& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
};

namespace detail {

/// All patches of one image, border-replicated, pixel values scaled to
/// [0, 1], rows of `m = patch_size^2` values in window row-major order.
inline std::vector<double> gather_patches(const GrayImage& img, int patch_size) {
    const int h = patch_size / 2;
    const std::size_t m = static_cast<std::size_t>(patch_size) * patch_size;
    std::vector<double> patches(static_cast<std::size_t>(img.width) * img.height * m);
    std::size_t out = 0;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int dy = -h; dy <= h; ++dy) {
                const int sy = std::clamp(y + dy, 0, img.height - 1);
                for (int dx = -h; dx <= h; ++dx) {
                    const int sx = std::clamp(x + dx, 0, img.width - 1);
                    patches[out++] = img.at(sy, sx) / 255.0;
                }
            }
        }
    }
    return patches;
}

/// Patch dissimilarity. Both halves are pinned formulas: the intensity term
/// is the root mean square difference over the window, the position term is
/// the axis-normalized Euclidean offset scaled into [0, 1].
///   d(p, q) = (sqrt(acc) / sqrt(m)) / (1 + c * d_pos)
inline double patch_distance(double acc, double sqrt_m, double denom) {
    return std::sqrt(acc) / sqrt_m / denom;
}

inline double position_term(int xi, int yi, int xq, int yq, int w, int h) {
    const double ddx = static_cast<double>(xi - xq) / w;
    const double ddy = static_cast<double>(yi - yq) / h;
    return std::sqrt(ddx * ddx + ddy * ddy) / std::sqrt(2.0);
}

/// Felzenszwalb squared distance transform, one dimension. `f` holds seed
/// costs (0 at seeds, big elsewhere), `d` receives the lower envelope.
inline void squared_dt_1d(const double* f, double* d, int n, int* v, double* z) {
    int k = 0;
    v[0] = 0;
    z[0] = -1e30;
    z[1] = 1e30;
    for (int q = 1; q < n; ++q) {
        double s = ((f[q] + static_cast<double>(q) * q) -
                    (f[v[k]] + static_cast<double>(v[k]) * v[k])) /
                   (2.0 * q - 2.0 * v[k]);
        while (s <= z[k]) {
            --k;
            s = ((f[q] + static_cast<double>(q) * q) -
                 (f[v[k]] + static_cast<double>(v[k]) * v[k])) /
                (2.0 * q - 2.0 * v[k]);
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = 1e30;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double dq = q - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

/// Squared Euclidean distance to the nearest seed (value 0 in `seed_cost`,
/// 1e20 elsewhere), exact, rows then columns.
inline std::vector<double> squared_distance_transform(std::vector<double> seed_cost, int width,
                                                      int height) {
    const int n = std::max(width, height);
    std::vector<double> f(static_cast<std::size_t>(n)), d(static_cast<std::size_t>(n));
    std::vector<int> v(static_cast<std::size_t>(n));
    std::vector<double> z(static_cast<std::size_t>(n) + 1);
    for (int y = 0; y < height; ++y) {
        double* row = seed_cost.data() + static_cast<std::size_t>(y) * width;
        squared_dt_1d(row, d.data(), width, v.data(), z.data());
        std::copy(d.begin(), d.begin() + width, row);
    }
    for (int x = 0; x < width; ++x) {
        for (int y = 0; y < height; ++y) f[static_cast<std::size_t>(y)] = seed_cost[static_cast<std::size_t>(y) * width + x];
        squared_dt_1d(f.data(), d.data(), height, v.data(), z.data());
        for (int y = 0; y < height; ++y) seed_cost[static_cast<std::size_t>(y) * width + x] = d[static_cast<std::size_t>(y)];
    }
    return seed_cost;
}

} // namespace detail

/// Single-scale saliency of `img` at its own resolution: for every pixel,
/// the K smallest patch dissimilarities d_1..d_K (ties broken toward the
/// lower pixel index) give
///   S_i = 1 - exp(-(1/K) * sum_k d_k)
/// with the d_k summed in ascending order. No focus weighting and no
/// rescaling happens here. A constant image scores zero everywhere.
inline SaliencyMap compute_saliency_single_scale(const GrayImage& img, const SaliencyParams& params,
                                                 int threads = 1) {
    if (params.patch_size < 1 || params.patch_size % 2 == 0)
        raise(Errc::bad_config, "patch size must be odd and positive");
    if (params.k_nearest < 1) raise(Errc::bad_config, "k_nearest must be positive");

    const int w = img.width, h = img.height;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    const std::size_t m = static_cast<std::size_t>(params.patch_size) * params.patch_size;
    const double sqrt_m = std::sqrt(static_cast<double>(m));
    const double c = params.position_weight;
    const std::size_t k_eff = std::min<std::size_t>(static_cast<std::size_t>(params.k_nearest), n - 1);

    SaliencyMap map;
    map.width = w;
    map.height = h;
    map.values.assign(n, 0.0);
    if (n < 2) return map;

    const std::vector<double> patches = detail::gather_patches(img, params.patch_size);

    parallel_for(n, threads, [&](std::size_t i) {
        const int xi = static_cast<int>(i % static_cast<std::size_t>(w));
        const int yi = static_cast<int>(i / static_cast<std::size_t>(w));
        const double* pi = patches.data() + i * m;

        // max-heap of the K best distances; a later candidate only enters on a
        // strictly smaller distance, which implements the index tie-break
        std::vector<double> heap;
        heap.reserve(k_eff);
        for (std::size_t q = 0; q < n; ++q) {
            if (q == i) continue;
            const int xq = static_cast<int>(q % static_cast<std::size_t>(w));
            const int yq = static_cast<int>(q / static_cast<std::size_t>(w));
            const double denom = 1.0 + c * detail::position_term(xi, yi, xq, yq, w, h);
            const double* pq = patches.data() + q * m;

            const bool full = heap.size() == k_eff;
            const double worst = full ? heap.front() : 0.0;
            double acc = 0.0;
            bool abandoned = false;
            for (std::size_t k = 0; k < m; ++k) {
                const double diff = pi[k] - pq[k];
                acc += diff * diff;
                // partial distance is monotone in acc through the same
                // operation chain, so this skip is exact
                if (full && (k & 15u) == 15u &&
                    detail::patch_distance(acc, sqrt_m, denom) >= worst) {
                    abandoned = true;
                    break;
                }
            }
            if (abandoned) continue;
            const double d = detail::patch_distance(acc, sqrt_m, denom);
            if (!full) {
                heap.push_back(d);
                std::push_heap(heap.begin(), heap.end());
            } else if (d < worst) {
                std::pop_heap(heap.begin(), heap.end());
                heap.back() = d;
                std::push_heap(heap.begin(), heap.end());
            }
        }
        std::sort(heap.begin(), heap.end());
        double sum = 0.0;
        for (double d : heap) sum += d;
        map.values[i] = 1.0 - std::exp(-sum / static_cast<double>(k_eff));
    });
    return map;
}

namespace detail {

inline SaliencyMap resize_map(const SaliencyMap& map, int new_w, int new_h) {
    GrayImage tmp(map.width, map.height, map.values);
    GrayImage out = resize_bilinear(tmp, new_w, new_h);
    return SaliencyMap{out.width, out.height, std::move(out.data)};
}

} // namespace detail

/// Full saliency map on a square working canvas: the image is resized to the
/// working resolution, single-scale maps at every configured scale are
/// averaged, pixels near the attended area (>= threshold * max) keep their
/// score while the rest decay with distance to it, and the result is min-max
/// rescaled into [0, 1]. A flat map stays all zero.
inline SaliencyMap compute_saliency(const GrayImage& img, const SaliencyParams& params,
                                    int threads = 1) {
    if (params.working_resolution < kMinImageDim)
        raise(Errc::bad_config, "working resolution too small");
    if (params.scales.empty()) raise(Errc::bad_config, "need at least one scale");
    if (params.attended_threshold <= 0.0 || params.attended_threshold > 1.0)
        raise(Errc::bad_config, "attended threshold must be in (0, 1]");

    const int w = params.working_resolution;
    const GrayImage base = resize_bilinear(img, w, w);

    SaliencyMap mean;
    mean.width = w;
    mean.height = w;
    mean.values.assign(static_cast<std::size_t>(w) * w, 0.0);
    for (double s : params.scales) {
        if (s <= 0.0 || s > 1.0) raise(Errc::bad_config, "scales must be in (0, 1]");
        const int sw = std::max(kMinImageDim, static_cast<int>(std::lround(w * s)));
        const GrayImage scaled = (sw == w) ? base : resize_bilinear(base, sw, sw);
        SaliencyMap one = compute_saliency_single_scale(scaled, params, threads);
        if (sw != w) one = detail::resize_map(one, w, w);
        for (std::size_t i = 0; i < mean.values.size(); ++i) mean.values[i] += one.values[i];
    }
    const double inv_scales = 1.0 / static_cast<double>(params.scales.size());
    for (double& v : mean.values) v *= inv_scales;

    double max_v = 0.0;
    for (double v : mean.values) max_v = std::max(max_v, v);
    if (max_v <= 0.0) return mean; // flat input, keep the all-zero map

    // distance-to-attended-area attenuation
    const double threshold = params.attended_threshold * max_v;
    std::vector<double> seed(mean.values.size());
    for (std::size_t i = 0; i < seed.size(); ++i)
        seed[i] = (mean.values[i] >= threshold) ? 0.0 : 1e20;
    const std::vector<double> sq = detail::squared_distance_transform(std::move(seed), w, w);
    const double diagonal = std::sqrt(static_cast<double>(w) * w + static_cast<double>(w) * w);
    for (std::size_t i = 0; i < mean.values.size(); ++i) {
        const double d_focus = std::sqrt(sq[i]) / diagonal;
        mean.values[i] *= (1.0 - d_focus);
    }

    double lo = mean.values[0], hi = mean.values[0];
    for (double v : mean.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi > lo) {
        const double inv = 1.0 / (hi - lo);
        for (double& v : mean.values) v = (v - lo) * inv;
    } else {
        for (double& v : mean.values) v = 0.0;
    }
    return mean;
}

// --------------------------------------------------------------- template

/// Dataset-level saliency template: per-class mean maps averaged with equal
/// class weight, so class size does not skew the template.
struct SaliencyTemplate {
    int width = 0;
    int height = 0;
    std::size_t image_count = 0;
    std::size_t class_count = 0;
    std::vector<double> values;

    double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

inline SaliencyTemplate build_template(const std::vector<SaliencyMap>& maps,
                                       const std::vector<int>& class_ids, int n_classes) {
    if (maps.empty()) raise(Errc::empty_input, "no saliency maps");
    if (maps.size() != class_ids.size())
        raise(Errc::shape_mismatch, "map count does not match class id count");
    if (n_classes < 1) raise(Errc::invalid_spec, "class count must be positive");
    const int w = maps.front().width, h = maps.front().height;
    const std::size_t n = static_cast<std::size_t>(w) * h;

    std::vector<std::vector<double>> class_sum(static_cast<std::size_t>(n_classes));
    std::vector<std::size_t> class_n(static_cast<std::size_t>(n_classes), 0);
    for (std::size_t i = 0; i < maps.size(); ++i) {
        const auto& map = maps[i];
        if (map.width != w || map.height != h)
            raise(Errc::shape_mismatch, "saliency maps differ in size");
        const int cls = class_ids[i];
        if (cls < 0 || cls >= n_classes) raise(Errc::shape_mismatch, "class id out of range");
        auto& sum = class_sum[static_cast<std::size_t>(cls)];
        if (sum.empty()) sum.assign(n, 0.0);
        for (std::size_t p = 0; p < n; ++p) sum[p] += map.values[p];
        ++class_n[static_cast<std::size_t>(cls)];
    }

    SaliencyTemplate tmpl;
    tmpl.width = w;
    tmpl.height = h;
    tmpl.image_count = maps.size();
    tmpl.values.assign(n, 0.0);
    std::size_t present = 0;
    for (int c = 0; c < n_classes; ++c) {
        const std::size_t cc = static_cast<std::size_t>(c);
        if (class_n[cc] == 0) continue;
        ++present;
        const double inv = 1.0 / static_cast<double>(class_n[cc]);
        for (std::size_t p = 0; p < n; ++p) tmpl.values[p] += class_sum[cc][p] * inv;
    }
    tmpl.class_count = present;
    const double inv = 1.0 / static_cast<double>(present);
    for (double& v : tmpl.values) v *= inv;
    return tmpl;
}

inline void save_template(const SaliencyTemplate& tmpl, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::io_error, "cannot write " + path);
    out << "salfold-template " << tmpl.width << " " << tmpl.height << " " << tmpl.image_count
        << " " << tmpl.class_count << "\n";
    for (int y = 0; y < tmpl.height; ++y) {
        for (int x = 0; x < tmpl.width; ++x) {
            if (x) out << " ";
            out << fmt_double(tmpl.at(y, x));
        }
        out << "\n";
    }
    if (!out) raise(Errc::io_error, "short write to " + path);
}

inline SaliencyTemplate load_template(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::unreadable_file, path);
    auto corrupt = [&](const std::string& why) -> void {
        raise(Errc::corrupt_template_file, path + ": " + why);
    };
    std::string magic;
    SaliencyTemplate tmpl;
    in >> magic >> tmpl.width >> tmpl.height >> tmpl.image_count >> tmpl.class_count;
    if (magic != "salfold-template" || !in) corrupt("bad header");
    if (tmpl.width < 1 || tmpl.height < 1) corrupt("bad dimensions");
    if (tmpl.image_count < 1 || tmpl.class_count < 1) corrupt("bad provenance counts");
    const std::size_t n = static_cast<std::size_t>(tmpl.width) * tmpl.height;
    tmpl.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(in >> tmpl.values[i])) corrupt("truncated values");
        if (!std::isfinite(tmpl.values[i])) corrupt("non-finite value");
    }
    double extra;
    if (in >> extra) corrupt("trailing values");
    return tmpl;
}

} // namespace salfold

#endif
