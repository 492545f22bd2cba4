#ifndef SALFOLD_FOLDING_HPP
#define SALFOLD_FOLDING_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "salfold/error.hpp"
#include "salfold/image.hpp"
#include "salfold/saliency.hpp"
#include "salfold/util.hpp"

namespace salfold {

/// How a superimposed pixel pair combines.
enum class SuperposeOp { mean, max, sum_clipped };

inline const char* superpose_name(SuperposeOp op) {
    switch (op) {
        case SuperposeOp::mean: return "mean";
        case SuperposeOp::max: return "max";
        case SuperposeOp::sum_clipped: return "sum_clipped";
    }
    return "mean";
}

inline SuperposeOp parse_superpose(const std::string& name) {
    if (name == "mean") return SuperposeOp::mean;
    if (name == "max") return SuperposeOp::max;
    if (name == "sum_clipped") return SuperposeOp::sum_clipped;
    raise(Errc::bad_config, "unknown superpose op '" + name + "'");
}

/// One axis of a fold: block strip `source` is superimposed onto the
/// adjacent strip `target` and then removed.
struct AxisFold {
    int source = 0;
    int target = 1;
};

/// A dataset-global folding decision, derived once from the saliency
/// template and applied unchanged to every image.
struct FoldingPlan {
    int grid = 4;
    AxisFold columns;
    AxisFold rows;
    std::vector<double> column_scores; // per adjacent pair, the moved-strip mass
    std::vector<double> row_scores;
    bool degenerate = false; // template carried no signal, fold fell back to pair (0, 1)
};

// ------------------------------------------------------------- strip masses

/// Saliency mass of each block-column strip (template values summed over the
/// full height of the strip).
inline std::vector<double> column_masses(const SaliencyTemplate& tmpl, const BlockGrid& grid) {
    std::vector<double> mass(static_cast<std::size_t>(grid.cols), 0.0);
    for (int j = 0; j < grid.cols; ++j)
        for (int y = 0; y < tmpl.height; ++y)
            for (int x = grid.col_bounds[static_cast<std::size_t>(j)];
                 x < grid.col_bounds[static_cast<std::size_t>(j) + 1]; ++x)
                mass[static_cast<std::size_t>(j)] += tmpl.at(y, x);
    return mass;
}

inline std::vector<double> row_masses(const SaliencyTemplate& tmpl, const BlockGrid& grid) {
    std::vector<double> mass(static_cast<std::size_t>(grid.rows), 0.0);
    for (int i = 0; i < grid.rows; ++i)
        for (int y = grid.row_bounds[static_cast<std::size_t>(i)];
             y < grid.row_bounds[static_cast<std::size_t>(i) + 1]; ++y)
            for (int x = 0; x < tmpl.width; ++x)
                mass[static_cast<std::size_t>(i)] += tmpl.at(y, x);
    return mass;
}

namespace detail {

struct AxisChoice {
    AxisFold fold;
    std::vector<double> scores;
};

/// Picks the adjacent pair whose less-salient member carries the least mass;
/// that member becomes the moved strip. Ties: lower pair index wins across
/// pairs; within a pair of equal masses the member farther from the grid
/// centre moves onto the nearer one, and at equal distance the higher index
/// moves onto the lower.
inline AxisChoice choose_axis_fold(const std::vector<double>& mass) {
    const int n = static_cast<int>(mass.size());
    AxisChoice choice;
    choice.scores.resize(static_cast<std::size_t>(n - 1));
    int best = 0;
    for (int p = 0; p + 1 < n; ++p) {
        choice.scores[static_cast<std::size_t>(p)] =
            std::min(mass[static_cast<std::size_t>(p)], mass[static_cast<std::size_t>(p) + 1]);
        if (choice.scores[static_cast<std::size_t>(p)] < choice.scores[static_cast<std::size_t>(best)])
            best = p;
    }
    const double ma = mass[static_cast<std::size_t>(best)];
    const double mb = mass[static_cast<std::size_t>(best) + 1];
    if (ma < mb) {
        choice.fold = {best, best + 1};
    } else if (mb < ma) {
        choice.fold = {best + 1, best};
    } else {
        const double centre = (n - 1) / 2.0;
        const double da = std::abs(best - centre);
        const double db = std::abs(best + 1 - centre);
        if (da > db)
            choice.fold = {best, best + 1};
        else
            choice.fold = {best + 1, best};
    }
    return choice;
}

} // namespace detail

/// Derives the global folding plan from a saliency template: one adjacent
/// block-column pair and one adjacent block-row pair, each chosen to move
/// the least-salient strip.
inline FoldingPlan plan_folding(const SaliencyTemplate& tmpl, int grid_n) {
    if (grid_n < 2) raise(Errc::bad_config, "folding needs a grid of at least 2");
    const BlockGrid grid = make_grid(tmpl.width, tmpl.height, grid_n);

    FoldingPlan plan;
    plan.grid = grid_n;
    const auto cols = detail::choose_axis_fold(column_masses(tmpl, grid));
    const auto rows = detail::choose_axis_fold(row_masses(tmpl, grid));
    plan.columns = cols.fold;
    plan.rows = rows.fold;
    plan.column_scores = cols.scores;
    plan.row_scores = rows.scores;
    plan.degenerate = std::all_of(tmpl.values.begin(), tmpl.values.end(),
                                  [](double v) { return v == 0.0; });
    return plan;
}

/// Saliency-free fallback: the plan a uniform template would produce. All
/// pair scores tie, so the tie-break chain picks pair (0, 1) on both axes
/// with the outer strip folding inward.
inline FoldingPlan fixed_plan(int grid_n) {
    if (grid_n < 2) raise(Errc::bad_config, "folding needs a grid of at least 2");
    FoldingPlan plan;
    plan.grid = grid_n;
    const auto choice = detail::choose_axis_fold(
        std::vector<double>(static_cast<std::size_t>(grid_n), 1.0));
    plan.columns = choice.fold;
    plan.rows = choice.fold;
    plan.column_scores = choice.scores;
    plan.row_scores = choice.scores;
    return plan;
}

// ------------------------------------------------------------ applying folds

namespace detail {

inline double superpose(double a, double b, SuperposeOp op) {
    switch (op) {
        case SuperposeOp::mean: return (a + b) / 2.0;
        case SuperposeOp::max: return std::max(a, b);
        case SuperposeOp::sum_clipped: return std::clamp(a + b, 0.0, 255.0);
    }
    return (a + b) / 2.0;
}

inline GrayImage extract_columns(const GrayImage& img, int x0, int x1) {
    GrayImage out(x1 - x0, img.height);
    for (int y = 0; y < img.height; ++y)
        for (int x = x0; x < x1; ++x)
            out.data[static_cast<std::size_t>(y) * out.width + (x - x0)] = img.at(y, x);
    return out;
}

inline GrayImage extract_rows(const GrayImage& img, int y0, int y1) {
    GrayImage out(img.width, y1 - y0);
    for (int y = y0; y < y1; ++y)
        for (int x = 0; x < img.width; ++x)
            out.data[static_cast<std::size_t>(y - y0) * out.width + x] = img.at(y, x);
    return out;
}

inline GrayImage fold_columns(const GrayImage& img, const std::vector<int>& bounds, int source,
                              int target, SuperposeOp op) {
    const int s0 = bounds[static_cast<std::size_t>(source)], s1 = bounds[static_cast<std::size_t>(source) + 1];
    const int t0 = bounds[static_cast<std::size_t>(target)], t1 = bounds[static_cast<std::size_t>(target) + 1];
    GrayImage strip = extract_columns(img, s0, s1);
    if (strip.width != t1 - t0) strip = resize_bilinear(strip, t1 - t0, img.height);

    GrayImage out(img.width - (s1 - s0), img.height);
    for (int y = 0; y < img.height; ++y) {
        int ox = 0;
        for (int x = 0; x < img.width; ++x) {
            if (x >= s0 && x < s1) continue;
            double v = img.at(y, x);
            if (x >= t0 && x < t1) v = superpose(v, strip.at(y, x - t0), op);
            out.data[static_cast<std::size_t>(y) * out.width + ox] = v;
            ++ox;
        }
    }
    return out;
}

inline GrayImage fold_rows(const GrayImage& img, const std::vector<int>& bounds, int source,
                           int target, SuperposeOp op) {
    const int s0 = bounds[static_cast<std::size_t>(source)], s1 = bounds[static_cast<std::size_t>(source) + 1];
    const int t0 = bounds[static_cast<std::size_t>(target)], t1 = bounds[static_cast<std::size_t>(target) + 1];
    GrayImage strip = extract_rows(img, s0, s1);
    if (strip.height != t1 - t0) strip = resize_bilinear(strip, img.width, t1 - t0);

    GrayImage out(img.width, img.height - (s1 - s0));
    int oy = 0;
    for (int y = 0; y < img.height; ++y) {
        if (y >= s0 && y < s1) continue;
        for (int x = 0; x < img.width; ++x) {
            double v = img.at(y, x);
            if (y >= t0 && y < t1) v = superpose(v, strip.at(y - t0, x), op);
            out.data[static_cast<std::size_t>(oy) * out.width + x] = v;
        }
        ++oy;
    }
    return out;
}

} // namespace detail

/// Applies the plan to one image: the source block-column strip is
/// superimposed onto its target and dropped, then the same happens for the
/// block-row strip. Strips that differ by a pixel in width are resized
/// before combining. The block bounds come from this image's own size, so
/// the plan transfers across resolutions.
inline GrayImage apply_folding(const GrayImage& img, const FoldingPlan& plan,
                               SuperposeOp op = SuperposeOp::mean) {
    auto check_axis = [&](const AxisFold& fold) {
        if (fold.source < 0 || fold.source >= plan.grid || fold.target < 0 ||
            fold.target >= plan.grid || std::abs(fold.source - fold.target) != 1)
            raise(Errc::plan_shape_mismatch, "fold indices do not describe an adjacent pair");
    };
    check_axis(plan.columns);
    check_axis(plan.rows);
    const BlockGrid grid = make_grid(img, plan.grid);
    GrayImage folded = detail::fold_columns(img, grid.col_bounds, plan.columns.source,
                                            plan.columns.target, op);
    folded = detail::fold_rows(folded, grid.row_bounds, plan.rows.source, plan.rows.target, op);
    return folded;
}

// -------------------------------------------------------------- persistence

inline void save_plan(const FoldingPlan& plan, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(Errc::io_error, "cannot write " + path);
    out << "salfold-plan 1\n";
    out << "grid " << plan.grid << "\n";
    out << "columns " << plan.columns.source << " " << plan.columns.target << "\n";
    out << "rows " << plan.rows.source << " " << plan.rows.target << "\n";
    out << "degenerate " << (plan.degenerate ? 1 : 0) << "\n";
    out << "column_scores";
    for (double s : plan.column_scores) out << " " << fmt_double(s);
    out << "\nrow_scores";
    for (double s : plan.row_scores) out << " " << fmt_double(s);
    out << "\n";
    if (!out) raise(Errc::io_error, "short write to " + path);
}

inline FoldingPlan load_plan(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(Errc::unreadable_file, path);
    auto corrupt = [&](const std::string& why) -> void {
        raise(Errc::corrupt_plan_file, path + ": " + why);
    };
    std::string magic, key;
    int version = 0;
    FoldingPlan plan;
    in >> magic >> version;
    if (magic != "salfold-plan" || version != 1) corrupt("bad header");
    in >> key >> plan.grid;
    if (key != "grid" || !in || plan.grid < 2) corrupt("bad grid");
    in >> key >> plan.columns.source >> plan.columns.target;
    if (key != "columns" || !in) corrupt("bad column fold");
    in >> key >> plan.rows.source >> plan.rows.target;
    if (key != "rows" || !in) corrupt("bad row fold");
    int degenerate = 0;
    in >> key >> degenerate;
    if (key != "degenerate" || !in) corrupt("bad degenerate flag");
    plan.degenerate = degenerate != 0;
    in >> key;
    if (key != "column_scores") corrupt("missing column scores");
    plan.column_scores.resize(static_cast<std::size_t>(plan.grid) - 1);
    for (double& s : plan.column_scores)
        if (!(in >> s)) corrupt("truncated column scores");
    in >> key;
    if (key != "row_scores") corrupt("missing row scores");
    plan.row_scores.resize(static_cast<std::size_t>(plan.grid) - 1);
    for (double& s : plan.row_scores)
        if (!(in >> s)) corrupt("truncated row scores");
    auto check_axis = [&](const AxisFold& fold) {
        if (fold.source < 0 || fold.source >= plan.grid || fold.target < 0 ||
            fold.target >= plan.grid || std::abs(fold.source - fold.target) != 1)
            corrupt("fold indices do not describe an adjacent pair");
    };
    check_axis(plan.columns);
    check_axis(plan.rows);
    return plan;
}

} // namespace salfold

#endif
