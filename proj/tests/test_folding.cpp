#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "salfold/error.hpp"
#include "salfold/folding.hpp"
#include "salfold/image.hpp"
#include "salfold/saliency.hpp"
#include "support/helpers.hpp"

using namespace salfold;
using testing::TempDir;

namespace {

/// Template with one nonzero pixel per block column, so the strip masses are
/// exactly the values handed in. 2px-wide strips on an 8-wide canvas.
SaliencyTemplate column_template(const std::vector<double>& masses) {
    SaliencyTemplate t;
    t.width = static_cast<int>(masses.size()) * 2;
    t.height = 8;
    t.image_count = 1;
    t.class_count = 1;
    t.values.assign(static_cast<std::size_t>(t.width) * t.height, 0.0);
    for (std::size_t j = 0; j < masses.size(); ++j)
        t.values[j * 2] = masses[j]; // row 0, first pixel of strip j
    return t;
}

SaliencyTemplate row_template(const std::vector<double>& masses) {
    SaliencyTemplate t;
    t.width = 8;
    t.height = static_cast<int>(masses.size()) * 2;
    t.image_count = 1;
    t.class_count = 1;
    t.values.assign(static_cast<std::size_t>(t.width) * t.height, 0.0);
    for (std::size_t i = 0; i < masses.size(); ++i)
        t.values[(i * 2) * static_cast<std::size_t>(t.width)] = masses[i];
    return t;
}

/// Independent restatement of the documented choice rules, written as plain
/// enumeration over every admissible move.
AxisFold oracle_choice(const std::vector<double>& mass) {
    const int n = static_cast<int>(mass.size());
    int best = 0;
    double best_score = std::min(mass[0], mass[1]);
    for (int p = 1; p + 1 < n; ++p) {
        const double s = std::min(mass[static_cast<std::size_t>(p)], mass[static_cast<std::size_t>(p) + 1]);
        if (s < best_score) {
            best_score = s;
            best = p;
        }
    }
    const double ma = mass[static_cast<std::size_t>(best)];
    const double mb = mass[static_cast<std::size_t>(best) + 1];
    if (ma < mb) return {best, best + 1};
    if (mb < ma) return {best + 1, best};
    const double centre = (n - 1) / 2.0;
    if (std::abs(best - centre) > std::abs(best + 1 - centre)) return {best, best + 1};
    return {best + 1, best};
}

double mean2(double a, double b) { return (a + b) / 2.0; }

} // namespace

TEST_CASE("strip masses are exact sums over template strips") {
    const SaliencyTemplate t = column_template({10.0, 1.0, 8.0, 9.0});
    const BlockGrid grid = make_grid(t.width, t.height, 4);
    REQUIRE(column_masses(t, grid) == std::vector<double>{10.0, 1.0, 8.0, 9.0});
    const SaliencyTemplate r = row_template({5.0, 5.0, 0.5, 7.0});
    const BlockGrid rgrid = make_grid(r.width, r.height, 4);
    REQUIRE(row_masses(r, rgrid) == std::vector<double>{5.0, 5.0, 0.5, 7.0});
}

TEST_CASE("column masses 10,1,8,9 fold strip 1 onto strip 0") {
    const FoldingPlan plan = plan_folding(column_template({10.0, 1.0, 8.0, 9.0}), 4);
    REQUIRE(plan.columns.source == 1);
    REQUIRE(plan.columns.target == 0);
    REQUIRE(plan.column_scores == std::vector<double>{1.0, 1.0, 8.0});
    REQUIRE_FALSE(plan.degenerate);
}

TEST_CASE("row masses 5,5,0.5,7 fold strip 2 onto strip 1") {
    const FoldingPlan plan = plan_folding(row_template({5.0, 5.0, 0.5, 7.0}), 4);
    REQUIRE(plan.rows.source == 2);
    REQUIRE(plan.rows.target == 1);
    REQUIRE(plan.row_scores == std::vector<double>{5.0, 0.5, 0.5});
}

TEST_CASE("a zero-mass outer strip folds inward") {
    const FoldingPlan plan = plan_folding(column_template({4.0, 5.0, 6.0, 0.0}), 4);
    REQUIRE(plan.columns.source == 3);
    REQUIRE(plan.columns.target == 2);
}

TEST_CASE("the chosen move always carries the least possible mass") {
    Rng rng(99);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(4));
        std::vector<double> mass(static_cast<std::size_t>(n));
        for (double& m : mass) m = 0.5 * static_cast<double>(rng.below(5)); // ties likely
        const auto choice = detail::choose_axis_fold(mass);

        double floor = 1e300;
        for (int p = 0; p + 1 < n; ++p)
            floor = std::min(floor,
                             std::min(mass[static_cast<std::size_t>(p)], mass[static_cast<std::size_t>(p) + 1]));
        REQUIRE(mass[static_cast<std::size_t>(choice.fold.source)] == floor);
        REQUIRE(std::abs(choice.fold.source - choice.fold.target) == 1);

        const AxisFold want = oracle_choice(mass);
        REQUIRE(choice.fold.source == want.source);
        REQUIRE(choice.fold.target == want.target);
        REQUIRE(choice.scores.size() == static_cast<std::size_t>(n - 1));
    }
}

TEST_CASE("a uniform template reproduces the saliency-free fallback plan") {
    SaliencyTemplate t = column_template({0.0, 0.0, 0.0, 0.0});
    std::fill(t.values.begin(), t.values.end(), 1.0);
    const FoldingPlan planned = plan_folding(t, 4);
    const FoldingPlan fixed = fixed_plan(4);
    REQUIRE(planned.columns.source == fixed.columns.source);
    REQUIRE(planned.columns.target == fixed.columns.target);
    REQUIRE(planned.rows.source == fixed.rows.source);
    REQUIRE(planned.rows.target == fixed.rows.target);
    REQUIRE(fixed.columns.source == 0);
    REQUIRE(fixed.columns.target == 1);
    REQUIRE(fixed.rows.source == 0);
    REQUIRE(fixed.rows.target == 1);
    REQUIRE_FALSE(planned.degenerate);
    REQUIRE_FALSE(fixed.degenerate);
}

TEST_CASE("an all-zero template is flagged degenerate but still folds pair 0,1") {
    const FoldingPlan plan = plan_folding(column_template({0.0, 0.0, 0.0, 0.0}), 4);
    REQUIRE(plan.degenerate);
    REQUIRE(plan.columns.source == 0);
    REQUIRE(plan.columns.target == 1);
    REQUIRE(plan.rows.source == 0);
    REQUIRE(plan.rows.target == 1);
}

TEST_CASE("grids narrower than two strips are refused") {
    REQUIRE_THROWS_AS(plan_folding(column_template({1.0, 2.0}), 1), Error);
    REQUIRE_THROWS_AS(fixed_plan(1), Error);
}

TEST_CASE("folding a 16x16 image traces through by hand") {
    const GrayImage img = testing::random_image(16, 16, 123);
    FoldingPlan plan;
    plan.grid = 4;
    plan.columns = {3, 2};
    plan.rows = {3, 2};
    const GrayImage folded = apply_folding(img, plan, SuperposeOp::mean);
    REQUIRE(folded.width == 12);
    REQUIRE(folded.height == 12);
    for (int y = 0; y < 12; ++y) {
        for (int x = 0; x < 12; ++x) {
            const double got = folded.at(y, x);
            double col_here = (x < 8) ? img.at(y, x) : mean2(img.at(y, x), img.at(y, x + 4));
            double col_below = (y < 8) ? 0.0
                                       : ((x < 8) ? img.at(y + 4, x)
                                                  : mean2(img.at(y + 4, x), img.at(y + 4, x + 4)));
            const double want = (y < 8) ? col_here : mean2(col_here, col_below);
            REQUIRE(got == want);
        }
    }
}

TEST_CASE("the folded canvas keeps nine sixteenths of the area") {
    const GrayImage img = testing::random_image(64, 64, 7);
    const GrayImage folded = apply_folding(img, fixed_plan(4), SuperposeOp::mean);
    REQUIRE(folded.width == 48);
    REQUIRE(folded.height == 48);
    REQUIRE(folded.width * folded.height * 16 == img.width * img.height * 9);
}

TEST_CASE("uneven strip widths are bridged by resampling") {
    const GrayImage img = testing::random_image(17, 16, 55);
    FoldingPlan plan;
    plan.grid = 4;
    plan.columns = {0, 1}; // 5px strip folded onto a 4px strip
    plan.rows = {0, 1};
    const GrayImage folded = apply_folding(img, plan, SuperposeOp::max);
    REQUIRE(folded.width == 12);
    REQUIRE(folded.height == 12);
    // rows below and columns right of the target strips are untouched
    for (int y = 8; y < 16; ++y)
        for (int x = 9; x < 17; ++x) REQUIRE(folded.at(y - 4, x - 5) == img.at(y, x));

    FoldingPlan wide;
    wide.grid = 4;
    wide.columns = {1, 0}; // 4px strip stretched onto the 5px strip
    wide.rows = {1, 0};
    const GrayImage folded2 = apply_folding(img, wide, SuperposeOp::mean);
    REQUIRE(folded2.width == 13);
    REQUIRE(folded2.height == 12);
}

TEST_CASE("each superpose op combines as documented") {
    REQUIRE(detail::superpose(10.0, 20.0, SuperposeOp::mean) == 15.0);
    REQUIRE(detail::superpose(10.0, 20.0, SuperposeOp::max) == 20.0);
    REQUIRE(detail::superpose(10.0, 20.0, SuperposeOp::sum_clipped) == 30.0);
    REQUIRE(detail::superpose(200.0, 100.0, SuperposeOp::sum_clipped) == 255.0);
    REQUIRE(detail::superpose(-3.0, 1.0, SuperposeOp::sum_clipped) == 0.0);
}

TEST_CASE("superpose names round-trip and unknown names are refused") {
    for (auto op : {SuperposeOp::mean, SuperposeOp::max, SuperposeOp::sum_clipped})
        REQUIRE(parse_superpose(superpose_name(op)) == op);
    REQUIRE_THROWS_AS(parse_superpose("median"), Error);
}

TEST_CASE("mean and max folds stay inside the original intensity range") {
    const GrayImage img = testing::random_image(32, 32, 31);
    const auto [lo_it, hi_it] = std::minmax_element(img.data.begin(), img.data.end());
    for (auto op : {SuperposeOp::mean, SuperposeOp::max}) {
        const GrayImage folded = apply_folding(img, fixed_plan(4), op);
        for (double v : folded.data) {
            REQUIRE(v >= *lo_it);
            REQUIRE(v <= *hi_it);
        }
    }
    const GrayImage clipped = apply_folding(img, fixed_plan(4), SuperposeOp::sum_clipped);
    for (double v : clipped.data) {
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 255.0);
    }
}

TEST_CASE("plans round-trip through their text format") {
    TempDir tmp;
    FoldingPlan plan;
    plan.grid = 4;
    plan.columns = {2, 1};
    plan.rows = {0, 1};
    plan.column_scores = {1.5, 0.25, 3.0};
    plan.row_scores = {0.1, 0.2, 0.3};
    plan.degenerate = true;
    const std::string path = tmp.file("plan.txt");
    save_plan(plan, path);
    const FoldingPlan back = load_plan(path);
    REQUIRE(back.grid == plan.grid);
    REQUIRE(back.columns.source == plan.columns.source);
    REQUIRE(back.columns.target == plan.columns.target);
    REQUIRE(back.rows.source == plan.rows.source);
    REQUIRE(back.rows.target == plan.rows.target);
    REQUIRE(back.column_scores == plan.column_scores);
    REQUIRE(back.row_scores == plan.row_scores);
    REQUIRE(back.degenerate == plan.degenerate);
}

TEST_CASE("corrupt plan files are refused") {
    TempDir tmp;
    auto expect = [&](const std::string& content) {
        const std::string path = tmp.file("p.txt");
        testing::write_text(path, content);
        try {
            load_plan(path);
            FAIL("expected a throw");
        } catch (const Error& e) {
            REQUIRE(e.code() == Errc::corrupt_plan_file);
        }
    };
    const std::string good = "salfold-plan 1\ngrid 4\ncolumns 0 1\nrows 0 1\ndegenerate 0\n"
                             "column_scores 1 1 1\nrow_scores 1 1 1\n";
    REQUIRE(load_plan([&] {
                const std::string p = tmp.file("ok.txt");
                testing::write_text(p, good);
                return p;
            }()).grid == 4);
    expect("wrong-magic 1\ngrid 4\ncolumns 0 1\nrows 0 1\ndegenerate 0\ncolumn_scores 1 1 1\nrow_scores 1 1 1\n");
    expect("salfold-plan 2\ngrid 4\ncolumns 0 1\nrows 0 1\ndegenerate 0\ncolumn_scores 1 1 1\nrow_scores 1 1 1\n");
    expect("salfold-plan 1\ngrid 1\ncolumns 0 1\nrows 0 1\ndegenerate 0\ncolumn_scores\nrow_scores\n");
    expect("salfold-plan 1\ngrid 4\ncolumns 0 2\nrows 0 1\ndegenerate 0\ncolumn_scores 1 1 1\nrow_scores 1 1 1\n");
    expect("salfold-plan 1\ngrid 4\ncolumns 0 1\nrows 0 1\ndegenerate 0\ncolumn_scores 1 1\nrow_scores 1\n");
    try {
        load_plan(tmp.file("absent.txt"));
        FAIL("expected a throw");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::unreadable_file);
    }
}

TEST_CASE("plans that do not describe an adjacent pair are refused at apply time") {
    const GrayImage img = testing::random_image(16, 16, 2);
    FoldingPlan plan = fixed_plan(4);
    plan.columns = {0, 2};
    try {
        apply_folding(img, plan);
        FAIL("expected a throw");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::plan_shape_mismatch);
    }
    plan = fixed_plan(4);
    plan.rows = {3, 4}; // target beyond the grid
    REQUIRE_THROWS_AS(apply_folding(img, plan), Error);
}

TEST_CASE("images too small for the grid are refused") {
    const GrayImage img(3, 3, 1.0);
    try {
        apply_folding(img, fixed_plan(4));
        FAIL("expected a throw");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::grid_too_fine);
    }
}
