#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "salfold/error.hpp"
#include "salfold/image.hpp"
#include "salfold/saliency.hpp"
#include "support/helpers.hpp"
#include "support/reference_saliency.hpp"

using namespace salfold;
using testing::TempDir;

namespace {

SaliencyParams small_params() {
    SaliencyParams p;
    p.patch_size = 5;
    p.k_nearest = 16;
    p.position_weight = 3.0;
    p.scales = {1.0, 0.5};
    p.working_resolution = 16;
    return p;
}

SaliencyMap constant_map(int w, int h, double v) {
    SaliencyMap m;
    m.width = w;
    m.height = h;
    m.values.assign(static_cast<std::size_t>(w) * h, v);
    return m;
}

} // namespace

TEST_CASE("the pruned single-scale score equals the all-pairs reference exactly") {
    const SaliencyParams p = small_params();
    for (std::uint64_t seed : {11ull, 12ull, 13ull}) {
        const GrayImage img = testing::random_image(16, 16, seed);
        const SaliencyMap fast = compute_saliency_single_scale(img, p, 1);
        const SaliencyMap naive = reference::saliency_single_scale(img, p);
        REQUIRE(fast.values == naive.values);
    }
}

TEST_CASE("the k clamp for tiny images matches the reference") {
    SaliencyParams p = small_params();
    p.k_nearest = 64; // far more neighbors than a 4x4 image has pixels
    const GrayImage img = testing::random_image(4, 4, 3);
    const SaliencyMap fast = compute_saliency_single_scale(img, p, 1);
    REQUIRE(fast.values == reference::saliency_single_scale(img, p).values);
}

TEST_CASE("scores do not depend on the worker count") {
    const GrayImage img = testing::random_image(16, 16, 21);
    const SaliencyParams p = small_params();
    const SaliencyMap one = compute_saliency_single_scale(img, p, 1);
    for (int threads : {2, 3, 8}) {
        const SaliencyMap multi = compute_saliency_single_scale(img, p, threads);
        REQUIRE(multi.values == one.values);
    }
    const SaliencyMap full_one = compute_saliency(img, p, 1);
    const SaliencyMap full_four = compute_saliency(img, p, 4);
    REQUIRE(full_four.values == full_one.values);
}

TEST_CASE("a constant image is zero-salient at every stage") {
    const GrayImage img(16, 16, 99.0);
    const SaliencyParams p = small_params();
    const SaliencyMap single = compute_saliency_single_scale(img, p, 1);
    for (double v : single.values) REQUIRE(v == 0.0);
    const SaliencyMap full = compute_saliency(img, p, 1);
    REQUIRE(full.width == p.working_resolution);
    REQUIRE(full.height == p.working_resolution);
    for (double v : full.values) REQUIRE(v == 0.0);
}

TEST_CASE("the full map is rescaled onto [0, 1] with both endpoints reached") {
    const GrayImage img = testing::random_image(24, 24, 8);
    const SaliencyMap map = compute_saliency(img, small_params(), 2);
    double lo = map.values[0], hi = map.values[0];
    for (double v : map.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    REQUIRE(lo == 0.0);
    REQUIRE(hi == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("adding a constant intensity offset leaves the map essentially unchanged") {
    GrayImage img(24, 24, 0.0);
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x)
            img.at(y, x) = 90.0 + 60.0 * std::sin(0.5 * x) * std::cos(0.3 * y);
    GrayImage shifted = img;
    for (auto& v : shifted.data) v += 40.0;

    SaliencyParams p = small_params();
    p.k_nearest = 8;
    const SaliencyMap a = compute_saliency(img, p, 1);
    const SaliencyMap b = compute_saliency(shifted, p, 1);
    for (std::size_t i = 0; i < a.values.size(); ++i)
        REQUIRE(b.values[i] == Catch::Approx(a.values[i]).margin(1e-9));
}

TEST_CASE("a lone bright square is where the saliency lands") {
    GrayImage img(32, 32, 30.0);
    for (int y = 4; y <= 13; ++y)
        for (int x = 4; x <= 13; ++x) img.at(y, x) = 220.0;

    SaliencyParams p;
    p.patch_size = 5;
    p.k_nearest = 16;
    p.scales = {1.0};
    p.working_resolution = 32;

    const SaliencyMap single = compute_saliency_single_scale(img, p, 2);
    // windows that never touch the square see >= K identical flat patches
    // elsewhere, so they score exactly zero; the mass sits on the square rim
    REQUIRE(single.at(25, 25) == 0.0);
    REQUIRE(single.at(8, 8) == 0.0); // deep interior is equally self-similar
    std::size_t arg = 0;
    for (std::size_t i = 1; i < single.values.size(); ++i)
        if (single.values[i] > single.values[arg]) arg = i;
    const int ax = static_cast<int>(arg % 32), ay = static_cast<int>(arg / 32);
    REQUIRE((ax >= 2 && ax <= 15));
    REQUIRE((ay >= 2 && ay <= 15));

    const SaliencyMap full = compute_saliency(img, p, 2);
    std::size_t farg = 0;
    for (std::size_t i = 1; i < full.values.size(); ++i)
        if (full.values[i] > full.values[farg]) farg = i;
    REQUIRE((static_cast<int>(farg % 32) >= 2 && static_cast<int>(farg % 32) <= 15));
    REQUIRE((static_cast<int>(farg / 32) >= 2 && static_cast<int>(farg / 32) <= 15));
}

TEST_CASE("reordering two scales changes nothing at all") {
    const GrayImage img = testing::random_image(20, 20, 40);
    SaliencyParams a = small_params();
    a.scales = {1.0, 0.5};
    SaliencyParams b = small_params();
    b.scales = {0.5, 1.0};
    REQUIRE(compute_saliency(img, a, 1).values == compute_saliency(img, b, 1).values);
}

TEST_CASE("reordering three scales only moves the result by rounding noise") {
    const GrayImage img = testing::random_image(20, 20, 41);
    SaliencyParams a = small_params();
    a.scales = {1.0, 0.8, 0.5};
    SaliencyParams b = small_params();
    b.scales = {0.5, 1.0, 0.8};
    const SaliencyMap ma = compute_saliency(img, a, 1);
    const SaliencyMap mb = compute_saliency(img, b, 1);
    for (std::size_t i = 0; i < ma.values.size(); ++i)
        REQUIRE(mb.values[i] == Catch::Approx(ma.values[i]).margin(1e-9));
}

TEST_CASE("the squared distance transform agrees with brute force") {
    const int w = 20, h = 14;
    Rng rng(77);
    std::vector<std::pair<int, int>> seeds;
    std::vector<double> cost(static_cast<std::size_t>(w) * h, 1e20);
    for (int s = 0; s < 9; ++s) {
        const int x = static_cast<int>(rng.below(w));
        const int y = static_cast<int>(rng.below(h));
        seeds.emplace_back(x, y);
        cost[static_cast<std::size_t>(y) * w + x] = 0.0;
    }
    const std::vector<double> sq = detail::squared_distance_transform(cost, w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double best = 1e30;
            for (const auto& [sx, sy] : seeds) {
                const double d = static_cast<double>(x - sx) * (x - sx) +
                                 static_cast<double>(y - sy) * (y - sy);
                best = std::min(best, d);
            }
            REQUIRE(sq[static_cast<std::size_t>(y) * w + x] == best);
        }
    }
}

TEST_CASE("templates average class means, not raw images") {
    // three maps of class 0 at value 0 against one map of class 1 at value 1:
    // a pooled mean would give 0.25, per-class weighting gives 0.5
    std::vector<SaliencyMap> maps = {constant_map(6, 6, 0.0), constant_map(6, 6, 0.0),
                                     constant_map(6, 6, 0.0), constant_map(6, 6, 1.0)};
    const SaliencyTemplate tmpl = build_template(maps, {0, 0, 0, 1}, 2);
    REQUIRE(tmpl.width == 6);
    REQUIRE(tmpl.height == 6);
    REQUIRE(tmpl.image_count == 4);
    REQUIRE(tmpl.class_count == 2);
    for (double v : tmpl.values) REQUIRE(v == 0.5);
}

TEST_CASE("classes absent from the training set do not dilute the template") {
    std::vector<SaliencyMap> maps = {constant_map(4, 4, 0.2), constant_map(4, 4, 0.6)};
    const SaliencyTemplate tmpl = build_template(maps, {0, 2}, 3);
    REQUIRE(tmpl.class_count == 2);
    for (double v : tmpl.values) REQUIRE(v == Catch::Approx(0.4).margin(1e-15));
}

TEST_CASE("template construction rejects inconsistent input") {
    std::vector<SaliencyMap> maps = {constant_map(4, 4, 0.2), constant_map(5, 4, 0.6)};
    REQUIRE_THROWS_AS(build_template(maps, {0, 1}, 2), Error);
    maps.pop_back();
    REQUIRE_THROWS_AS(build_template(maps, {0, 1}, 2), Error); // count mismatch
    REQUIRE_THROWS_AS(build_template(maps, {5}, 2), Error);    // id out of range
    REQUIRE_THROWS_AS(build_template({}, {}, 2), Error);       // nothing to average
}

TEST_CASE("templates round-trip through their text format") {
    TempDir tmp;
    Rng rng(5);
    SaliencyTemplate tmpl;
    tmpl.width = 7;
    tmpl.height = 5;
    tmpl.image_count = 12;
    tmpl.class_count = 3;
    for (int i = 0; i < 35; ++i) tmpl.values.push_back(rng.uniform());
    const std::string path = tmp.file("template.txt");
    save_template(tmpl, path);
    const SaliencyTemplate back = load_template(path);
    REQUIRE(back.width == tmpl.width);
    REQUIRE(back.height == tmpl.height);
    REQUIRE(back.image_count == tmpl.image_count);
    REQUIRE(back.class_count == tmpl.class_count);
    REQUIRE(back.values == tmpl.values);
}

TEST_CASE("corrupt template files are refused") {
    TempDir tmp;
    auto expect = [&](const std::string& content) {
        const std::string path = tmp.file("t.txt");
        testing::write_text(path, content);
        try {
            load_template(path);
            FAIL("expected a throw");
        } catch (const Error& e) {
            REQUIRE(e.code() == Errc::corrupt_template_file);
        }
    };
    expect("wrong-magic 2 2 1 1\n0 0\n0 0\n");
    expect("salfold-template 0 2 1 1\n");
    expect("salfold-template 2 2 0 1\n0 0\n0 0\n");  // zero provenance images
    expect("salfold-template 2 2 4 0\n0 0\n0 0\n");  // zero provenance classes
    expect("salfold-template 2 2 1 1\n0 0\n0\n");    // truncated
    expect("salfold-template 2 2 1 1\n0 0\n0 0 0\n"); // trailing
    expect("salfold-template 2 2 1 1\n0 nan\n0 0\n");
    try {
        load_template(tmp.file("absent.txt"));
        FAIL("expected a throw");
    } catch (const Error& e) {
        REQUIRE(e.code() == Errc::unreadable_file);
    }
}

TEST_CASE("bad saliency parameters are refused") {
    const GrayImage img = testing::random_image(16, 16, 1);
    SaliencyParams p = small_params();
    p.patch_size = 4;
    REQUIRE_THROWS_AS(compute_saliency_single_scale(img, p, 1), Error);
    p = small_params();
    p.k_nearest = 0;
    REQUIRE_THROWS_AS(compute_saliency_single_scale(img, p, 1), Error);
    p = small_params();
    p.working_resolution = 4;
    REQUIRE_THROWS_AS(compute_saliency(img, p, 1), Error);
    p = small_params();
    p.scales = {};
    REQUIRE_THROWS_AS(compute_saliency(img, p, 1), Error);
    p = small_params();
    p.scales = {1.5};
    REQUIRE_THROWS_AS(compute_saliency(img, p, 1), Error);
    p = small_params();
    p.attended_threshold = 0.0;
    REQUIRE_THROWS_AS(compute_saliency(img, p, 1), Error);
    p = small_params();
    p.attended_threshold = 1.25;
    REQUIRE_THROWS_AS(compute_saliency(img, p, 1), Error);
}
