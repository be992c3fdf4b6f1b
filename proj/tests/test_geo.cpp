#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "taskforge/geo.hpp"
#include "taskforge/rng.hpp"

using namespace taskforge;

namespace {

bool point_inside(const Shape& s, const Pose2& p, double sc, Vec2 q) {
    if (const auto* b = std::get_if<Box>(&s)) {
        return std::fabs(q.x - p.x) <= b->half_w * sc &&
               std::fabs(q.y - p.y) <= b->half_h * sc;
    }
    return norm(q - p.position()) <= std::get<Disk>(s).radius * sc;
}

// exact distance from a point to the shape's point set (0 inside)
double point_to_shape(const Shape& s, const Pose2& p, double sc, Vec2 q) {
    if (const auto* b = std::get_if<Box>(&s)) {
        const double dx = std::max(std::fabs(q.x - p.x) - b->half_w * sc, 0.0);
        const double dy = std::max(std::fabs(q.y - p.y) - b->half_h * sc, 0.0);
        return std::hypot(dx, dy);
    }
    return std::max(norm(q - p.position()) - std::get<Disk>(s).radius * sc, 0.0);
}

std::vector<Vec2> boundary_samples(const Shape& s, const Pose2& p, double sc, int n) {
    std::vector<Vec2> out;
    out.reserve(n);
    if (const auto* b = std::get_if<Box>(&s)) {
        const double hw = b->half_w * sc, hh = b->half_h * sc;
        for (int i = 0; i < n; ++i) {
            const double t = 4.0 * i / n;
            Vec2 q;
            if (t < 1.0) q = {p.x - hw + 2 * hw * t, p.y - hh};
            else if (t < 2.0) q = {p.x + hw, p.y - hh + 2 * hh * (t - 1.0)};
            else if (t < 3.0) q = {p.x + hw - 2 * hw * (t - 2.0), p.y + hh};
            else q = {p.x - hw, p.y + hh - 2 * hh * (t - 3.0)};
            out.push_back(q);
        }
    } else {
        const double r = std::get<Disk>(s).radius * sc;
        for (int i = 0; i < n; ++i) {
            const double a = 2.0 * kPi * i / n;
            out.push_back({p.x + r * std::cos(a), p.y + r * std::sin(a)});
        }
    }
    return out;
}

// millimetre lattice over the joint bounding box: does any probe point
// land inside both shapes?
bool sampled_collision(const Shape& sa, const Pose2& pa, double sca,
                       const Shape& sb, const Pose2& pb, double scb) {
    const Rect fa = footprint(sa, pa, sca);
    const Rect fb = footprint(sb, pb, scb);
    const double lo_x = std::max(fa.min_x, fb.min_x), hi_x = std::min(fa.max_x, fb.max_x);
    const double lo_y = std::max(fa.min_y, fb.min_y), hi_y = std::min(fa.max_y, fb.max_y);
    if (lo_x > hi_x || lo_y > hi_y) return false;
    const double res = 0.001;
    for (double x = lo_x; x <= hi_x + res / 2; x += res) {
        for (double y = lo_y; y <= hi_y + res / 2; y += res) {
            if (point_inside(sa, pa, sca, {x, y}) && point_inside(sb, pb, scb, {x, y}))
                return true;
        }
    }
    return false;
}

// smallest gap between the two point sets, from boundary samples of one
// against the exact distance field of the other
double sampled_gap(const Shape& sa, const Pose2& pa, double sca, const Shape& sb,
                   const Pose2& pb, double scb) {
    double best = 1e18;
    for (const Vec2& q : boundary_samples(sa, pa, sca, 4000))
        best = std::min(best, point_to_shape(sb, pb, scb, q));
    for (const Vec2& q : boundary_samples(sb, pb, scb, 4000))
        best = std::min(best, point_to_shape(sa, pa, sca, q));
    return best;
}

Shape random_shape(Rng& rng) {
    if (rng.uniform01() < 0.5) return Box{rng.uniform(0.05, 0.6), rng.uniform(0.05, 0.6)};
    return Disk{rng.uniform(0.05, 0.6)};
}

} // namespace

TEST_CASE("wrap_angle lands in (-pi, pi]") {
    CHECK(wrap_angle(0.0) == doctest::Approx(0.0));
    CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(3 * kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(2 * kPi) == doctest::Approx(0.0));
    Rng rng(7);
    for (int i = 0; i < 500; ++i) {
        const double a = rng.uniform(-50.0, 50.0);
        const double w = wrap_angle(a);
        CHECK(w > -kPi - 1e-12);
        CHECK(w <= kPi + 1e-12);
        // wrapped angle differs from the input by a whole number of turns
        const double k = (a - w) / (2 * kPi);
        CHECK(std::fabs(k - std::round(k)) < 1e-9);
    }
}

TEST_CASE("extents and bounding radius") {
    CHECK(extent_x(Box{0.3, 0.2}) == doctest::Approx(0.3));
    CHECK(extent_y(Box{0.3, 0.2}) == doctest::Approx(0.2));
    CHECK(extent_x(Disk{0.4}) == doctest::Approx(0.4));
    CHECK(extent_y(Disk{0.4}) == doctest::Approx(0.4));
    CHECK(bounding_radius(Box{0.3, 0.4}) == doctest::Approx(0.5));
    CHECK(bounding_radius(Disk{0.25}) == doctest::Approx(0.25));
}

TEST_CASE("footprint covers the posed scaled shape") {
    const Rect f = footprint(Box{0.5, 0.25}, {2.0, 3.0, 0.0}, 2.0);
    CHECK(f.min_x == doctest::Approx(1.0));
    CHECK(f.max_x == doctest::Approx(3.0));
    CHECK(f.min_y == doctest::Approx(2.5));
    CHECK(f.max_y == doctest::Approx(3.5));
    const Rect d = footprint(Disk{0.3}, {1.0, 1.0, 0.7}, 1.0);
    CHECK(d.min_x == doctest::Approx(0.7));
    CHECK(d.max_y == doctest::Approx(1.3));
    // quarter turn swaps a box's projected extents
    const Rect q = footprint(Box{0.4, 0.1}, {0.0, 0.0, kPi / 2}, 1.0);
    CHECK(q.width() == doctest::Approx(0.2));
    CHECK(q.height() == doctest::Approx(0.8));
}

TEST_CASE("signed_overlap separated unit disks") {
    // two unit disks three metres apart leave a one metre gap
    const double v = signed_overlap(Disk{1.0}, {0, 0, 0}, 1.0, Disk{1.0}, {3, 0, 0}, 1.0);
    CHECK(v == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("signed_overlap coincident unit disks") {
    const double v = signed_overlap(Disk{1.0}, {0, 0, 0}, 1.0, Disk{1.0}, {0, 0, 0}, 1.0);
    CHECK(v == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("signed_overlap box against offset disk") {
    // box edge at x = 0.5, disk spans [0.3, 1.3]: 0.2 of penetration
    const double v =
        signed_overlap(Box{0.5, 0.5}, {0, 0, 0}, 1.0, Disk{0.5}, {0.8, 0, 0}, 1.0);
    CHECK(v == doctest::Approx(0.2).epsilon(1e-9));
}

TEST_CASE("signed_overlap respects uniform scale") {
    const double base =
        signed_overlap(Box{0.5, 0.5}, {0, 0, 0}, 1.0, Disk{0.5}, {0.8, 0, 0}, 1.0);
    const double scaled =
        signed_overlap(Box{0.5, 0.5}, {0, 0, 0}, 2.0, Disk{0.5}, {1.6, 0, 0}, 2.0);
    CHECK(scaled == doctest::Approx(2.0 * base).epsilon(1e-9));
}

TEST_CASE("signed_overlap is symmetric") {
    Rng rng(11);
    for (int i = 0; i < 300; ++i) {
        const Shape a = random_shape(rng);
        const Shape b = random_shape(rng);
        const Pose2 pa{rng.uniform(0, 4), rng.uniform(0, 4), 0};
        const Pose2 pb{rng.uniform(0, 4), rng.uniform(0, 4), 0};
        const double sa = rng.uniform(0.5, 2.0);
        const double sb = rng.uniform(0.5, 2.0);
        const double ab = signed_overlap(a, pa, sa, b, pb, sb);
        const double ba = signed_overlap(b, pb, sb, a, pa, sa);
        CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
    }
}

TEST_CASE("signed_overlap sign agrees with a millimetre probe lattice") {
    Rng rng(23);
    int checked = 0;
    while (checked < 60) {
        const Shape a = random_shape(rng);
        const Shape b = random_shape(rng);
        const Pose2 pa{rng.uniform(1, 3), rng.uniform(1, 3), 0};
        const Pose2 pb{rng.uniform(1, 3), rng.uniform(1, 3), 0};
        const double v = signed_overlap(a, pa, 1.0, b, pb, 1.0);
        if (std::fabs(v) < 0.003) continue; // resolution guard
        ++checked;
        CHECK(sampled_collision(a, pa, 1.0, b, pb, 1.0) == (v > 0));
    }
}

TEST_CASE("separation magnitude matches the sampled gap") {
    Rng rng(31);
    int checked = 0;
    while (checked < 40) {
        const Shape a = random_shape(rng);
        const Shape b = random_shape(rng);
        const Pose2 pa{rng.uniform(0, 2), rng.uniform(0, 2), 0};
        const Pose2 pb{rng.uniform(2.5, 5), rng.uniform(2.5, 5), 0};
        const double v = signed_overlap(a, pa, 1.0, b, pb, 1.0);
        if (v >= -0.01) continue;
        ++checked;
        // boundary sampling is good to a couple of millimetres
        CHECK(std::fabs(-v - sampled_gap(a, pa, 1.0, b, pb, 1.0)) < 0.002);
    }
}

TEST_CASE("rect_signed_distance sign convention") {
    const Rect r{0, 0, 2, 2};
    CHECK(rect_signed_distance(r, {1, 1}) == doctest::Approx(-1.0));
    CHECK(rect_signed_distance(r, {0.2, 1}) == doctest::Approx(-0.2));
    CHECK(rect_signed_distance(r, {3, 1}) == doctest::Approx(1.0));
    CHECK(rect_signed_distance(r, {1, 0}) == doctest::Approx(0.0));
    CHECK(rect_signed_distance(r, {3, 3}) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("segment_intersects hit and miss") {
    const Shape wall = Box{0.1, 1.0};
    const Pose2 at{2.0, 1.0, 0};
    CHECK(segment_intersects(wall, at, 1.0, {0, 1}, {4, 1}, 0.0));
    CHECK_FALSE(segment_intersects(wall, at, 1.0, {0, 3.5}, {4, 3.5}, 0.0));
    // margin widens the hit band
    CHECK(segment_intersects(wall, at, 1.0, {0, 2.2}, {4, 2.2}, 0.3));
    // disk case: tangent grazing counts, clear miss does not
    CHECK(segment_intersects(Disk{0.5}, {1, 1, 0}, 1.0, {0, 0.5}, {2, 0.5}, 0.0));
    CHECK_FALSE(segment_intersects(Disk{0.5}, {1, 1, 0}, 1.0, {0, 0.3}, {2, 0.3}, 0.0));
}
