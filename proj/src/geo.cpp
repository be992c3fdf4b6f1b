#include "taskforge/geo.hpp"

#include <algorithm>

namespace taskforge {

double wrap_angle(double a) {
    while (a > kPi) a -= 2.0 * kPi;
    while (a <= -kPi) a += 2.0 * kPi;
    return a;
}

double extent_x(const Shape& s) {
    if (const auto* b = std::get_if<Box>(&s)) return b->half_w;
    return std::get<Disk>(s).radius;
}

double extent_y(const Shape& s) {
    if (const auto* b = std::get_if<Box>(&s)) return b->half_h;
    return std::get<Disk>(s).radius;
}

double bounding_radius(const Shape& s) {
    if (const auto* b = std::get_if<Box>(&s)) return std::hypot(b->half_w, b->half_h);
    return std::get<Disk>(s).radius;
}

Rect footprint(const Shape& s, const Pose2& pose, double scale) {
    double hx, hy;
    if (const auto* b = std::get_if<Box>(&s)) {
        const double c = std::abs(std::cos(pose.theta));
        const double n = std::abs(std::sin(pose.theta));
        hx = scale * (b->half_w * c + b->half_h * n);
        hy = scale * (b->half_w * n + b->half_h * c);
    } else {
        hx = hy = scale * std::get<Disk>(s).radius;
    }
    return {pose.x - hx, pose.y - hy, pose.x + hx, pose.y + hy};
}

double rect_signed_distance(const Rect& r, Vec2 p) {
    const double cx = (r.min_x + r.max_x) / 2.0;
    const double cy = (r.min_y + r.max_y) / 2.0;
    const double hx = r.width() / 2.0;
    const double hy = r.height() / 2.0;
    const double dx = std::abs(p.x - cx) - hx;
    const double dy = std::abs(p.y - cy) - hy;
    const double ox = std::max(dx, 0.0);
    const double oy = std::max(dy, 0.0);
    const double outside = std::hypot(ox, oy);
    const double inside = std::min(std::max(dx, dy), 0.0);
    return outside + inside;
}

namespace {

bool is_disk(const Shape& s) { return std::holds_alternative<Disk>(s); }

double disk_disk(const Disk& a, Vec2 ca, double sa, const Disk& b, Vec2 cb, double sb) {
    return sa * a.radius + sb * b.radius - norm(ca - cb);
}

double rect_rect(const Rect& a, const Rect& b) {
    // signed AABB overlap: min axis penetration when overlapping,
    // minus euclidean gap when separated
    const double ox = std::min(a.max_x, b.max_x) - std::max(a.min_x, b.min_x);
    const double oy = std::min(a.max_y, b.max_y) - std::max(a.min_y, b.min_y);
    if (ox >= 0.0 && oy >= 0.0) return std::min(ox, oy);
    const double gx = std::max(-ox, 0.0);
    const double gy = std::max(-oy, 0.0);
    return -std::hypot(gx, gy);
}

double rect_disk(const Rect& r, Vec2 c, double radius) {
    return radius - rect_signed_distance(r, c);
}

} // namespace

double signed_overlap(const Shape& sa, const Pose2& pa, double scale_a,
                      const Shape& sb, const Pose2& pb, double scale_b) {
    const bool da = is_disk(sa);
    const bool db = is_disk(sb);
    if (da && db) {
        return disk_disk(std::get<Disk>(sa), pa.position(), scale_a,
                         std::get<Disk>(sb), pb.position(), scale_b);
    }
    if (!da && !db) {
        return rect_rect(footprint(sa, pa, scale_a), footprint(sb, pb, scale_b));
    }
    // canonical order (box, disk) keeps the result exactly symmetric
    if (da) {
        return rect_disk(footprint(sb, pb, scale_b), pa.position(),
                         scale_a * std::get<Disk>(sa).radius);
    }
    return rect_disk(footprint(sa, pa, scale_a), pb.position(),
                     scale_b * std::get<Disk>(sb).radius);
}

bool segment_intersects(const Shape& s, const Pose2& pose, double scale,
                        Vec2 a, Vec2 b, double margin) {
    // sample-free exact tests against the axis-aligned footprint
    if (is_disk(s)) {
        const double r = scale * std::get<Disk>(s).radius + margin;
        const Vec2 c = pose.position();
        const Vec2 ab = b - a;
        const double len2 = dot(ab, ab);
        double t = len2 > 0.0 ? dot(c - a, ab) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        return norm(c - (a + t * ab)) <= r;
    }
    Rect r = footprint(s, pose, scale);
    r.min_x -= margin;
    r.min_y -= margin;
    r.max_x += margin;
    r.max_y += margin;
    // slab test for segment vs AABB
    double t0 = 0.0, t1 = 1.0;
    const double d[2] = {b.x - a.x, b.y - a.y};
    const double p0[2] = {a.x, a.y};
    const double lo[2] = {r.min_x, r.min_y};
    const double hi[2] = {r.max_x, r.max_y};
    for (int i = 0; i < 2; ++i) {
        if (std::abs(d[i]) < 1e-15) {
            if (p0[i] < lo[i] || p0[i] > hi[i]) return false;
        } else {
            double ta = (lo[i] - p0[i]) / d[i];
            double tb = (hi[i] - p0[i]) / d[i];
            if (ta > tb) std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
            if (t0 > t1) return false;
        }
    }
    return true;
}

} // namespace taskforge
