#pragma once

#include <cmath>
#include <variant>

namespace taskforge {

inline constexpr double kPi = 3.14159265358979323846;

// normalize angle to (-pi, pi]
double wrap_angle(double a);

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }

struct Pose2 {
    double x = 0.0;
    double y = 0.0;
    double theta = 0.0; // kept in (-pi, pi]

    Vec2 position() const { return {x, y}; }
};

struct Rect {
    double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;

    bool contains(Vec2 p) const {
        return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
    }
    double width() const { return max_x - min_x; }
    double height() const { return max_y - min_y; }
};

struct Box {
    double half_w = 0.0;
    double half_h = 0.0;
};

struct Disk {
    double radius = 0.0;
};

using Shape = std::variant<Box, Disk>;

// half extent along x / y for the unrotated shape
double extent_x(const Shape& s);
double extent_y(const Shape& s);
double bounding_radius(const Shape& s);

// Axis-aligned footprint of a shape scaled by `scale` and posed at
// `pose`. Rotated boxes contribute their axis-aligned projection
// (hw|cos t| + hh|sin t|, hw|sin t| + hh|cos t|); all generated
// content uses theta = 0 where this is exact.
Rect footprint(const Shape& s, const Pose2& pose, double scale);

// Signed penetration depth between two posed, scaled shapes.
// Positive: overlap depth. Negative: minus the separation distance.
// Symmetric by construction.
double signed_overlap(const Shape& sa, const Pose2& pa, double scale_a,
                      const Shape& sb, const Pose2& pb, double scale_b);

// distance from point to the boundary of an axis-aligned rect,
// negative inside
double rect_signed_distance(const Rect& r, Vec2 p);

// true if the segment [a, b] passes within `margin` of the shape
bool segment_intersects(const Shape& s, const Pose2& pose, double scale,
                        Vec2 a, Vec2 b, double margin);

} // namespace taskforge
