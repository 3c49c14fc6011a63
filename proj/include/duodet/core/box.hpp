#pragma once

#include <algorithm>
#include <optional>

namespace duodet {

/// Axis-aligned box in pixel coordinates (origin top-left), corner form.
/// Ground truth carries no score.
struct BoundingBox {
    double x_min = 0;
    double y_min = 0;
    double x_max = 0;
    double y_max = 0;
    int class_id = 0;
    std::optional<double> score;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }
    bool valid() const { return x_min < x_max && y_min < y_max && class_id >= 0; }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct CenterBox {
    double cx = 0;
    double cy = 0;
    double w = 0;
    double h = 0;

    friend bool operator==(const CenterBox&, const CenterBox&) = default;
};

inline double iou(const BoundingBox& a, const BoundingBox& b)
{
    const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (iw <= 0 || ih <= 0) {
        return 0.0;
    }
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    return uni > 0 ? std::clamp(inter / uni, 0.0, 1.0) : 0.0;
}

/// Intersects `b` with the rectangle [x0,x1]x[y0,y1]. Returns nothing when the
/// result is degenerate or keeps less than `min_area_frac` of the original area.
inline std::optional<BoundingBox> clip_box_to(const BoundingBox& b, double x0, double y0, double x1, double y1,
                                              double min_area_frac)
{
    BoundingBox c = b;
    c.x_min = std::clamp(b.x_min, x0, x1);
    c.y_min = std::clamp(b.y_min, y0, y1);
    c.x_max = std::clamp(b.x_max, x0, x1);
    c.y_max = std::clamp(b.y_max, y0, y1);
    if (!(c.x_min < c.x_max && c.y_min < c.y_max)) {
        return std::nullopt;
    }
    if (c.area() < min_area_frac * b.area()) {
        return std::nullopt;
    }
    return c;
}

inline std::optional<BoundingBox> clip_box(const BoundingBox& b, double width, double height, double min_area_frac)
{
    return clip_box_to(b, 0.0, 0.0, width, height, min_area_frac);
}

inline CenterBox to_center(const BoundingBox& b)
{
    return {(b.x_min + b.x_max) / 2, (b.y_min + b.y_max) / 2, b.x_max - b.x_min, b.y_max - b.y_min};
}

inline BoundingBox to_corner(const CenterBox& c, int class_id = 0, std::optional<double> score = std::nullopt)
{
    return {c.cx - c.w / 2, c.cy - c.h / 2, c.cx + c.w / 2, c.cy + c.h / 2, class_id, score};
}

}   // namespace duodet
