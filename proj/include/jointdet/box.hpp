#pragma once

#include <vector>

namespace jointdet {

/// Axis-aligned rectangle in pixel coordinates, (x_min, y_min) inclusive corner.
struct BoundingBox {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }
    bool degenerate() const { return !(x_min < x_max && y_min < y_max); }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct Detection {
    BoundingBox box;
    double score = 0.0;
};

/// True when the box is non-degenerate and lies inside a width x height image.
bool box_within(const BoundingBox& box, int width, int height);

/// Clip to [0,width] x [0,height]. The result may be degenerate.
BoundingBox clamp_box(const BoundingBox& box, int width, int height);

/// Intersection over union; throws ArgumentError on a zero-area box.
double iou(const BoundingBox& a, const BoundingBox& b);

/// Same as iou() but returns 0 for degenerate boxes instead of throwing.
double overlap_iou(const BoundingBox& a, const BoundingBox& b) noexcept;

/// Greedy suppression over detections already sorted by descending score.
/// A detection is dropped when its IoU with a kept one exceeds `iou_threshold`.
std::vector<Detection> non_max_suppression(const std::vector<Detection>& sorted, double iou_threshold,
                                           std::size_t max_keep = 0);

}  // namespace jointdet
