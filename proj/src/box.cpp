#include "jointdet/box.hpp"

#include <algorithm>

#include "jointdet/errors.hpp"

namespace jointdet {

bool box_within(const BoundingBox& box, int width, int height)
{
    return !box.degenerate() && box.x_min >= 0.0 && box.y_min >= 0.0 && box.x_max <= width &&
           box.y_max <= height;
}

BoundingBox clamp_box(const BoundingBox& box, int width, int height)
{
    auto clip = [](double v, double hi) { return std::clamp(v, 0.0, hi); };
    return {clip(box.x_min, width), clip(box.y_min, height), clip(box.x_max, width), clip(box.y_max, height)};
}

double overlap_iou(const BoundingBox& a, const BoundingBox& b) noexcept
{
    if (a.degenerate() || b.degenerate()) {
        return 0.0;
    }
    const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
    const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
    if (iw <= 0.0 || ih <= 0.0) {
        return 0.0;
    }
    const double inter = iw * ih;
    return inter / (a.area() + b.area() - inter);
}

double iou(const BoundingBox& a, const BoundingBox& b)
{
    if (a.degenerate() || b.degenerate()) {
        throw ArgumentError("iou: degenerate box");
    }
    return overlap_iou(a, b);
}

std::vector<Detection> non_max_suppression(const std::vector<Detection>& sorted, double iou_threshold,
                                           std::size_t max_keep)
{
    std::vector<Detection> kept;
    for (const auto& det : sorted) {
        const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
            return overlap_iou(k.box, det.box) > iou_threshold;
        });
        if (!suppressed) {
            kept.push_back(det);
            if (max_keep != 0 && kept.size() == max_keep) {
                break;
            }
        }
    }
    return kept;
}

}  // namespace jointdet
