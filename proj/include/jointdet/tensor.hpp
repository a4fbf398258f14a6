#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace jointdet {

/// Dense channels x height x width grid of doubles, row-major within a channel.
///
/// Used for image pixels (values in [0,1]) and for encoder feature maps.
struct Tensor3 {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    Tensor3() = default;
    Tensor3(int c, int h, int w, double fill = 0.0)
        : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill)
    {
    }

    std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    double& at(int c, int y, int x) { return data[(c * plane()) + static_cast<std::size_t>(y) * width + x]; }
    double at(int c, int y, int x) const { return data[(c * plane()) + static_cast<std::size_t>(y) * width + x]; }

    std::span<double> channel(int c) { return {data.data() + c * plane(), plane()}; }
    std::span<const double> channel(int c) const { return {data.data() + c * plane(), plane()}; }

    bool same_shape(const Tensor3& o) const
    {
        return channels == o.channels && height == o.height && width == o.width;
    }

    friend bool operator==(const Tensor3&, const Tensor3&) = default;
};

using FeatureMap = Tensor3;

}  // namespace jointdet
