#include "jointdet/mixup.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "jointdet/errors.hpp"

namespace jointdet {

void MixupConfig::validate() const
{
    if (const auto* beta = std::get_if<BetaLambda>(&distribution)) {
        if (!(beta->alpha > 0.0) || !std::isfinite(beta->alpha)) {
            throw ConfigError("mixup: Beta alpha must be a positive finite number");
        }
        return;
    }
    const auto& d = std::get<DiscreteLambda>(distribution);
    if (!(d.c >= 0.0 && d.c <= 1.0)) {
        throw ConfigError("mixup: discrete c must lie in [0,1]");
    }
    if (!(d.p >= 0.0 && d.p <= 1.0)) {
        throw ConfigError("mixup: discrete p must lie in [0,1]");
    }
}

std::string MixupConfig::describe() const
{
    std::ostringstream os;
    if (const auto* beta = std::get_if<BetaLambda>(&distribution)) {
        os << "beta(alpha=" << beta->alpha << ")";
    } else {
        const auto& d = std::get<DiscreteLambda>(distribution);
        os << "discrete(c=" << d.c << ", p=" << d.p << ")";
    }
    return os.str();
}

double sample_lambda(const MixupConfig& config, Rng& rng)
{
    config.validate();
    if (const auto* beta = std::get_if<BetaLambda>(&config.distribution)) {
        // Beta(a, b) = X / (X + Y) with X ~ Gamma(a), Y ~ Gamma(b).
        const double x = std::gamma_distribution<double>(beta->alpha, 1.0)(rng);
        const double y = std::gamma_distribution<double>(beta->alpha + 1.0, 1.0)(rng);
        const double sum = x + y;
        return sum > 0.0 ? std::clamp(x / sum, 0.0, 1.0) : 0.0;
    }
    const auto& d = std::get<DiscreteLambda>(config.distribution);
    return uniform01(rng) < d.p ? d.c : 0.0;
}

Tensor3 resize_bilinear(const Tensor3& src, int target_h, int target_w)
{
    if (target_h <= 0 || target_w <= 0) {
        throw ArgumentError("resize: target dimensions must be positive");
    }
    if (src.empty()) {
        throw ArgumentError("resize: empty source");
    }
    if (src.height == target_h && src.width == target_w) {
        return src;
    }
    const double sy = static_cast<double>(src.height) / target_h;
    const double sx = static_cast<double>(src.width) / target_w;

    struct Tap {
        int lo, hi;
        double t;
    };
    auto taps = [](int n_out, int n_in, double scale) {
        std::vector<Tap> out(n_out);
        for (int i = 0; i < n_out; ++i) {
            const double pos = std::clamp((i + 0.5) * scale - 0.5, 0.0, static_cast<double>(n_in - 1));
            const int lo = static_cast<int>(std::floor(pos));
            const int hi = std::min(lo + 1, n_in - 1);
            out[i] = {lo, hi, pos - lo};
        }
        return out;
    };
    const auto ty = taps(target_h, src.height, sy);
    const auto tx = taps(target_w, src.width, sx);

    Tensor3 dst(src.channels, target_h, target_w);
    for (int c = 0; c < src.channels; ++c) {
        for (int y = 0; y < target_h; ++y) {
            for (int x = 0; x < target_w; ++x) {
                const double top = std::lerp(src.at(c, ty[y].lo, tx[x].lo), src.at(c, ty[y].lo, tx[x].hi), tx[x].t);
                const double bot = std::lerp(src.at(c, ty[y].hi, tx[x].lo), src.at(c, ty[y].hi, tx[x].hi), tx[x].t);
                dst.at(c, y, x) = std::clamp(std::lerp(top, bot, ty[y].t), 0.0, 1.0);
            }
        }
    }
    return dst;
}

VideoFrame resize_frame(const VideoFrame& frame, int target_h, int target_w)
{
    return {resize_bilinear(frame.pixels, target_h, target_w), frame.frame_index, frame.source_video};
}

Tensor3 blend_inputs(const Tensor3& image, const Tensor3& frame, double lambda)
{
    if (!image.same_shape(frame)) {
        throw ArgumentError("blend: image and frame shapes differ");
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw ArgumentError("blend: lambda must lie in [0,1]");
    }
    Tensor3 out = image;
    const double keep = 1.0 - lambda;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double a = image.data[i];
        const double b = frame.data[i];
        out.data[i] = std::clamp(keep * a + lambda * b, std::min(a, b), std::max(a, b));
    }
    return out;
}

MixupSample make_virtual_sample(const LabeledImage& image, const VideoFrame& frame, const MixupConfig& config,
                                Rng& rng)
{
    if (frame.pixels.empty()) {
        throw ArgumentError("mixup: empty frame");
    }
    const double lambda = sample_lambda(config, rng);
    const Tensor3 resized = resize_bilinear(frame.pixels, image.pixels.height, image.pixels.width);
    if (resized.channels != image.pixels.channels) {
        throw ArgumentError("mixup: image and frame channel counts differ");
    }
    return {blend_inputs(image.pixels, resized, lambda), image.boxes, lambda};
}

}  // namespace jointdet
