#include "jointdet/tcr.hpp"

#include <cmath>

#include "jointdet/errors.hpp"

namespace jointdet {

namespace {

void require_same(const FeatureMap& a, const FeatureMap& b, const char* what)
{
    if (!a.same_shape(b) || a.empty()) {
        throw ArgumentError(std::string(what) + ": feature map shapes differ");
    }
}

void require_finite(const FeatureMap& f)
{
    for (double v : f.data) {
        if (!std::isfinite(v)) {
            throw NumericError("tcr: non-finite feature value");
        }
    }
}

double cosine_distance_mean(const FeatureMap& a, const FeatureMap& b, double eps, FeatureMap* da, FeatureMap* db)
{
    require_same(a, b, "tcr_loss");
    require_finite(a);
    require_finite(b);
    if (!(eps > 0.0)) {
        throw ArgumentError("tcr_loss: epsilon must be positive");
    }
    const std::size_t plane = a.plane();
    const double inv_locations = 1.0 / static_cast<double>(plane);
    if (da != nullptr) {
        *da = FeatureMap(a.channels, a.height, a.width);
        *db = FeatureMap(a.channels, a.height, a.width);
    }

    double total = 0.0;
    for (std::size_t p = 0; p < plane; ++p) {
        double dot = 0.0, aa = 0.0, bb = 0.0;
        for (int c = 0; c < a.channels; ++c) {
            const double x = a.data[c * plane + p];
            const double y = b.data[c * plane + p];
            dot += x * y;
            aa += x * x;
            bb += y * y;
        }
        const double na = std::sqrt(aa);
        const double nb = std::sqrt(bb);
        const double norm = na * nb;
        const bool floored = !(norm > eps);
        const double denom = floored ? eps : norm;
        const double cos = dot / denom;
        total += 1.0 - cos;

        if (da == nullptr) {
            continue;
        }
        // d(1 - cos)/da = -(b / denom - cos * a / |a|^2), and symmetrically for b.
        for (int c = 0; c < a.channels; ++c) {
            const double x = a.data[c * plane + p];
            const double y = b.data[c * plane + p];
            double ga = y / denom;
            double gb = x / denom;
            if (!floored) {
                ga -= cos * x / aa;
                gb -= cos * y / bb;
            }
            da->data[c * plane + p] = -ga * inv_locations;
            db->data[c * plane + p] = -gb * inv_locations;
        }
    }
    return total * inv_locations;
}

}  // namespace

void TcrConfig::validate() const
{
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) {
        throw ConfigError("tcr: gamma must be a finite value >= 0");
    }
    if (!(epsilon > 0.0)) {
        throw ConfigError("tcr: epsilon must be positive");
    }
}

FeatureMap estimate_midframe(const FeatureMap& f_prev, const FeatureMap& f_next)
{
    require_same(f_prev, f_next, "estimate_midframe");
    FeatureMap out(f_prev.channels, f_prev.height, f_prev.width);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out.data[i] = 0.5 * (f_prev.data[i] + f_next.data[i]);
    }
    return out;
}

double tcr_loss(const FeatureMap& f_mid, const FeatureMap& f_hat, double epsilon)
{
    return cosine_distance_mean(f_mid, f_hat, epsilon, nullptr, nullptr);
}

TcrLossGrad tcr_loss_grad(const FeatureMap& f_mid, const FeatureMap& f_hat, double epsilon)
{
    TcrLossGrad out;
    out.loss = cosine_distance_mean(f_mid, f_hat, epsilon, &out.d_mid, &out.d_hat);
    return out;
}

FeatureMap split_midframe_grad(const FeatureMap& d_hat)
{
    FeatureMap out = d_hat;
    for (double& v : out.data) {
        v *= 0.5;
    }
    return out;
}

}  // namespace jointdet
