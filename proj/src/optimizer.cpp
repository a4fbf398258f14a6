#include "jointdet/optimizer.hpp"

#include "jointdet/errors.hpp"

namespace jointdet {

MomentumSgd::MomentumSgd(double momentum, double weight_decay) : momentum_(momentum), weight_decay_(weight_decay)
{
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw ConfigError("sgd: momentum must lie in [0,1)");
    }
    if (!(weight_decay >= 0.0)) {
        throw ConfigError("sgd: weight decay must be >= 0");
    }
}

void MomentumSgd::step(Parameters& params, const Parameters& grad, double lr)
{
    if (velocity_.arrays.empty()) {
        velocity_ = params.zeros_like();
    }
    if (grad.arrays.size() != params.arrays.size() || velocity_.arrays.size() != params.arrays.size()) {
        throw ArgumentError("sgd: parameter, gradient and velocity layouts differ");
    }
    for (std::size_t i = 0; i < params.arrays.size(); ++i) {
        auto& theta = params.arrays[i].values;
        const auto& g = grad.arrays[i].values;
        auto& v = velocity_.arrays[i].values;
        if (g.size() != theta.size() || v.size() != theta.size()) {
            throw ArgumentError("sgd: size mismatch in " + params.arrays[i].name);
        }
        for (std::size_t j = 0; j < theta.size(); ++j) {
            v[j] = momentum_ * v[j] + (g[j] + weight_decay_ * theta[j]);
            theta[j] -= lr * v[j];
        }
    }
}

}  // namespace jointdet
