#pragma once

#include "jointdet/detector.hpp"

namespace jointdet {

/// SGD with momentum and L2 weight decay:
///   g' = g + weight_decay * theta
///   v  = momentum * v + g'
///   theta -= lr * v
class MomentumSgd {
public:
    MomentumSgd(double momentum, double weight_decay);

    void step(Parameters& params, const Parameters& grad, double lr);

    const Parameters& velocity() const { return velocity_; }
    void set_velocity(Parameters velocity) { velocity_ = std::move(velocity); }

private:
    double momentum_;
    double weight_decay_;
    Parameters velocity_;
};

}  // namespace jointdet
