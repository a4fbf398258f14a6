#pragma once

#include "jointdet/tensor.hpp"

namespace jointdet {

/// Temporal coherence regularization settings.
struct TcrConfig {
    double gamma = 0.01;    ///< weight of the regularizer in the combined loss
    double epsilon = 1e-8;  ///< floor on the cosine denominator

    void validate() const;
};

/// Estimate of the middle frame's feature: elementwise mean of its neighbours.
FeatureMap estimate_midframe(const FeatureMap& f_prev, const FeatureMap& f_next);

/// Mean over spatial positions of 1 - cos(f_mid[:,y,x], f_hat[:,y,x]).
double tcr_loss(const FeatureMap& f_mid, const FeatureMap& f_hat, double epsilon = 1e-8);

struct TcrLossGrad {
    double loss = 0.0;
    FeatureMap d_mid;
    FeatureMap d_hat;
};

/// tcr_loss together with its gradient with respect to both arguments.
TcrLossGrad tcr_loss_grad(const FeatureMap& f_mid, const FeatureMap& f_hat, double epsilon = 1e-8);

/// Gradient of the loss w.r.t. the raw neighbour features, given the loss
/// gradient at the estimate. Both neighbours receive half of it.
FeatureMap split_midframe_grad(const FeatureMap& d_hat);

inline double combined_loss(double l_det, double l_reg, double gamma)
{
    return l_det + gamma * l_reg;
}

}  // namespace jointdet
