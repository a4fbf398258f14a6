#pragma once

#include <string>
#include <variant>
#include <vector>

#include "jointdet/box.hpp"
#include "jointdet/rng.hpp"
#include "jointdet/tensor.hpp"

namespace jointdet {

/// A labeled still: pixels in [0,1] and zero or more ground-truth boxes.
struct LabeledImage {
    Tensor3 pixels;
    std::vector<BoundingBox> boxes;
};

/// An unlabeled video frame.
struct VideoFrame {
    Tensor3 pixels;
    int frame_index = 0;
    std::string source_video;
};

/// lambda ~ Beta(alpha, alpha + 1).
struct BetaLambda {
    double alpha = 0.05;
};

/// lambda = c * X with X ~ Bernoulli(p).
struct DiscreteLambda {
    double c = 0.5;
    double p = 0.2;
};

/// Distribution of the blend weight. Holding the alternatives in a variant
/// means only the selected distribution's parameters exist.
struct MixupConfig {
    std::variant<BetaLambda, DiscreteLambda> distribution = DiscreteLambda{};

    static MixupConfig beta(double alpha) { return {BetaLambda{alpha}}; }
    static MixupConfig discrete(double c, double p) { return {DiscreteLambda{c, p}}; }

    bool is_beta() const { return std::holds_alternative<BetaLambda>(distribution); }
    /// Throws ConfigError when parameters are out of range.
    void validate() const;
    std::string describe() const;
};

/// A virtual training sample: blended pixels carrying the image's boxes unchanged.
struct MixupSample {
    Tensor3 pixels;
    std::vector<BoundingBox> boxes;
    double lambda_used = 0.0;
};

/// Draw the weight placed on the negative frame.
double sample_lambda(const MixupConfig& config, Rng& rng);

/// Bilinear resampling with half-pixel centers and no anti-aliasing.
Tensor3 resize_bilinear(const Tensor3& src, int target_h, int target_w);

VideoFrame resize_frame(const VideoFrame& frame, int target_h, int target_w);

/// (1 - lambda) * image + lambda * frame, elementwise.
Tensor3 blend_inputs(const Tensor3& image, const Tensor3& frame, double lambda);

/// Resize the frame to the image, blend with a sampled lambda, copy the image's boxes.
MixupSample make_virtual_sample(const LabeledImage& image, const VideoFrame& frame, const MixupConfig& config,
                                Rng& rng);

}  // namespace jointdet
