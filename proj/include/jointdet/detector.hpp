#pragma once

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jointdet/box.hpp"
#include "jointdet/tensor.hpp"

namespace jointdet {

struct AnchorSize {
    double width = 16.0;
    double height = 16.0;
    friend bool operator==(const AnchorSize&, const AnchorSize&) = default;
};

struct DetectorConfig {
    int input_channels = 3;
    int feature_channels = 32;
    int feature_stride = 8;  ///< power of two
    std::vector<AnchorSize> anchor_sizes = {{22.0, 22.0}};
    double score_threshold = 0.05;
    double nms_iou = 0.5;
    int max_detections = 50;
    /// Normalization statistics are computed once at build time and never updated.
    bool frozen_norm = true;

    void validate() const;
    /// Throws ArgumentError unless the input can be encoded at this stride.
    void check_input(const Tensor3& image) const;

    friend bool operator==(const DetectorConfig&, const DetectorConfig&) = default;
};

/// A named, shaped array of doubles.
struct NamedArray {
    std::string name;
    std::vector<int> shape;
    std::vector<double> values;

    friend bool operator==(const NamedArray&, const NamedArray&) = default;
};

/// Ordered collection of named arrays; used for parameters, gradients and
/// optimizer state so they can be walked in lockstep.
struct Parameters {
    std::vector<NamedArray> arrays;

    Parameters zeros_like() const;
    std::size_t count() const;
    NamedArray& get(const std::string& name);
    const NamedArray& get(const std::string& name) const;
    void set_zero();
    /// this += other (same layout).
    void add(const Parameters& other);
    void scale(double factor);
    bool all_finite() const;

    friend bool operator==(const Parameters&, const Parameters&) = default;
};

struct LossBreakdown {
    double total = 0.0;
    double classification = 0.0;
    double regression = 0.0;
};

/// Opaque activations saved by Detector::encode_traced for the backward pass.
class EncoderTrace {
public:
    virtual ~EncoderTrace() = default;
};

/// Contract for a single-frame detector: an encoder G(theta, x) exposing one
/// regularization feature map, a differentiable detection loss, and inference.
class Detector {
public:
    virtual ~Detector() = default;

    virtual const DetectorConfig& config() const = 0;
    virtual Parameters& parameters() = 0;
    virtual const Parameters& parameters() const = 0;

    /// The designated regularization feature for an image.
    virtual FeatureMap encode(const Tensor3& image) const = 0;

    /// encode() plus whatever backward_feature() needs.
    virtual std::unique_ptr<EncoderTrace> encode_traced(const Tensor3& image, FeatureMap& feature) const = 0;

    /// Accumulate d(loss)/d(theta) into grad, given d(loss)/d(feature).
    virtual void backward_feature(const EncoderTrace& trace, const FeatureMap& d_feature, Parameters& grad) const = 0;

    /// Detection loss for one image; accumulates its gradient into *grad when non-null.
    virtual LossBreakdown detection_loss(const Tensor3& image, std::span<const BoundingBox> boxes,
                                         Parameters* grad) const = 0;

    /// Thresholded, suppressed detections sorted by descending score.
    virtual std::vector<Detection> predict(const Tensor3& image) const = 0;
};

}  // namespace jointdet
