#pragma once

#include <cstdint>
#include <vector>

#include "jointdet/detector.hpp"
#include "jointdet/kernels/conv.hpp"

namespace jointdet {

/// Small convolutional anchor detector.
///
/// Encoder: 3x3 conv stages, each followed by frozen per-channel normalization.
/// There are log2(stride) stride-2 stages, padded with stride-1 stages up to a
/// minimum of four. ReLU between stages; the last stage's normalized output is
/// the regularization feature. Head: ReLU, 1x1 conv, ReLU, 1x1 conv producing
/// per anchor one objectness logit and four box deltas (dx, dy, dw, dh).
///
/// Loss: balanced binary cross-entropy on objectness (positives and negatives
/// each weighted one half, or the whole weight when the other set is empty)
/// plus smooth-L1 regression averaged over positive anchors.
class ReferenceDetector final : public Detector {
public:
    static constexpr int kMinStages = 4;
    static constexpr double kPositiveIou = 0.5;
    static constexpr double kNegativeIou = 0.3;
    static constexpr double kSmoothL1Beta = 1.0 / 9.0;

    ReferenceDetector(DetectorConfig config, std::uint64_t seed);
    /// Rebuild from stored arrays (checkpoint load).
    ReferenceDetector(DetectorConfig config, Parameters parameters, Parameters buffers);

    const DetectorConfig& config() const override { return config_; }
    Parameters& parameters() override { return params_; }
    const Parameters& parameters() const override { return params_; }
    /// Non-trainable state: frozen normalization statistics.
    const Parameters& buffers() const { return buffers_; }

    FeatureMap encode(const Tensor3& image) const override;
    std::unique_ptr<EncoderTrace> encode_traced(const Tensor3& image, FeatureMap& feature) const override;
    void backward_feature(const EncoderTrace& trace, const FeatureMap& d_feature, Parameters& grad) const override;
    LossBreakdown detection_loss(const Tensor3& image, std::span<const BoundingBox> boxes,
                                 Parameters* grad) const override;
    std::vector<Detection> predict(const Tensor3& image) const override;

    /// Anchor boxes for a feature grid, ordered (anchor, y, x).
    std::vector<BoundingBox> anchors(int grid_h, int grid_w) const;

    /// Per-anchor training label: 1 positive, 0 negative, -1 ignored; and the
    /// matched ground-truth index for positives.
    struct Assignment {
        std::vector<int> label;
        std::vector<int> matched;
    };
    Assignment assign(std::span<const BoundingBox> anchors, std::span<const BoundingBox> truths) const;

    int stage_count() const { return static_cast<int>(stages_.size()); }

    std::int64_t epoch = 0;
    std::int64_t step = 0;

private:
    struct Layer {
        kernels::ConvShape shape;
        std::size_t weight = 0;  // index into params_.arrays
        std::size_t bias = 0;
        std::size_t norm = 0;  // index into buffers_.arrays (mean, inv_std pairs); unused for head
    };

    class Trace;

    void build_layers();
    void calibrate_norm(std::uint64_t seed);
    FeatureMap run_encoder(const Tensor3& image, Trace* trace) const;
    Tensor3 run_head(const FeatureMap& feature, Trace* trace) const;

    DetectorConfig config_;
    Parameters params_;
    Parameters buffers_;
    std::vector<Layer> stages_;
    Layer head_hidden_;
    Layer head_out_;
};

ReferenceDetector build_detector(const DetectorConfig& config, std::uint64_t seed);

}  // namespace jointdet
