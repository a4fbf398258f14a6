#include "jointdet/reference_detector.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numeric>

#include "jointdet/errors.hpp"
#include "jointdet/rng.hpp"

namespace jointdet {

namespace {

constexpr double kNormEps = 1e-5;
// exp() argument cap when decoding width/height deltas.
const double kMaxLogScale = std::log(1000.0 / 16.0);

double sigmoid(double z)
{
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// Binary cross-entropy on a logit, numerically stable for large |z|.
double bce_logit(double z, double target)
{
    return std::max(z, 0.0) - z * target + std::log1p(std::exp(-std::abs(z)));
}

double smooth_l1(double d, double beta)
{
    const double a = std::abs(d);
    return a < beta ? 0.5 * d * d / beta : a - 0.5 * beta;
}

double smooth_l1_grad(double d, double beta)
{
    const double a = std::abs(d);
    if (a < beta) {
        return d / beta;
    }
    return d > 0.0 ? 1.0 : -1.0;
}

void relu_inplace(Tensor3& t)
{
    for (double& v : t.data) {
        v = std::max(v, 0.0);
    }
}

std::array<double, 4> encode_deltas(const BoundingBox& anchor, const BoundingBox& truth)
{
    const double aw = anchor.width(), ah = anchor.height();
    const double acx = anchor.x_min + 0.5 * aw, acy = anchor.y_min + 0.5 * ah;
    const double gw = truth.width(), gh = truth.height();
    const double gcx = truth.x_min + 0.5 * gw, gcy = truth.y_min + 0.5 * gh;
    return {(gcx - acx) / aw, (gcy - acy) / ah, std::log(gw / aw), std::log(gh / ah)};
}

BoundingBox decode_deltas(const BoundingBox& anchor, double dx, double dy, double dw, double dh)
{
    const double aw = anchor.width(), ah = anchor.height();
    const double cx = anchor.x_min + 0.5 * aw + dx * aw;
    const double cy = anchor.y_min + 0.5 * ah + dy * ah;
    const double w = aw * std::exp(std::min(dw, kMaxLogScale));
    const double h = ah * std::exp(std::min(dh, kMaxLogScale));
    return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

}  // namespace

// ---------------------------------------------------------------------------
// DetectorConfig / Parameters

void DetectorConfig::validate() const
{
    if (input_channels < 1 || feature_channels < 1) {
        throw ConfigError("detector: channel counts must be positive");
    }
    if (feature_stride < 2 || !std::has_single_bit(static_cast<unsigned>(feature_stride))) {
        throw ConfigError("detector: feature_stride must be a power of two >= 2");
    }
    if (anchor_sizes.empty()) {
        throw ConfigError("detector: at least one anchor size is required");
    }
    for (const auto& a : anchor_sizes) {
        if (!(a.width > 0.0 && a.height > 0.0)) {
            throw ConfigError("detector: anchor sizes must be positive");
        }
    }
    if (!(score_threshold >= 0.0 && score_threshold <= 1.0)) {
        throw ConfigError("detector: score_threshold must lie in [0,1]");
    }
    if (!(nms_iou > 0.0 && nms_iou <= 1.0)) {
        throw ConfigError("detector: nms_iou must lie in (0,1]");
    }
    if (max_detections < 1) {
        throw ConfigError("detector: max_detections must be positive");
    }
}

void DetectorConfig::check_input(const Tensor3& image) const
{
    if (image.channels != input_channels) {
        throw ArgumentError("detector: input has " + std::to_string(image.channels) + " channels, expected " +
                            std::to_string(input_channels));
    }
    if (image.height < feature_stride || image.width < feature_stride || image.height % feature_stride != 0 ||
        image.width % feature_stride != 0) {
        throw ArgumentError("detector: input " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                            " is not divisible by stride " + std::to_string(feature_stride));
    }
}

Parameters Parameters::zeros_like() const
{
    Parameters out = *this;
    out.set_zero();
    return out;
}

std::size_t Parameters::count() const
{
    std::size_t n = 0;
    for (const auto& a : arrays) {
        n += a.values.size();
    }
    return n;
}

NamedArray& Parameters::get(const std::string& name)
{
    for (auto& a : arrays) {
        if (a.name == name) {
            return a;
        }
    }
    throw ArgumentError("parameters: no array named " + name);
}

const NamedArray& Parameters::get(const std::string& name) const
{
    return const_cast<Parameters*>(this)->get(name);
}

void Parameters::set_zero()
{
    for (auto& a : arrays) {
        std::fill(a.values.begin(), a.values.end(), 0.0);
    }
}

void Parameters::add(const Parameters& other)
{
    if (other.arrays.size() != arrays.size()) {
        throw ArgumentError("parameters: layout mismatch");
    }
    for (std::size_t i = 0; i < arrays.size(); ++i) {
        auto& dst = arrays[i].values;
        const auto& src = other.arrays[i].values;
        if (dst.size() != src.size()) {
            throw ArgumentError("parameters: layout mismatch in " + arrays[i].name);
        }
        for (std::size_t j = 0; j < dst.size(); ++j) {
            dst[j] += src[j];
        }
    }
}

void Parameters::scale(double factor)
{
    for (auto& a : arrays) {
        for (double& v : a.values) {
            v *= factor;
        }
    }
}

bool Parameters::all_finite() const
{
    return std::all_of(arrays.begin(), arrays.end(), [](const NamedArray& a) {
        return std::all_of(a.values.begin(), a.values.end(), [](double v) { return std::isfinite(v); });
    });
}

// ---------------------------------------------------------------------------
// ReferenceDetector

class ReferenceDetector::Trace final : public EncoderTrace {
public:
    std::vector<Tensor3> stage_inputs;  // input of each encoder conv
    std::vector<Tensor3> stage_outputs; // normalized conv output (pre-ReLU)
    Tensor3 head_input;                 // ReLU(feature)
    Tensor3 hidden;                     // hidden conv output (pre-ReLU)
    Tensor3 hidden_act;                 // ReLU(hidden)
};

ReferenceDetector::ReferenceDetector(DetectorConfig config, std::uint64_t seed) : config_(std::move(config))
{
    config_.validate();
    build_layers();

    Rng rng = make_rng(seed, {0x696e6974});  // "init"
    auto fill_normal = [&](NamedArray& a, double stddev) {
        std::normal_distribution<double> dist(0.0, stddev);
        for (double& v : a.values) {
            v = dist(rng);
        }
    };
    for (const auto& layer : stages_) {
        const double fan_in = layer.shape.in_channels * layer.shape.kernel * layer.shape.kernel;
        fill_normal(params_.arrays[layer.weight], std::sqrt(2.0 / fan_in));
    }
    fill_normal(params_.arrays[head_hidden_.weight], std::sqrt(2.0 / head_hidden_.shape.in_channels));
    fill_normal(params_.arrays[head_out_.weight], 0.01);

    calibrate_norm(seed);
}

ReferenceDetector::ReferenceDetector(DetectorConfig config, Parameters parameters, Parameters buffers)
    : config_(std::move(config))
{
    config_.validate();
    build_layers();
    auto check_layout = [](const Parameters& expected, const Parameters& got, const char* what) {
        if (expected.arrays.size() != got.arrays.size()) {
            throw LoadError(std::string("detector: ") + what + " count does not match config");
        }
        for (std::size_t i = 0; i < expected.arrays.size(); ++i) {
            if (expected.arrays[i].name != got.arrays[i].name || expected.arrays[i].shape != got.arrays[i].shape ||
                expected.arrays[i].values.size() != got.arrays[i].values.size()) {
                throw LoadError(std::string("detector: ") + what + " '" + got.arrays[i].name +
                                "' does not match config");
            }
        }
    };
    check_layout(params_, parameters, "parameter");
    check_layout(buffers_, buffers, "buffer");
    params_ = std::move(parameters);
    buffers_ = std::move(buffers);
}

void ReferenceDetector::build_layers()
{
    const int downsamples = std::countr_zero(static_cast<unsigned>(config_.feature_stride));
    const int n = std::max(downsamples, kMinStages);

    auto add_conv = [&](const std::string& name, kernels::ConvShape shape) {
        Layer layer;
        layer.shape = shape;
        layer.weight = params_.arrays.size();
        params_.arrays.push_back({name + ".weight",
                                  {shape.out_channels, shape.in_channels, shape.kernel, shape.kernel},
                                  std::vector<double>(shape.weight_count(), 0.0)});
        layer.bias = params_.arrays.size();
        params_.arrays.push_back(
            {name + ".bias", {shape.out_channels}, std::vector<double>(static_cast<std::size_t>(shape.out_channels), 0.0)});
        return layer;
    };

    int in = config_.input_channels;
    for (int i = 0; i < n; ++i) {
        const int out = (i == n - 1) ? config_.feature_channels : std::min(config_.feature_channels, 8 << i);
        const std::string name = "stage" + std::to_string(i);
        Layer layer = add_conv(name, {in, out, 3, i < downsamples ? 2 : 1, 1});
        layer.norm = buffers_.arrays.size();
        buffers_.arrays.push_back({name + ".norm_mean", {out}, std::vector<double>(static_cast<std::size_t>(out), 0.0)});
        buffers_.arrays.push_back({name + ".norm_inv_std", {out}, std::vector<double>(static_cast<std::size_t>(out), 1.0)});
        stages_.push_back(layer);
        in = out;
    }
    const int anchors = static_cast<int>(config_.anchor_sizes.size());
    head_hidden_ = add_conv("head.hidden", {config_.feature_channels, config_.feature_channels, 1, 1, 0});
    head_out_ = add_conv("head.out", {config_.feature_channels, 5 * anchors, 1, 1, 0});
}

// Normalization statistics come from a fixed seeded batch of uniform-noise
// probes pushed through the freshly initialized encoder, then stay frozen.
void ReferenceDetector::calibrate_norm(std::uint64_t seed)
{
    if (!config_.frozen_norm) {
        return;
    }
    constexpr int kProbes = 2;
    const int size = std::max(64, 4 * config_.feature_stride);
    Rng rng = make_rng(seed, {0x70726f6265});  // "probe"
    std::vector<Tensor3> acts;
    for (int i = 0; i < kProbes; ++i) {
        Tensor3 probe(config_.input_channels, size, size);
        for (double& v : probe.data) {
            v = uniform01(rng);
        }
        acts.push_back(std::move(probe));
    }

    for (std::size_t s = 0; s < stages_.size(); ++s) {
        const Layer& layer = stages_[s];
        auto& mean = buffers_.arrays[layer.norm].values;
        auto& inv_std = buffers_.arrays[layer.norm + 1].values;
        std::vector<double> sum(mean.size(), 0.0), sq(mean.size(), 0.0);
        std::size_t count = 0;
        for (auto& act : acts) {
            Tensor3 z;
            kernels::conv2d_forward(layer.shape, act, params_.arrays[layer.weight].values,
                                    params_.arrays[layer.bias].values, z);
            for (int c = 0; c < z.channels; ++c) {
                for (double v : z.channel(c)) {
                    sum[c] += v;
                    sq[c] += v * v;
                }
            }
            count += z.plane();
            act = std::move(z);
        }
        for (std::size_t c = 0; c < mean.size(); ++c) {
            mean[c] = sum[c] / count;
            const double var = std::max(sq[c] / count - mean[c] * mean[c], 0.0);
            inv_std[c] = 1.0 / std::sqrt(var + kNormEps);
        }
        for (auto& act : acts) {
            for (int c = 0; c < act.channels; ++c) {
                for (double& v : act.channel(c)) {
                    v = std::max((v - mean[c]) * inv_std[c], 0.0);
                }
            }
        }
    }
}

FeatureMap ReferenceDetector::run_encoder(const Tensor3& image, Trace* trace) const
{
    config_.check_input(image);
    Tensor3 x = image;
    for (std::size_t s = 0; s < stages_.size(); ++s) {
        const Layer& layer = stages_[s];
        Tensor3 z;
        kernels::conv2d_forward(layer.shape, x, params_.arrays[layer.weight].values, params_.arrays[layer.bias].values, z);
        const auto& mean = buffers_.arrays[layer.norm].values;
        const auto& inv_std = buffers_.arrays[layer.norm + 1].values;
        for (int c = 0; c < z.channels; ++c) {
            for (double& v : z.channel(c)) {
                v = (v - mean[c]) * inv_std[c];
            }
        }
        if (trace != nullptr) {
            trace->stage_inputs.push_back(std::move(x));
            trace->stage_outputs.push_back(z);
        }
        x = std::move(z);
        if (s + 1 < stages_.size()) {
            relu_inplace(x);
        }
    }
    return x;
}

Tensor3 ReferenceDetector::run_head(const FeatureMap& feature, Trace* trace) const
{
    Tensor3 h0 = feature;
    relu_inplace(h0);
    Tensor3 h1;
    kernels::conv2d_forward(head_hidden_.shape, h0, params_.arrays[head_hidden_.weight].values,
                            params_.arrays[head_hidden_.bias].values, h1);
    Tensor3 h2 = h1;
    relu_inplace(h2);
    Tensor3 out;
    kernels::conv2d_forward(head_out_.shape, h2, params_.arrays[head_out_.weight].values,
                            params_.arrays[head_out_.bias].values, out);
    if (trace != nullptr) {
        trace->head_input = std::move(h0);
        trace->hidden = std::move(h1);
        trace->hidden_act = std::move(h2);
    }
    return out;
}

FeatureMap ReferenceDetector::encode(const Tensor3& image) const
{
    return run_encoder(image, nullptr);
}

std::unique_ptr<EncoderTrace> ReferenceDetector::encode_traced(const Tensor3& image, FeatureMap& feature) const
{
    auto trace = std::make_unique<Trace>();
    feature = run_encoder(image, trace.get());
    return trace;
}

void ReferenceDetector::backward_feature(const EncoderTrace& base, const FeatureMap& d_feature, Parameters& grad) const
{
    const auto& trace = dynamic_cast<const Trace&>(base);
    if (trace.stage_outputs.size() != stages_.size()) {
        throw ArgumentError("backward_feature: trace does not come from this detector");
    }
    Tensor3 d = d_feature;
    for (std::size_t s = stages_.size(); s-- > 0;) {
        const Layer& layer = stages_[s];
        if (!d.same_shape(trace.stage_outputs[s])) {
            throw ArgumentError("backward_feature: gradient shape mismatch");
        }
        if (s + 1 < stages_.size()) {
            const auto& pre = trace.stage_outputs[s].data;
            for (std::size_t i = 0; i < d.size(); ++i) {
                if (pre[i] <= 0.0) {
                    d.data[i] = 0.0;
                }
            }
        }
        const auto& inv_std = buffers_.arrays[layer.norm + 1].values;
        for (int c = 0; c < d.channels; ++c) {
            for (double& v : d.channel(c)) {
                v *= inv_std[c];
            }
        }
        Tensor3 d_in;
        kernels::conv2d_backward(layer.shape, trace.stage_inputs[s], params_.arrays[layer.weight].values, d,
                                 grad.arrays[layer.weight].values, grad.arrays[layer.bias].values,
                                 s > 0 ? &d_in : nullptr);
        d = std::move(d_in);
    }
}

std::vector<BoundingBox> ReferenceDetector::anchors(int grid_h, int grid_w) const
{
    std::vector<BoundingBox> out;
    out.reserve(config_.anchor_sizes.size() * grid_h * grid_w);
    const double stride = config_.feature_stride;
    for (const auto& size : config_.anchor_sizes) {
        for (int y = 0; y < grid_h; ++y) {
            for (int x = 0; x < grid_w; ++x) {
                const double cx = (x + 0.5) * stride;
                const double cy = (y + 0.5) * stride;
                out.push_back({cx - 0.5 * size.width, cy - 0.5 * size.height, cx + 0.5 * size.width,
                               cy + 0.5 * size.height});
            }
        }
    }
    return out;
}

ReferenceDetector::Assignment ReferenceDetector::assign(std::span<const BoundingBox> anchor_boxes,
                                                        std::span<const BoundingBox> truths) const
{
    Assignment out;
    out.label.assign(anchor_boxes.size(), 0);
    out.matched.assign(anchor_boxes.size(), -1);
    if (truths.empty()) {
        return out;
    }
    std::vector<double> best_for_truth(truths.size(), 0.0);
    std::vector<double> best_for_anchor(anchor_boxes.size(), 0.0);
    for (std::size_t a = 0; a < anchor_boxes.size(); ++a) {
        for (std::size_t t = 0; t < truths.size(); ++t) {
            const double v = overlap_iou(anchor_boxes[a], truths[t]);
            if (v > best_for_anchor[a]) {
                best_for_anchor[a] = v;
                out.matched[a] = static_cast<int>(t);
            }
            best_for_truth[t] = std::max(best_for_truth[t], v);
        }
        if (best_for_anchor[a] >= kPositiveIou) {
            out.label[a] = 1;
        } else if (best_for_anchor[a] >= kNegativeIou) {
            out.label[a] = -1;
        }
    }
    // Every truth keeps at least its best-overlapping anchor(s) as positives.
    for (std::size_t t = 0; t < truths.size(); ++t) {
        if (best_for_truth[t] <= 0.0) {
            continue;
        }
        for (std::size_t a = 0; a < anchor_boxes.size(); ++a) {
            if (overlap_iou(anchor_boxes[a], truths[t]) == best_for_truth[t]) {
                out.label[a] = 1;
                out.matched[a] = static_cast<int>(t);
            }
        }
    }
    for (std::size_t a = 0; a < anchor_boxes.size(); ++a) {
        if (out.label[a] != 1) {
            out.matched[a] = -1;
        }
    }
    return out;
}

LossBreakdown ReferenceDetector::detection_loss(const Tensor3& image, std::span<const BoundingBox> boxes,
                                                Parameters* grad) const
{
    for (const auto& box : boxes) {
        if (!box_within(box, image.width, image.height)) {
            throw ArgumentError("detection_loss: box outside the image or degenerate");
        }
    }
    Trace trace;
    const FeatureMap feature = run_encoder(image, grad != nullptr ? &trace : nullptr);
    const Tensor3 out = run_head(feature, grad != nullptr ? &trace : nullptr);

    const int gh = out.height, gw = out.width;
    const std::size_t cells = out.plane();
    const int n_anchor = static_cast<int>(config_.anchor_sizes.size());
    const auto anchor_boxes = anchors(gh, gw);
    const Assignment assignment = assign(anchor_boxes, boxes);

    std::size_t npos = 0, nneg = 0;
    for (int label : assignment.label) {
        npos += label == 1;
        nneg += label == 0;
    }
    const double w_pos = npos == 0 ? 0.0 : (nneg == 0 ? 1.0 : 0.5) / static_cast<double>(npos);
    const double w_neg = nneg == 0 ? 0.0 : (npos == 0 ? 1.0 : 0.5) / static_cast<double>(nneg);

    LossBreakdown loss;
    Tensor3 d_out(out.channels, gh, gw);
    for (int a = 0; a < n_anchor; ++a) {
        for (std::size_t p = 0; p < cells; ++p) {
            const std::size_t idx = a * cells + p;
            const int label = assignment.label[idx];
            if (label < 0) {
                continue;
            }
            const double z = out.data[a * cells + p];
            const double w = label == 1 ? w_pos : w_neg;
            loss.classification += w * bce_logit(z, label);
            d_out.data[a * cells + p] = w * (sigmoid(z) - label);

            if (label == 1) {
                const auto target = encode_deltas(anchor_boxes[idx], boxes[assignment.matched[idx]]);
                for (int j = 0; j < 4; ++j) {
                    const std::size_t ch = n_anchor + 4 * a + j;
                    const double diff = out.data[ch * cells + p] - target[j];
                    loss.regression += smooth_l1(diff, kSmoothL1Beta) / static_cast<double>(npos);
                    d_out.data[ch * cells + p] = smooth_l1_grad(diff, kSmoothL1Beta) / static_cast<double>(npos);
                }
            }
        }
    }
    loss.total = loss.classification + loss.regression;
    if (!std::isfinite(loss.total)) {
        throw NumericError("detection_loss: non-finite loss");
    }
    if (grad == nullptr) {
        return loss;
    }

    Tensor3 d_hidden_act;
    kernels::conv2d_backward(head_out_.shape, trace.hidden_act, params_.arrays[head_out_.weight].values, d_out,
                             grad->arrays[head_out_.weight].values, grad->arrays[head_out_.bias].values,
                             &d_hidden_act);
    for (std::size_t i = 0; i < d_hidden_act.size(); ++i) {
        if (trace.hidden.data[i] <= 0.0) {
            d_hidden_act.data[i] = 0.0;
        }
    }
    Tensor3 d_head_in;
    kernels::conv2d_backward(head_hidden_.shape, trace.head_input, params_.arrays[head_hidden_.weight].values,
                             d_hidden_act, grad->arrays[head_hidden_.weight].values,
                             grad->arrays[head_hidden_.bias].values, &d_head_in);
    for (std::size_t i = 0; i < d_head_in.size(); ++i) {
        if (feature.data[i] <= 0.0) {
            d_head_in.data[i] = 0.0;
        }
    }
    backward_feature(trace, d_head_in, *grad);
    return loss;
}

std::vector<Detection> ReferenceDetector::predict(const Tensor3& image) const
{
    const FeatureMap feature = run_encoder(image, nullptr);
    const Tensor3 out = run_head(feature, nullptr);
    const std::size_t cells = out.plane();
    const int n_anchor = static_cast<int>(config_.anchor_sizes.size());
    const auto anchor_boxes = anchors(out.height, out.width);

    std::vector<Detection> candidates;
    for (int a = 0; a < n_anchor; ++a) {
        for (std::size_t p = 0; p < cells; ++p) {
            const double score = sigmoid(out.data[a * cells + p]);
            if (!(score > config_.score_threshold)) {
                continue;
            }
            auto delta = [&](int j) { return out.data[(n_anchor + 4 * a + j) * cells + p]; };
            const BoundingBox box = clamp_box(decode_deltas(anchor_boxes[a * cells + p], delta(0), delta(1), delta(2), delta(3)),
                                              image.width, image.height);
            if (!box.degenerate()) {
                candidates.push_back({box, score});
            }
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Detection& l, const Detection& r) { return l.score > r.score; });
    return non_max_suppression(candidates, config_.nms_iou, static_cast<std::size_t>(config_.max_detections));
}

ReferenceDetector build_detector(const DetectorConfig& config, std::uint64_t seed)
{
    return ReferenceDetector(config, seed);
}

}  // namespace jointdet
