#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "jointdet/mixup.hpp"
#include "jointdet/synthgen.hpp"

namespace jointdet {

/// Indexed access to labeled items (report images or annotated video frames).
class LabeledSource {
public:
    virtual ~LabeledSource() = default;
    virtual std::size_t size() const = 0;
    virtual LabeledImage load(std::size_t index) const = 0;
    virtual const std::vector<BoundingBox>& boxes(std::size_t index) const = 0;
    virtual std::string id(std::size_t index) const = 0;
};

/// In-memory items; handy for tests and previews.
class MemorySource final : public LabeledSource {
public:
    explicit MemorySource(std::vector<LabeledImage> items) : items_(std::move(items)) {}
    std::size_t size() const override { return items_.size(); }
    LabeledImage load(std::size_t index) const override { return items_.at(index); }
    const std::vector<BoundingBox>& boxes(std::size_t index) const override { return items_.at(index).boxes; }
    std::string id(std::size_t index) const override { return "mem_" + std::to_string(index); }

private:
    std::vector<LabeledImage> items_;
};

/// Lazily loaded labeled split backed by PNG files.
class FileSource final : public LabeledSource {
public:
    struct Item {
        std::string id;
        std::filesystem::path path;
        std::vector<BoundingBox> boxes;
    };

    explicit FileSource(std::vector<Item> items) : items_(std::move(items)) {}
    std::size_t size() const override { return items_.size(); }
    LabeledImage load(std::size_t index) const override;
    const std::vector<BoundingBox>& boxes(std::size_t index) const override { return items_.at(index).boxes; }
    std::string id(std::size_t index) const override { return items_.at(index).id; }

private:
    std::vector<Item> items_;
};

struct FrameTriple {
    VideoFrame prev, mid, next;
};

/// Negative (unlabeled) videos: single frames and temporally adjacent triples.
class VideoSource {
public:
    struct Video {
        std::string id;
        std::vector<std::filesystem::path> frames;
    };

    explicit VideoSource(std::vector<Video> videos, int stride = 1);

    std::size_t frame_count() const { return frame_offsets_.back(); }
    /// Triples whose three frames lie in the same video.
    std::size_t triple_count() const { return triple_offsets_.back(); }
    std::size_t video_count() const { return videos_.size(); }

    VideoFrame frame(std::size_t global_index) const;
    FrameTriple triple(std::size_t triple_index) const;
    /// (video, middle frame) of a triple.
    std::pair<std::size_t, int> triple_location(std::size_t triple_index) const;

private:
    VideoFrame load(std::size_t video, int index) const;

    std::vector<Video> videos_;
    int stride_;
    std::vector<std::size_t> frame_offsets_;
    std::vector<std::size_t> triple_offsets_;
};

/// Splits of a generated corpus, loaded from its manifest.
struct Corpus {
    std::filesystem::path root;
    CorpusManifest manifest;
    FileSource image_train{{}};
    FileSource image_test{{}};
    FileSource video_test{{}};
    VideoSource video_train{{}};
};

/// Parse and validate <root>/manifest.json (or a manifest file path).
Corpus load_manifest(const std::filesystem::path& path);

/// Mirror pixels about the vertical axis; box (x1,y1,x2,y2) -> (W-x2, y1, W-x1, y2).
LabeledImage flip_horizontal(const LabeledImage& image);

/// Flip with the given probability (one uniform draw from rng).
LabeledImage horizontal_flip(const LabeledImage& image, Rng& rng, double probability);

struct BatchConfig {
    std::size_t batch_size = 8;
    std::size_t triple_batch_size = 8;
    double flip_probability = 0.5;
    /// Absent: samples are the (flipped) raw images with lambda 0.
    std::optional<MixupConfig> mixup;
    std::uint64_t seed = 0;
};

struct JointBatch {
    std::vector<MixupSample> mixup_samples;
    std::vector<std::size_t> image_indices;
    std::vector<FrameTriple> triples;
    int epoch = 0;
    std::size_t step = 0;
};

/// One epoch of joint batches. Every labeled image appears exactly once, in
/// a seeded shuffled order; the last batch may be short. Each sample and
/// triple draws from its own stream keyed by (seed, epoch, position), so
/// batches can be built in any order or in parallel with identical results.
class BatchStream {
public:
    BatchStream(const LabeledSource& images, const VideoSource* negatives, BatchConfig config, int epoch);

    std::size_t batch_count() const;
    JointBatch batch(std::size_t index) const;
    std::optional<JointBatch> next();
    const std::vector<std::size_t>& order() const { return order_; }

private:
    const LabeledSource& images_;
    const VideoSource* negatives_;
    BatchConfig config_;
    int epoch_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
};

}  // namespace jointdet
