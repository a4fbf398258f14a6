#include "jointdet/datapipe.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "jointdet/errors.hpp"
#include "jointdet/image_io.hpp"

namespace jointdet {

namespace fs = std::filesystem;

LabeledImage FileSource::load(std::size_t index) const
{
    const Item& item = items_.at(index);
    return {read_png(item.path), item.boxes};
}

VideoSource::VideoSource(std::vector<Video> videos, int stride) : videos_(std::move(videos)), stride_(stride)
{
    if (stride_ < 1) {
        throw ConfigError("video source: triple stride must be positive");
    }
    frame_offsets_.push_back(0);
    triple_offsets_.push_back(0);
    for (const auto& v : videos_) {
        const std::size_t n = v.frames.size();
        frame_offsets_.push_back(frame_offsets_.back() + n);
        const std::size_t span = 2 * static_cast<std::size_t>(stride_);
        triple_offsets_.push_back(triple_offsets_.back() + (n > span ? n - span : 0));
    }
}

VideoFrame VideoSource::load(std::size_t video, int index) const
{
    const auto& v = videos_.at(video);
    return {read_png(v.frames.at(static_cast<std::size_t>(index))), index, v.id};
}

VideoFrame VideoSource::frame(std::size_t global_index) const
{
    if (global_index >= frame_count()) {
        throw ArgumentError("video source: frame index out of range");
    }
    const auto it = std::upper_bound(frame_offsets_.begin(), frame_offsets_.end(), global_index);
    const std::size_t video = static_cast<std::size_t>(it - frame_offsets_.begin()) - 1;
    return load(video, static_cast<int>(global_index - frame_offsets_[video]));
}

std::pair<std::size_t, int> VideoSource::triple_location(std::size_t triple_index) const
{
    if (triple_index >= triple_count()) {
        throw ArgumentError("video source: triple index out of range");
    }
    const auto it = std::upper_bound(triple_offsets_.begin(), triple_offsets_.end(), triple_index);
    const std::size_t video = static_cast<std::size_t>(it - triple_offsets_.begin()) - 1;
    return {video, static_cast<int>(triple_index - triple_offsets_[video]) + stride_};
}

FrameTriple VideoSource::triple(std::size_t triple_index) const
{
    const auto [video, mid] = triple_location(triple_index);
    return {load(video, mid - stride_), load(video, mid), load(video, mid + stride_)};
}

namespace {

std::vector<BoundingBox> parse_boxes(const nlohmann::json& j)
{
    std::vector<BoundingBox> out;
    for (const auto& b : j) {
        if (!b.is_array() || b.size() != 4) {
            throw LoadError("box must be an array of four numbers");
        }
        out.push_back({b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()});
    }
    return out;
}

fs::path checked(const fs::path& root, const std::string& rel)
{
    fs::path p = root / rel;
    if (!fs::exists(p)) {
        throw LoadError("missing corpus file: " + p.string());
    }
    return p;
}

}  // namespace

Corpus load_manifest(const fs::path& path)
{
    const fs::path file = fs::is_directory(path) ? path / "manifest.json" : path;
    std::ifstream in(file);
    if (!in) {
        throw LoadError("cannot open manifest " + file.string());
    }
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();

    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        const std::size_t upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
        const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
        throw LoadError(file.string() + ":" + std::to_string(line) + ": malformed manifest line");
    }

    Corpus corpus;
    corpus.root = file.parent_path();
    auto& m = corpus.manifest;
    std::vector<FileSource::Item> train, test, vtest;
    std::vector<VideoSource::Video> negatives;
    try {
        m.schema_version = j.at("schema_version").get<int>();
        if (m.schema_version != kManifestSchemaVersion) {
            throw LoadError(file.string() + ": unsupported manifest schema version " + std::to_string(m.schema_version));
        }
        m.generator_version = j.at("generator_version").get<std::string>();
        m.config = corpus_config_from_json(j.at("config"));
        m.checksum = j.at("checksum").get<std::string>();

        for (const auto& im : j.at("images")) {
            ImageRecord rec{im.at("id").get<std::string>(), im.at("split").get<std::string>(),
                            im.at("path").get<std::string>(), parse_boxes(im.at("boxes"))};
            FileSource::Item item{rec.id, checked(corpus.root, rec.path), rec.boxes};
            if (rec.split == "image-train") {
                train.push_back(std::move(item));
            } else if (rec.split == "image-test") {
                test.push_back(std::move(item));
            } else {
                throw LoadError(file.string() + ": image " + rec.id + " has unknown split '" + rec.split + "'");
            }
            m.images.push_back(std::move(rec));
        }

        const int stride = m.config.video_test_stride;
        for (const auto& v : j.at("videos")) {
            VideoRecord rec;
            rec.id = v.at("id").get<std::string>();
            rec.positive = v.at("kind").get<std::string>() == "positive";
            rec.split = v.at("split").get<std::string>();
            rec.target_count = v.at("target_count").get<int>();
            VideoSource::Video video{rec.id, {}};
            for (const auto& f : v.at("frames")) {
                FrameRecord fr{f.at("index").get<int>(), f.at("path").get<std::string>(), parse_boxes(f.at("boxes"))};
                const fs::path p = checked(corpus.root, fr.path);
                if (rec.positive) {
                    if (fr.index % stride == 0) {
                        vtest.push_back({rec.id + "/" + std::to_string(fr.index), p, fr.boxes});
                    }
                } else {
                    if (!fr.boxes.empty()) {
                        throw LoadError(file.string() + ": negative video " + rec.id + " has boxes");
                    }
                    video.frames.push_back(p);
                }
                rec.frames.push_back(std::move(fr));
            }
            if (!rec.positive) {
                negatives.push_back(std::move(video));
            }
            m.videos.push_back(std::move(rec));
        }
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(file.string() + ": manifest does not match schema: " + e.what());
    }

    corpus.image_train = FileSource(std::move(train));
    corpus.image_test = FileSource(std::move(test));
    corpus.video_test = FileSource(std::move(vtest));
    corpus.video_train = VideoSource(std::move(negatives));
    return corpus;
}

LabeledImage flip_horizontal(const LabeledImage& image)
{
    LabeledImage out = image;
    const Tensor3& src = image.pixels;
    for (int c = 0; c < src.channels; ++c) {
        for (int y = 0; y < src.height; ++y) {
            for (int x = 0; x < src.width; ++x) {
                out.pixels.at(c, y, x) = src.at(c, y, src.width - 1 - x);
            }
        }
    }
    const double w = src.width;
    for (auto& b : out.boxes) {
        b = {w - b.x_max, b.y_min, w - b.x_min, b.y_max};
    }
    return out;
}

LabeledImage horizontal_flip(const LabeledImage& image, Rng& rng, double probability)
{
    if (!(probability >= 0.0 && probability <= 1.0)) {
        throw ArgumentError("horizontal_flip: probability must lie in [0,1]");
    }
    return uniform01(rng) < probability ? flip_horizontal(image) : image;
}

BatchStream::BatchStream(const LabeledSource& images, const VideoSource* negatives, BatchConfig config, int epoch)
    : images_(images), negatives_(negatives), config_(std::move(config)), epoch_(epoch)
{
    if (images_.size() == 0) {
        throw ConfigError("joint_batches: image-train split is empty");
    }
    if (config_.batch_size == 0) {
        throw ConfigError("joint_batches: batch size must be at least 1");
    }
    if (config_.mixup) {
        config_.mixup->validate();
    }
    const bool needs_frames = config_.mixup.has_value();
    const bool needs_triples = config_.triple_batch_size > 0;
    if ((needs_frames && (negatives_ == nullptr || negatives_->frame_count() == 0)) ||
        (needs_triples && (negatives_ == nullptr || negatives_->triple_count() == 0))) {
        throw ConfigError("joint_batches: video-train split is empty but mixup or triples were requested");
    }
    if (!(config_.flip_probability >= 0.0 && config_.flip_probability <= 1.0)) {
        throw ConfigError("joint_batches: flip probability must lie in [0,1]");
    }
    order_.resize(images_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) {
        order_[i] = i;
    }
    Rng shuffle_rng = make_rng(config_.seed, {0x7368756666, static_cast<std::uint64_t>(epoch_)});
    std::shuffle(order_.begin(), order_.end(), shuffle_rng);
}

std::size_t BatchStream::batch_count() const
{
    return (order_.size() + config_.batch_size - 1) / config_.batch_size;
}

JointBatch BatchStream::batch(std::size_t index) const
{
    if (index >= batch_count()) {
        throw ArgumentError("joint_batches: batch index out of range");
    }
    JointBatch out;
    out.epoch = epoch_;
    out.step = index;
    const std::size_t begin = index * config_.batch_size;
    const std::size_t end = std::min(order_.size(), begin + config_.batch_size);
    const std::size_t n = end - begin;
    out.mixup_samples.resize(n);
    out.image_indices.assign(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                             order_.begin() + static_cast<std::ptrdiff_t>(end));
    out.triples.resize(config_.triple_batch_size);
    const auto e = static_cast<std::uint64_t>(epoch_);

    const int total = static_cast<int>(n + config_.triple_batch_size);
    std::vector<std::string> errors(static_cast<std::size_t>(total));
#pragma omp parallel for schedule(dynamic, 1)
    for (int w = 0; w < total; ++w) {
        try {
            if (static_cast<std::size_t>(w) < n) {
                const std::uint64_t pos = begin + static_cast<std::size_t>(w);
                Rng flip_rng = make_rng(config_.seed, {e, pos, 1});
                LabeledImage image = horizontal_flip(images_.load(out.image_indices[w]), flip_rng, config_.flip_probability);
                if (config_.mixup) {
                    Rng frame_rng = make_rng(config_.seed, {e, pos, 2});
                    Rng lambda_rng = make_rng(config_.seed, {e, pos, 3});
                    const auto pick = std::uniform_int_distribution<std::size_t>(0, negatives_->frame_count() - 1)(frame_rng);
                    out.mixup_samples[w] = make_virtual_sample(image, negatives_->frame(pick), *config_.mixup, lambda_rng);
                } else {
                    out.mixup_samples[w] = {std::move(image.pixels), std::move(image.boxes), 0.0};
                }
            } else {
                const std::uint64_t pos = index * config_.triple_batch_size + (static_cast<std::size_t>(w) - n);
                Rng triple_rng = make_rng(config_.seed, {e, pos, 4});
                const auto pick =
                    std::uniform_int_distribution<std::size_t>(0, negatives_->triple_count() - 1)(triple_rng);
                out.triples[static_cast<std::size_t>(w) - n] = negatives_->triple(pick);
            }
        } catch (const std::exception& ex) {
            errors[w] = ex.what();
        }
    }
    for (const auto& err : errors) {
        if (!err.empty()) {
            throw Error("joint_batches: " + err);
        }
    }
    return out;
}

std::optional<JointBatch> BatchStream::next()
{
    if (cursor_ >= batch_count()) {
        return std::nullopt;
    }
    return batch(cursor_++);
}

}  // namespace jointdet
