#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <omp.h>

#include "fixtures.hpp"
#include "jointdet/errors.hpp"

using namespace jointdet;
namespace fs = std::filesystem;

namespace {

MemorySource tiny_images(std::size_t n, int size = 8)
{
    std::vector<LabeledImage> items;
    for (std::size_t i = 0; i < n; ++i) {
        Tensor3 t(3, size, size);
        for (std::size_t k = 0; k < t.size(); ++k) t.data[k] = double((i * 31 + k) % 97) / 96.0;
        items.push_back({t, {{1.0, 1.0, 1.0 + double(i % 5) + 1.0, 5.0}}});
    }
    return MemorySource(std::move(items));
}

bool same_batch(const JointBatch& a, const JointBatch& b)
{
    if (a.image_indices != b.image_indices || a.mixup_samples.size() != b.mixup_samples.size() ||
        a.triples.size() != b.triples.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.mixup_samples.size(); ++i) {
        const auto& x = a.mixup_samples[i];
        const auto& y = b.mixup_samples[i];
        if (!(x.pixels == y.pixels) || !(x.boxes == y.boxes) || x.lambda_used != y.lambda_used) return false;
    }
    for (std::size_t i = 0; i < a.triples.size(); ++i) {
        if (!(a.triples[i].mid.pixels == b.triples[i].mid.pixels) ||
            a.triples[i].mid.frame_index != b.triples[i].mid.frame_index) {
            return false;
        }
    }
    return true;
}

fs::path copy_manifest(const std::string& name)
{
    const fs::path out = fixture::small_corpus_dir() / name;
    fs::copy_file(fixture::small_corpus_dir() / "manifest.json", out, fs::copy_options::overwrite_existing);
    return out;
}

}  // namespace

TEST_CASE("load_manifest: splits match the generator")
{
    const Corpus& c = fixture::small_corpus();
    CHECK(c.manifest.schema_version == 1);
    CHECK(c.image_test.size() == std::size_t(c.manifest.config.test_image_count()));
    CHECK(c.image_train.size() + c.image_test.size() == 40);
    CHECK(c.video_train.video_count() == 2);
    CHECK(c.video_train.frame_count() == 32);
    CHECK(c.video_train.triple_count() == 2 * 14);
    // Every fifth positive frame: indices 0, 5, 10, 15 in each of two videos.
    CHECK(c.video_test.size() == 8);
    for (std::size_t i = 0; i < c.video_test.size(); ++i) CHECK(!c.video_test.boxes(i).empty());
    const LabeledImage first = c.image_train.load(0);
    CHECK(first.pixels.height == 64);
    CHECK(first.boxes == c.manifest.images[0].boxes);
}

TEST_CASE("load_manifest: errors name the problem")
{
    CHECK_THROWS_AS(load_manifest(fixture::small_corpus_dir() / "absent.json"), LoadError);

    const fs::path corrupt = copy_manifest("corrupt.json");
    {
        std::ifstream in(corrupt);
        std::string text((std::istreambuf_iterator<char>(in)), {});
        in.close();
        // Break the fifth line.
        std::size_t pos = 0;
        for (int i = 0; i < 4; ++i) pos = text.find('\n', pos) + 1;
        text.insert(pos, "{{{ not json\n");
        std::ofstream(corrupt) << text;
    }
    try {
        load_manifest(corrupt);
        FAIL("expected a load error");
    } catch (const LoadError& e) {
        CHECK(std::string(e.what()).find(":5:") != std::string::npos);
    }

    const fs::path version = copy_manifest("version.json");
    {
        auto j = nlohmann::json::parse(std::ifstream(version));
        j["schema_version"] = 99;
        std::ofstream(version) << j.dump(1);
    }
    CHECK_THROWS_WITH_AS(load_manifest(version), doctest::Contains("schema version 99"), LoadError);

    const fs::path missing = copy_manifest("missing.json");
    {
        auto j = nlohmann::json::parse(std::ifstream(missing));
        j["images"][2]["path"] = "images/train/nope.png";
        std::ofstream(missing) << j.dump(1);
    }
    CHECK_THROWS_WITH_AS(load_manifest(missing), doctest::Contains("nope.png"), LoadError);

    const fs::path dirty = copy_manifest("dirty.json");
    {
        auto j = nlohmann::json::parse(std::ifstream(dirty));
        for (auto& v : j["videos"])
            if (v["kind"] == "negative") v["frames"][0]["boxes"] = {{1, 1, 5, 5}};
        std::ofstream(dirty) << j.dump(1);
    }
    CHECK_THROWS_AS(load_manifest(dirty), LoadError);
    for (const auto* n : {"corrupt.json", "version.json", "missing.json", "dirty.json"})
        fs::remove(fixture::small_corpus_dir() / n);
}

TEST_CASE("horizontal flip")
{
    LabeledImage img{Tensor3(3, 10, 100), {{10, 20, 30, 40}}};
    for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels.data[i] = double(i % 13) / 12.0;
    const LabeledImage f = flip_horizontal(img);
    CHECK(f.boxes[0] == BoundingBox{70, 20, 90, 40});
    CHECK(f.pixels.at(1, 3, 0) == img.pixels.at(1, 3, 99));
    const LabeledImage ff = flip_horizontal(f);
    CHECK(ff.pixels == img.pixels);
    CHECK(ff.boxes == img.boxes);

    Rng rng = make_rng(1, {});
    for (int i = 0; i < 100; ++i) {
        const LabeledImage same = horizontal_flip(img, rng, 0.0);
        CHECK(same.pixels == img.pixels);
        CHECK(horizontal_flip(img, rng, 1.0).boxes == f.boxes);
    }
    CHECK_THROWS_AS(horizontal_flip(img, rng, 1.5), ArgumentError);
}

TEST_CASE("flip rate within 3 standard errors")
{
    const LabeledImage img{Tensor3(1, 1, 4), {{0, 0, 1, 1}}};
    Rng rng = make_rng(2, {});
    const int n = 100000;
    int flips = 0;
    for (int i = 0; i < n; ++i) flips += horizontal_flip(img, rng, 0.5).boxes[0].x_min != 0.0;
    CHECK(std::abs(double(flips) / n - 0.5) < 3.0 * std::sqrt(0.25 / n));
}

TEST_CASE("batch stream: counts, coverage and ragged tail")
{
    const MemorySource big = tiny_images(2456, 1);
    BatchConfig cfg;
    cfg.triple_batch_size = 0;
    CHECK(BatchStream(big, nullptr, cfg, 0).batch_count() == 307);

    const MemorySource images = tiny_images(30);
    BatchStream stream(images, nullptr, cfg, 3);
    CHECK(stream.batch_count() == 4);
    std::vector<std::size_t> seen;
    std::size_t batches = 0;
    while (auto b = stream.next()) {
        ++batches;
        CHECK(b->triples.empty());
        CHECK(b->epoch == 3);
        CHECK(b->mixup_samples.size() == (batches < 4 ? 8u : 6u));
        seen.insert(seen.end(), b->image_indices.begin(), b->image_indices.end());
    }
    CHECK(batches == 4);
    std::sort(seen.begin(), seen.end());
    for (std::size_t i = 0; i < 30; ++i) CHECK(seen[i] == i);

    CHECK(BatchStream(images, nullptr, cfg, 0).order() != BatchStream(images, nullptr, cfg, 1).order());
    CHECK(BatchStream(images, nullptr, cfg, 1).order() == BatchStream(images, nullptr, cfg, 1).order());
}

TEST_CASE("batch stream: configuration errors")
{
    const MemorySource images = tiny_images(5);
    BatchConfig cfg;
    cfg.triple_batch_size = 0;
    CHECK_THROWS_AS(BatchStream(MemorySource({}), nullptr, cfg, 0), ConfigError);
    cfg.batch_size = 0;
    CHECK_THROWS_AS(BatchStream(images, nullptr, cfg, 0), ConfigError);
    cfg.batch_size = 2;
    cfg.mixup = MixupConfig::discrete(0.5, 0.2);
    CHECK_THROWS_AS(BatchStream(images, nullptr, cfg, 0), ConfigError);
    const VideoSource empty({});
    cfg.mixup.reset();
    cfg.triple_batch_size = 2;
    CHECK_THROWS_AS(BatchStream(images, &empty, cfg, 0), ConfigError);
}

TEST_CASE("batch stream: p=0 mixup with no flip reproduces the raw images")
{
    const Corpus& c = fixture::small_corpus();
    BatchConfig cfg;
    cfg.flip_probability = 0.0;
    cfg.triple_batch_size = 0;
    cfg.mixup = MixupConfig::discrete(0.5, 0.0);
    const BatchStream stream(c.image_train, &c.video_train, cfg, 0);
    for (std::size_t b = 0; b < stream.batch_count(); ++b) {
        const JointBatch batch = stream.batch(b);
        for (std::size_t i = 0; i < batch.mixup_samples.size(); ++i) {
            const LabeledImage raw = c.image_train.load(batch.image_indices[i]);
            CHECK(batch.mixup_samples[i].pixels == raw.pixels);
            CHECK(batch.mixup_samples[i].boxes == raw.boxes);
            CHECK(batch.mixup_samples[i].lambda_used == 0.0);
        }
    }
}

TEST_CASE("batch stream: triples, mixup and thread-count independence")
{
    const Corpus& c = fixture::small_corpus();
    BatchConfig cfg;
    cfg.mixup = MixupConfig::discrete(0.5, 0.5);
    cfg.seed = 9;
    const BatchStream stream(c.image_train, &c.video_train, cfg, 2);
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const JointBatch serial = stream.batch(1);
    omp_set_num_threads(4);
    const JointBatch parallel = stream.batch(1);
    omp_set_num_threads(saved);
    CHECK(same_batch(serial, parallel));

    REQUIRE(serial.triples.size() == 8);
    for (const auto& t : serial.triples) {
        CHECK(t.prev.source_video == t.mid.source_video);
        CHECK(t.next.source_video == t.mid.source_video);
        CHECK(t.prev.frame_index + 1 == t.mid.frame_index);
        CHECK(t.mid.frame_index + 1 == t.next.frame_index);
        CHECK(t.mid.source_video.rfind("neg_", 0) == 0);
    }
    bool blended = false;
    for (const auto& s : serial.mixup_samples) {
        CHECK((s.lambda_used == 0.0 || s.lambda_used == 0.5));
        blended = blended || s.lambda_used == 0.5;
    }
    CHECK(blended);

    const BatchStream again(c.image_train, &c.video_train, cfg, 2);
    for (std::size_t b = 0; b < stream.batch_count(); ++b) CHECK(same_batch(stream.batch(b), again.batch(b)));
}

TEST_CASE("video source: triple addressing stays inside one video")
{
    const VideoSource& v = fixture::small_corpus().video_train;
    for (std::size_t t = 0; t < v.triple_count(); ++t) {
        const auto [video, mid] = v.triple_location(t);
        CHECK(mid >= 1);
        CHECK(mid <= 14);
        CHECK(video < 2);
    }
    CHECK_THROWS_AS(v.triple_location(v.triple_count()), ArgumentError);
    CHECK_THROWS_AS(v.frame(v.frame_count()), ArgumentError);
}
