#include "jointdet/synthgen.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "jointdet/errors.hpp"
#include "jointdet/image_io.hpp"
#include "jointdet/rng.hpp"

namespace jointdet {

namespace fs = std::filesystem;

namespace {

struct Rgb {
    double r = 0.0, g = 0.0, b = 0.0;
};

Rgb lerp(const Rgb& a, const Rgb& b, double t)
{
    return {a.r + t * (b.r - a.r), a.g + t * (b.g - a.g), a.b + t * (b.b - a.b)};
}

// Squared normalized radius of (x, y) in an ellipse frame; also returns the
// local (u, v) coordinates.
double ellipse_radius2(double x, double y, double cx, double cy, double a, double b, double rot, double& u, double& v)
{
    const double dx = x - cx, dy = y - cy;
    const double c = std::cos(rot), s = std::sin(rot);
    u = dx * c + dy * s;
    v = -dx * s + dy * c;
    return (u * u) / (a * a) + (v * v) / (b * b);
}

Rgb shade_scene(const SceneSpec& spec, double x, double y)
{
    const auto& bg = spec.background;
    const double wave = bg.wave_amplitude * std::sin(bg.wave_freq_x * x + bg.wave_freq_y * y + bg.wave_phase) +
                        0.5 * bg.wave_amplitude *
                            std::sin(1.7 * bg.wave_freq_y * x - 1.3 * bg.wave_freq_x * y + 2.0 * bg.wave_phase);
    Rgb color{bg.r * (1.0 + wave), bg.g * (1.0 + wave), bg.b * (1.0 + wave)};

    double u = 0.0, v = 0.0;
    for (const auto& fold : bg.folds) {
        const double d2 = ellipse_radius2(x, y, fold.cx, fold.cy, fold.semi_major, fold.semi_minor, fold.rotation, u, v);
        if (d2 < 1.0) {
            const double k = 1.0 - fold.strength * (1.0 - d2);
            color = {color.r * k, color.g * k * 0.92, color.b * k * 0.92};
        }
    }
    for (const auto& t : spec.targets) {
        const double d2 = ellipse_radius2(x, y, t.cx, t.cy, t.semi_major, t.semi_minor, t.rotation, u, v);
        if (d2 < 1.0) {
            const double shade = 0.8 + 0.35 * (1.0 - d2);
            const double tex = 1.0 + 0.12 * std::sin(t.texture_freq * u + t.texture_phase) *
                                         std::sin(1.3 * t.texture_freq * v + t.texture_phase);
            const double rim = d2 > 0.8 ? 0.85 : 1.0;
            const Rgb target{t.r * shade * tex * rim, t.g * shade * tex * rim, t.b * shade * tex * rim};
            color = lerp(color, target, t.contrast);
        }
    }
    for (const auto& h : bg.highlights) {
        const double d2 = ((x - h.cx) * (x - h.cx) + (y - h.cy) * (y - h.cy)) / (h.radius * h.radius);
        if (d2 < 1.0) {
            color = lerp(color, Rgb{1.0, 1.0, 0.97}, 0.9 * (1.0 - d2));
        }
    }
    return color;
}

void put(Tensor3& t, int y, int x, const Rgb& c)
{
    t.at(0, y, x) = std::clamp(c.r, 0.0, 1.0);
    if (t.channels == 3) {
        t.at(1, y, x) = std::clamp(c.g, 0.0, 1.0);
        t.at(2, y, x) = std::clamp(c.b, 0.0, 1.0);
    }
}

EllipseTarget random_target(Rng& rng, double a_lo, double a_hi)
{
    EllipseTarget t;
    t.semi_major = uniform(rng, a_lo, a_hi);
    t.semi_minor = t.semi_major * uniform(rng, 0.7, 1.0);
    t.rotation = uniform(rng, 0.0, std::numbers::pi);
    t.r = uniform(rng, 0.65, 0.8);
    t.g = uniform(rng, 0.2, 0.35);
    t.b = uniform(rng, 0.22, 0.35);
    t.texture_freq = uniform(rng, 0.4, 0.9);
    t.texture_phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    return t;
}

BackgroundParams random_background(Rng& rng, double r, double g, double b)
{
    BackgroundParams bg;
    bg.r = r + uniform(rng, -0.05, 0.05);
    bg.g = g + uniform(rng, -0.06, 0.06);
    bg.b = b + uniform(rng, -0.05, 0.05);
    bg.wave_amplitude = uniform(rng, 0.03, 0.08);
    bg.wave_freq_x = uniform(rng, 0.02, 0.08);
    bg.wave_freq_y = uniform(rng, 0.02, 0.08);
    bg.wave_phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    return bg;
}

bool inside(const BoundingBox& box, double lo, double hi_x, double hi_y)
{
    return box.x_min >= lo && box.y_min >= lo && box.x_max <= hi_x && box.y_max <= hi_y;
}

std::string zero_pad(std::uint64_t v, int width)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%0*llu", width, static_cast<unsigned long long>(v));
    return buf;
}

nlohmann::json box_json(const BoundingBox& b)
{
    return {b.x_min, b.y_min, b.x_max, b.y_max};
}

nlohmann::json boxes_json(const std::vector<BoundingBox>& boxes)
{
    auto out = nlohmann::json::array();
    for (const auto& b : boxes) {
        out.push_back(box_json(b));
    }
    return out;
}

}  // namespace

bool EllipseTarget::contains(double x, double y) const
{
    double u = 0.0, v = 0.0;
    return ellipse_radius2(x, y, cx, cy, semi_major, semi_minor, rotation, u, v) < 1.0;
}

BoundingBox EllipseTarget::extent() const
{
    const double c = std::cos(rotation), s = std::sin(rotation);
    const double hw = std::sqrt(semi_major * semi_major * c * c + semi_minor * semi_minor * s * s);
    const double hh = std::sqrt(semi_major * semi_major * s * s + semi_minor * semi_minor * c * c);
    return {cx - hw, cy - hh, cx + hw, cy + hh};
}

void CorpusConfig::validate() const
{
    if (image_size < 16 || video_size < 16) {
        throw ConfigError("corpus: image and video sizes must be at least 16");
    }
    if (images < 10) {
        throw ConfigError("corpus: at least 10 report images are required");
    }
    if (negative_videos < 1 || positive_videos < 1) {
        throw ConfigError("corpus: at least one negative and one positive video are required");
    }
    if (negative_frames < 3 || positive_frames < 3) {
        throw ConfigError("corpus: videos need at least 3 frames");
    }
    if (video_test_stride < 1) {
        throw ConfigError("corpus: video_test_stride must be positive");
    }
    if (test_ratio_num < 0 || test_ratio_den <= test_ratio_num) {
        throw ConfigError("corpus: test ratio must lie in [0,1)");
    }
    if (jitter < 0.0 || motion_blur < 0.0 || vignette < 0.0 || vignette >= 1.0 || gap_strength < 0.0) {
        throw ConfigError("corpus: appearance parameters out of range");
    }
}

int CorpusConfig::test_image_count() const
{
    return static_cast<int>(static_cast<long long>(images) * test_ratio_num / test_ratio_den);
}

nlohmann::json corpus_config_to_json(const CorpusConfig& c)
{
    return {{"seed", c.seed},
            {"image_size", c.image_size},
            {"video_size", c.video_size},
            {"images", c.images},
            {"negative_videos", c.negative_videos},
            {"negative_frames", c.negative_frames},
            {"positive_videos", c.positive_videos},
            {"positive_frames", c.positive_frames},
            {"video_test_stride", c.video_test_stride},
            {"test_ratio_num", c.test_ratio_num},
            {"test_ratio_den", c.test_ratio_den},
            {"jitter", c.jitter},
            {"motion_blur", c.motion_blur},
            {"vignette", c.vignette},
            {"gap_strength", c.gap_strength}};
}

CorpusConfig corpus_config_from_json(const nlohmann::json& j)
{
    CorpusConfig c;
    c.seed = j.at("seed").get<std::uint64_t>();
    c.image_size = j.at("image_size").get<int>();
    c.video_size = j.at("video_size").get<int>();
    c.images = j.at("images").get<int>();
    c.negative_videos = j.at("negative_videos").get<int>();
    c.negative_frames = j.at("negative_frames").get<int>();
    c.positive_videos = j.at("positive_videos").get<int>();
    c.positive_frames = j.at("positive_frames").get<int>();
    c.video_test_stride = j.at("video_test_stride").get<int>();
    c.test_ratio_num = j.at("test_ratio_num").get<int>();
    c.test_ratio_den = j.at("test_ratio_den").get<int>();
    c.jitter = j.at("jitter").get<double>();
    c.motion_blur = j.at("motion_blur").get<double>();
    c.vignette = j.at("vignette").get<double>();
    c.gap_strength = j.at("gap_strength").get<double>();
    return c;
}

SceneSpec random_report_scene(const CorpusConfig& config, std::uint64_t index)
{
    Rng rng = make_rng(config.seed, {1, index});
    SceneSpec spec;
    spec.seed = derive_seed(config.seed, {1, index});
    spec.height = spec.width = config.image_size;
    spec.style = SceneStyle::Report;
    spec.background = random_background(rng, 0.87, 0.56, 0.5);
    const double size = config.image_size;
    const double scale = size / 64.0;
    if (uniform01(rng) < 0.5) {
        spec.background.highlights.push_back(
            {uniform(rng, 0.0, size), uniform(rng, 0.0, size), uniform(rng, 1.0, 2.0) * scale});
    }

    // Close-up: one large target near the centre, sometimes a second one.
    EllipseTarget first = random_target(rng, 9.0 * scale, 14.0 * scale);
    for (int attempt = 0; attempt < 50; ++attempt) {
        first.cx = size / 2 + uniform(rng, -8.0, 8.0) * scale;
        first.cy = size / 2 + uniform(rng, -8.0, 8.0) * scale;
        if (inside(first.extent(), 1.0, size - 1.0, size - 1.0)) {
            break;
        }
    }
    spec.targets.push_back(first);

    if (uniform01(rng) < 0.2) {
        EllipseTarget second = random_target(rng, 6.0 * scale, 9.0 * scale);
        for (int attempt = 0; attempt < 30; ++attempt) {
            second.cx = uniform(rng, 0.0, size);
            second.cy = uniform(rng, 0.0, size);
            const BoundingBox e = second.extent();
            const BoundingBox f = first.extent();
            const BoundingBox grown{f.x_min - 2, f.y_min - 2, f.x_max + 2, f.y_max + 2};
            if (inside(e, 1.0, size - 1.0, size - 1.0) && overlap_iou(e, grown) == 0.0) {
                spec.targets.push_back(second);
                break;
            }
        }
    }
    return spec;
}

SceneSpec random_video_scene(const CorpusConfig& config, std::uint64_t index, bool positive, int length)
{
    Rng rng = make_rng(config.seed, {positive ? 3ULL : 2ULL, index});
    const double gap = config.gap_strength;
    SceneSpec spec;
    spec.seed = derive_seed(config.seed, {positive ? 3ULL : 2ULL, index});
    spec.height = spec.width = config.video_size;
    spec.style = SceneStyle::Video;
    spec.length = length;
    spec.jitter = config.jitter;
    spec.motion_blur = config.motion_blur * gap;
    spec.vignette = config.vignette * gap;
    const double size = config.video_size;
    const double scale = size / 64.0;
    spec.max_offset = 6.0 * scale;

    // Live video: warmer, darker tissue with folds, bright specular spots.
    spec.background = random_background(rng, 0.87 - 0.07 * gap, 0.56 - 0.02 * gap, 0.5 - 0.1 * gap);
    const double lo = -spec.max_offset - 10.0 * scale;
    const double hi = size + spec.max_offset + 10.0 * scale;
    const int folds = static_cast<int>(std::lround(gap * uniform(rng, 3.0, 6.0)));
    for (int i = 0; i < folds; ++i) {
        FoldDistractor f;
        f.cx = uniform(rng, lo, hi);
        f.cy = uniform(rng, lo, hi);
        f.semi_major = uniform(rng, 10.0, 22.0) * scale;
        f.semi_minor = uniform(rng, 2.5, 5.0) * scale;
        f.rotation = uniform(rng, 0.0, std::numbers::pi);
        f.strength = uniform(rng, 0.25, 0.45);
        spec.background.folds.push_back(f);
    }
    const int highlights = static_cast<int>(std::lround(gap * uniform(rng, 2.0, 6.0)));
    for (int i = 0; i < highlights; ++i) {
        spec.background.highlights.push_back(
            {uniform(rng, lo, hi), uniform(rng, lo, hi), uniform(rng, 1.0, 2.5) * scale});
    }

    if (positive) {
        // Far view: smaller, fainter and off-centre, but always within the
        // frame for any camera offset the path can reach.
        EllipseTarget t = random_target(rng, (9.0 - 2.0 * gap) * scale, (14.0 - 3.0 * gap) * scale);
        t.contrast = 1.0 - 0.25 * gap;
        const BoundingBox local = t.extent();
        const double half = std::max(local.width(), local.height()) / 2.0;
        const double reach = std::max(0.0, size / 2 - half - spec.max_offset - 1.0);
        const double radius = std::min(uniform(rng, 6.0, 14.0) * scale, reach);
        const double angle = uniform(rng, 0.0, 2.0 * std::numbers::pi);
        t.cx = size / 2 + radius * std::cos(angle);
        t.cy = size / 2 + radius * std::sin(angle);
        spec.targets.push_back(t);
    }
    return spec;
}

LabeledImage gen_report_image(const SceneSpec& spec)
{
    if (spec.style != SceneStyle::Report) {
        throw ConfigError("gen_report_image: scene style must be REPORT");
    }
    if (spec.height < 1 || spec.width < 1) {
        throw ConfigError("gen_report_image: image size must be positive");
    }
    LabeledImage out;
    out.pixels = Tensor3(3, spec.height, spec.width);
    for (int y = 0; y < spec.height; ++y) {
        for (int x = 0; x < spec.width; ++x) {
            put(out.pixels, y, x, shade_scene(spec, x + 0.5, y + 0.5));
        }
    }
    for (const auto& t : spec.targets) {
        const BoundingBox e = t.extent();
        if (!inside(e, 0.0, spec.width, spec.height)) {
            throw ConfigError("gen_report_image: REPORT targets must lie fully inside the image");
        }
        out.boxes.push_back(e);
    }
    return out;
}

GeneratedVideo gen_video(const SceneSpec& spec)
{
    if (spec.style != SceneStyle::Video) {
        throw ConfigError("gen_video: scene style must be VIDEO");
    }
    if (spec.length < 3) {
        throw ArgumentError("gen_video: at least 3 frames are required");
    }
    if (spec.jitter < 0.0) {
        throw ConfigError("gen_video: jitter must be >= 0");
    }
    Rng rng = make_rng(spec.seed, {0x63616d});  // camera
    const double blur_angle = uniform(rng, 0.0, std::numbers::pi);
    const double bdx = std::cos(blur_angle), bdy = std::sin(blur_angle);
    constexpr int kBlurTaps = 5;

    GeneratedVideo video;
    double ox = 0.0, oy = 0.0, vx = 0.0, vy = 0.0;
    std::normal_distribution<double> kick(0.0, 1.0);
    const double cx = spec.width / 2.0, cy = spec.height / 2.0;
    const double corner2 = cx * cx + cy * cy;

    for (int t = 0; t < spec.length; ++t) {
        if (t > 0 && spec.jitter > 0.0) {
            vx += 0.35 * spec.jitter * kick(rng);
            vy += 0.35 * spec.jitter * kick(rng);
            const double speed = std::hypot(vx, vy);
            if (speed > spec.jitter) {
                vx *= spec.jitter / speed;
                vy *= spec.jitter / speed;
            }
            ox += vx;
            oy += vy;
            const double dist = std::hypot(ox, oy);
            if (dist > spec.max_offset) {
                ox *= spec.max_offset / dist;
                oy *= spec.max_offset / dist;
                vx *= -0.5;
                vy *= -0.5;
            }
        }
        VideoFrame frame;
        frame.frame_index = t;
        frame.pixels = Tensor3(3, spec.height, spec.width);
        for (int y = 0; y < spec.height; ++y) {
            for (int x = 0; x < spec.width; ++x) {
                Rgb acc;
                for (int k = 0; k < kBlurTaps; ++k) {
                    const double s = spec.motion_blur * (static_cast<double>(k) / (kBlurTaps - 1) - 0.5);
                    const Rgb c = shade_scene(spec, x + 0.5 + ox + s * bdx, y + 0.5 + oy + s * bdy);
                    acc = {acc.r + c.r, acc.g + c.g, acc.b + c.b};
                }
                const double rx = x + 0.5 - cx, ry = y + 0.5 - cy;
                const double light = (1.0 - spec.vignette * (rx * rx + ry * ry) / corner2) / kBlurTaps;
                put(frame.pixels, y, x, {acc.r * light, acc.g * light, acc.b * light});
            }
        }
        std::vector<BoundingBox> boxes;
        for (const auto& target : spec.targets) {
            const BoundingBox e = target.extent();
            const BoundingBox shifted{e.x_min - ox, e.y_min - oy, e.x_max - ox, e.y_max - oy};
            const BoundingBox clipped = clamp_box(shifted, spec.width, spec.height);
            if (!clipped.degenerate() && clipped.area() >= 0.5 * shifted.area()) {
                boxes.push_back(clipped);
            }
        }
        video.frames.push_back(std::move(frame));
        video.boxes.push_back(std::move(boxes));
        video.camera.emplace_back(ox, oy);
    }
    return video;
}

nlohmann::json CorpusManifest::to_json() const
{
    nlohmann::json j;
    j["schema_version"] = schema_version;
    j["generator_version"] = generator_version;
    j["config"] = corpus_config_to_json(config);
    auto images_json = nlohmann::json::array();
    for (const auto& im : images) {
        images_json.push_back({{"id", im.id}, {"split", im.split}, {"path", im.path}, {"boxes", boxes_json(im.boxes)}});
    }
    j["images"] = std::move(images_json);
    auto videos_json = nlohmann::json::array();
    for (const auto& v : videos) {
        auto frames = nlohmann::json::array();
        for (const auto& f : v.frames) {
            frames.push_back({{"index", f.index}, {"path", f.path}, {"boxes", boxes_json(f.boxes)}});
        }
        videos_json.push_back({{"id", v.id},
                               {"kind", v.positive ? "positive" : "negative"},
                               {"split", v.split},
                               {"target_count", v.target_count},
                               {"frames", std::move(frames)}});
    }
    j["videos"] = std::move(videos_json);
    j["checksum"] = checksum;
    return j;
}

CorpusManifest gen_corpus(const CorpusConfig& config, const fs::path& root)
{
    config.validate();
    CorpusManifest manifest;
    manifest.config = config;

    try {
        fs::create_directories(root / "images" / "train");
        fs::create_directories(root / "images" / "test");
    } catch (const fs::filesystem_error& e) {
        throw IoError(std::string("cannot create corpus directory: ") + e.what());
    }

    const int n_test = config.test_image_count();
    const int n_train = config.images - n_test;
    manifest.images.resize(static_cast<std::size_t>(config.images));
    std::vector<std::string> errors(static_cast<std::size_t>(config.images));

#pragma omp parallel for schedule(dynamic, 16)
    for (int i = 0; i < config.images; ++i) {
        try {
            const bool test = i >= n_train;
            auto& rec = manifest.images[i];
            rec.id = "img_" + zero_pad(i, 6);
            rec.split = test ? "image-test" : "image-train";
            rec.path = std::string("images/") + (test ? "test/" : "train/") + rec.id + ".png";
            const LabeledImage image = gen_report_image(random_report_scene(config, i));
            rec.boxes = image.boxes;
            write_png(root / rec.path, image.pixels);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }

    struct Job {
        int video;
        bool positive;
        int index;
    };
    std::vector<Job> jobs;
    for (int v = 0; v < config.negative_videos; ++v) {
        jobs.push_back({static_cast<int>(jobs.size()), false, v});
    }
    for (int v = 0; v < config.positive_videos; ++v) {
        jobs.push_back({static_cast<int>(jobs.size()), true, v});
    }
    manifest.videos.resize(jobs.size());
    errors.resize(errors.size() + jobs.size());

#pragma omp parallel for schedule(dynamic, 1)
    for (int j = 0; j < static_cast<int>(jobs.size()); ++j) {
        const Job& job = jobs[j];
        try {
            auto& rec = manifest.videos[j];
            rec.id = std::string(job.positive ? "pos_" : "neg_") + zero_pad(job.index, 3);
            rec.positive = job.positive;
            rec.split = job.positive ? "video-test" : "video-train";
            const int length = job.positive ? config.positive_frames : config.negative_frames;
            const SceneSpec spec = random_video_scene(config, job.index, job.positive, length);
            rec.target_count = static_cast<int>(spec.targets.size());
            const GeneratedVideo video = gen_video(spec);
            const fs::path dir = root / "videos" / rec.id;
            fs::create_directories(dir);
            for (int t = 0; t < length; ++t) {
                FrameRecord frame;
                frame.index = t;
                frame.path = "videos/" + rec.id + "/frame_" + zero_pad(t, 6) + ".png";
                frame.boxes = video.boxes[t];
                write_png(root / frame.path, video.frames[t].pixels);
                rec.frames.push_back(std::move(frame));
            }
        } catch (const std::exception& e) {
            errors[config.images + j] = e.what();
        }
    }
    for (const auto& e : errors) {
        if (!e.empty()) {
            throw IoError("corpus generation failed: " + e);
        }
    }

    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix_path = [&](const std::string& rel) {
        h = fnv1a64(std::span(reinterpret_cast<const unsigned char*>(rel.data()), rel.size()), h);
        h = hash_file(root / rel, h);
    };
    for (const auto& im : manifest.images) {
        mix_path(im.path);
    }
    for (const auto& v : manifest.videos) {
        for (const auto& f : v.frames) {
            mix_path(f.path);
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    manifest.checksum = hex;

    std::ofstream out(root / "manifest.json");
    if (!out) {
        throw IoError("cannot write " + (root / "manifest.json").string());
    }
    out << manifest.to_json().dump(1) << '\n';
    if (!out) {
        throw IoError("failed writing manifest");
    }
    return manifest;
}

}  // namespace jointdet
