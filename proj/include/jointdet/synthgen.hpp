#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "jointdet/box.hpp"
#include "jointdet/mixup.hpp"

namespace jointdet {

inline constexpr const char* kGeneratorVersion = "synthgen-1";
inline constexpr int kManifestSchemaVersion = 1;

enum class SceneStyle { Report, Video };

/// A textured elliptical target in scene coordinates.
struct EllipseTarget {
    double cx = 0.0, cy = 0.0;
    double semi_major = 10.0, semi_minor = 8.0;
    double rotation = 0.0;  ///< radians
    double r = 0.75, g = 0.3, b = 0.3;
    double texture_freq = 0.6;
    double texture_phase = 0.0;
    /// 1 = fully opaque, lower values fade the target into the background.
    double contrast = 1.0;

    /// Whether the pixel centre (x, y) lies inside the ellipse.
    bool contains(double x, double y) const;
    /// Tight axis-aligned box of the continuous ellipse.
    BoundingBox extent() const;
};

/// Long, dark, untextured band; present in video backgrounds only.
struct FoldDistractor {
    double cx = 0.0, cy = 0.0;
    double semi_major = 20.0, semi_minor = 3.0;
    double rotation = 0.0;
    double strength = 0.3;
};

struct Highlight {
    double cx = 0.0, cy = 0.0, radius = 1.5;
};

struct BackgroundParams {
    double r = 0.85, g = 0.55, b = 0.5;
    double wave_amplitude = 0.06;
    double wave_freq_x = 0.05, wave_freq_y = 0.04;
    double wave_phase = 0.0;
    std::vector<FoldDistractor> folds;
    std::vector<Highlight> highlights;
};

struct SceneSpec {
    std::uint64_t seed = 0;
    int height = 64;
    int width = 64;
    SceneStyle style = SceneStyle::Report;
    std::vector<EllipseTarget> targets;
    BackgroundParams background;
    // Video-only settings.
    int length = 0;
    double jitter = 1.0;         ///< max camera translation per frame, pixels
    double motion_blur = 3.0;    ///< blur segment length, pixels
    double vignette = 0.45;      ///< corner darkening strength
    double max_offset = 10.0;    ///< camera stays within this radius of the start
};

struct GeneratedVideo {
    std::vector<VideoFrame> frames;
    std::vector<std::vector<BoundingBox>> boxes;  ///< per frame
    std::vector<std::pair<double, double>> camera;  ///< per-frame offset
};

/// Knobs of the synthetic domain gap and corpus sizes.
struct CorpusConfig {
    std::uint64_t seed = 0;
    int image_size = 64;
    int video_size = 64;
    int images = 2000;
    int negative_videos = 10;
    int negative_frames = 600;
    int positive_videos = 5;
    int positive_frames = 200;
    /// Keep every n-th positive frame for video-test (60 fps -> 12 fps).
    int video_test_stride = 5;
    /// Image-test share; defaults to 600 / 3056.
    int test_ratio_num = 600;
    int test_ratio_den = 3056;
    double jitter = 1.0;
    double motion_blur = 3.0;
    double vignette = 0.45;
    /// Scales every video-side appearance difference; 0 removes most of the gap.
    double gap_strength = 1.0;

    void validate() const;
    int test_image_count() const;
};

nlohmann::json corpus_config_to_json(const CorpusConfig& c);
CorpusConfig corpus_config_from_json(const nlohmann::json& j);

struct ImageRecord {
    std::string id;
    std::string split;  ///< image-train | image-test
    std::string path;   ///< relative to the corpus root
    std::vector<BoundingBox> boxes;
};

struct FrameRecord {
    int index = 0;
    std::string path;
    std::vector<BoundingBox> boxes;
};

struct VideoRecord {
    std::string id;
    bool positive = false;
    std::string split;  ///< video-train (negatives) | video-test (positives)
    int target_count = 0;
    std::vector<FrameRecord> frames;
};

struct CorpusManifest {
    int schema_version = kManifestSchemaVersion;
    std::string generator_version = kGeneratorVersion;
    CorpusConfig config;
    std::vector<ImageRecord> images;
    std::vector<VideoRecord> videos;
    std::string checksum;  ///< FNV-1a over every written file, in manifest order

    nlohmann::json to_json() const;
};

/// Random REPORT-style scene for item `index`.
SceneSpec random_report_scene(const CorpusConfig& config, std::uint64_t index);
/// Random VIDEO-style scene; `positive` places one target.
SceneSpec random_video_scene(const CorpusConfig& config, std::uint64_t index, bool positive, int length);

LabeledImage gen_report_image(const SceneSpec& spec);
GeneratedVideo gen_video(const SceneSpec& spec);

/// Generate and write a full corpus under `root`.
CorpusManifest gen_corpus(const CorpusConfig& config, const std::filesystem::path& root);

}  // namespace jointdet
