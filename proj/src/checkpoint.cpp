#include "jointdet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "jointdet/errors.hpp"

namespace jointdet {

namespace {

constexpr const char* kMagic = "JDCKPT1";

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where)
{
    for (const auto& item : j.items()) {
        if (!known.contains(item.key())) {
            throw ConfigError(where + ": unknown key '" + item.key() + "'");
        }
    }
}

}  // namespace

nlohmann::json detector_config_to_json(const DetectorConfig& c)
{
    nlohmann::json anchors = nlohmann::json::array();
    for (const auto& a : c.anchor_sizes) {
        anchors.push_back({a.width, a.height});
    }
    return {{"input_channels", c.input_channels}, {"feature_channels", c.feature_channels},
            {"feature_stride", c.feature_stride}, {"anchor_sizes", anchors},
            {"score_threshold", c.score_threshold}, {"nms_iou", c.nms_iou},
            {"max_detections", c.max_detections},   {"frozen_norm", c.frozen_norm}};
}

DetectorConfig detector_config_from_json(const nlohmann::json& j)
{
    if (!j.is_object()) {
        throw ConfigError("detector config must be an object");
    }
    reject_unknown(j,
                   {"input_channels", "feature_channels", "feature_stride", "anchor_sizes", "score_threshold",
                    "nms_iou", "max_detections", "frozen_norm"},
                   "detector config");
    DetectorConfig c;
    try {
        c.input_channels = j.value("input_channels", c.input_channels);
        c.feature_channels = j.value("feature_channels", c.feature_channels);
        c.feature_stride = j.value("feature_stride", c.feature_stride);
        c.score_threshold = j.value("score_threshold", c.score_threshold);
        c.nms_iou = j.value("nms_iou", c.nms_iou);
        c.max_detections = j.value("max_detections", c.max_detections);
        c.frozen_norm = j.value("frozen_norm", c.frozen_norm);
        if (j.contains("anchor_sizes")) {
            c.anchor_sizes.clear();
            for (const auto& a : j.at("anchor_sizes")) {
                c.anchor_sizes.push_back({a.at(0).get<double>(), a.at(1).get<double>()});
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("detector config: ") + e.what());
    }
    c.validate();
    return c;
}

Checkpoint make_checkpoint(const ReferenceDetector& detector, const Parameters* velocity)
{
    Checkpoint ck;
    ck.config = detector.config();
    ck.parameters = detector.parameters();
    ck.buffers = detector.buffers();
    if (velocity != nullptr) {
        ck.velocity = *velocity;
    }
    ck.epoch = detector.epoch;
    ck.step = detector.step;
    return ck;
}

ReferenceDetector restore_detector(const Checkpoint& ck)
{
    ReferenceDetector det(ck.config, ck.parameters, ck.buffers);
    det.epoch = ck.epoch;
    det.step = ck.step;
    return det;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck)
{
    nlohmann::json directory = nlohmann::json::array();
    std::vector<const NamedArray*> order;
    std::size_t offset = 0;
    auto add_group = [&](const Parameters& group, const char* tag) {
        for (const auto& a : group.arrays) {
            directory.push_back(
                {{"group", tag}, {"name", a.name}, {"shape", a.shape}, {"offset", offset}, {"count", a.values.size()}});
            offset += a.values.size();
            order.push_back(&a);
        }
    };
    add_group(ck.parameters, "param");
    add_group(ck.buffers, "buffer");
    add_group(ck.velocity, "velocity");

    const nlohmann::json header = {{"format", "jointdet-checkpoint"},
                                   {"version", 1},
                                   {"config", detector_config_to_json(ck.config)},
                                   {"epoch", ck.epoch},
                                   {"step", ck.step},
                                   {"extra", ck.extra},
                                   {"arrays", directory}};
    const std::string text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot write checkpoint " + path.string());
    }
    out << kMagic << '\n' << text.size() << '\n' << text;
    for (const auto* a : order) {
        out.write(reinterpret_cast<const char*>(a->values.data()),
                  static_cast<std::streamsize>(a->values.size() * sizeof(double)));
    }
    if (!out) {
        throw IoError("failed writing checkpoint " + path.string());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw LoadError("cannot open checkpoint " + path.string());
    }
    std::string magic;
    std::getline(in, magic);
    if (magic != kMagic) {
        throw LoadError(path.string() + ": not a checkpoint file");
    }
    std::string len_line;
    std::getline(in, len_line);
    std::size_t len = 0;
    try {
        len = std::stoul(len_line);
    } catch (const std::exception&) {
        throw LoadError(path.string() + ": bad header length");
    }
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    if (!in) {
        throw LoadError(path.string() + ": truncated header");
    }

    Checkpoint ck;
    try {
        const auto header = nlohmann::json::parse(text);
        if (header.at("format") != "jointdet-checkpoint" || header.at("version") != 1) {
            throw LoadError(path.string() + ": unsupported checkpoint version");
        }
        ck.config = detector_config_from_json(header.at("config"));
        ck.epoch = header.at("epoch").get<std::int64_t>();
        ck.step = header.at("step").get<std::int64_t>();
        ck.extra = header.at("extra");
        for (const auto& entry : header.at("arrays")) {
            NamedArray a;
            a.name = entry.at("name").get<std::string>();
            a.shape = entry.at("shape").get<std::vector<int>>();
            a.values.resize(entry.at("count").get<std::size_t>());
            in.read(reinterpret_cast<char*>(a.values.data()), static_cast<std::streamsize>(a.values.size() * sizeof(double)));
            if (!in) {
                throw LoadError(path.string() + ": truncated array " + a.name);
            }
            const auto group = entry.at("group").get<std::string>();
            if (group == "param") {
                ck.parameters.arrays.push_back(std::move(a));
            } else if (group == "buffer") {
                ck.buffers.arrays.push_back(std::move(a));
            } else if (group == "velocity") {
                ck.velocity.arrays.push_back(std::move(a));
            } else {
                throw LoadError(path.string() + ": unknown array group " + group);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(path.string() + ": " + e.what());
    } catch (const ConfigError& e) {
        throw LoadError(path.string() + ": " + e.what());
    }
    return ck;
}

}  // namespace jointdet
