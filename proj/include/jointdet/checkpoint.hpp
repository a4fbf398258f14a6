#pragma once

#include <cstdint>
#include <filesystem>

#include "json.hpp"
#include "jointdet/reference_detector.hpp"

namespace jointdet {

/// Everything needed to resume training bit-exactly.
///
/// On disk: the line "JDCKPT1", a line holding the byte length of a JSON
/// header, the header (config, counters, array directory), then the raw
/// little-endian IEEE-754 doubles of every array in directory order.
struct Checkpoint {
    DetectorConfig config;
    Parameters parameters;
    Parameters buffers;
    Parameters velocity;  ///< optimizer momentum; empty when not saved
    std::int64_t epoch = 0;
    std::int64_t step = 0;
    nlohmann::json extra = nlohmann::json::object();
};

nlohmann::json detector_config_to_json(const DetectorConfig& config);
/// Unknown keys are rejected with ConfigError; missing keys keep defaults.
DetectorConfig detector_config_from_json(const nlohmann::json& j);

Checkpoint make_checkpoint(const ReferenceDetector& detector, const Parameters* velocity = nullptr);
ReferenceDetector restore_detector(const Checkpoint& checkpoint);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace jointdet
