#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "json.hpp"
#include "jointdet/box.hpp"
#include "jointdet/datapipe.hpp"
#include "jointdet/detector.hpp"

namespace jointdet {

struct PrPoint {
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

struct APReport {
    double ap = 0.0;
    std::vector<PrPoint> curve;  ///< one point per ranked detection
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t false_negatives = 0;
    std::size_t ground_truths = 0;
    double iou_threshold = 0.5;

    nlohmann::json to_json() const;
};

/// A detection's score and whether it matched a ground truth.
struct ScoredFlag {
    double score = 0.0;
    bool true_positive = false;
};

/// Greedy one-to-one matching over detections sorted by descending score:
/// each takes the highest-IoU still-unmatched truth if that IoU reaches the
/// threshold (ties to the lower truth index). Throws on unsorted input.
std::vector<bool> match_detections(std::span<const Detection> detections, std::span<const BoundingBox> truths,
                                   double iou_threshold = 0.5);

/// All-points interpolated AP: area under the precision envelope against
/// recall, ranking detections by score (stable for ties).
APReport average_precision(std::span<const ScoredFlag> flags, std::size_t total_truths, double iou_threshold = 0.5);

using PredictFn = std::function<std::vector<Detection>(const LabeledImage& item, std::size_t index)>;

/// Predict over every item (in parallel), pool flags across the split, compute AP.
APReport evaluate_predictions(const PredictFn& predict, const LabeledSource& split, double iou_threshold = 0.5);

APReport evaluate_detector(const Detector& detector, const LabeledSource& split, double iou_threshold = 0.5);

void write_report_json(const std::filesystem::path& path, const APReport& report);
/// Columns: threshold, precision, recall.
void write_pr_csv(const std::filesystem::path& path, const APReport& report);

}  // namespace jointdet
