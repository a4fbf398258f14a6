#include "jointdet/evalkit.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "jointdet/errors.hpp"

namespace jointdet {

std::vector<bool> match_detections(std::span<const Detection> detections, std::span<const BoundingBox> truths,
                                   double iou_threshold)
{
    for (std::size_t i = 1; i < detections.size(); ++i) {
        if (detections[i].score > detections[i - 1].score) {
            throw ArgumentError("match_detections: detections must be sorted by descending score");
        }
    }
    std::vector<bool> flags(detections.size(), false);
    std::vector<bool> taken(truths.size(), false);
    for (std::size_t d = 0; d < detections.size(); ++d) {
        double best = -1.0;
        std::size_t best_t = truths.size();
        for (std::size_t t = 0; t < truths.size(); ++t) {
            if (taken[t]) {
                continue;
            }
            const double v = iou(detections[d].box, truths[t]);
            if (v > best) {
                best = v;
                best_t = t;
            }
        }
        if (best_t < truths.size() && best >= iou_threshold) {
            taken[best_t] = true;
            flags[d] = true;
        }
    }
    return flags;
}

APReport average_precision(std::span<const ScoredFlag> flags, std::size_t total_truths, double iou_threshold)
{
    if (total_truths == 0) {
        throw ArgumentError("average_precision: no ground-truth boxes");
    }
    std::vector<std::size_t> rank(flags.size());
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    std::stable_sort(rank.begin(), rank.end(),
                     [&](std::size_t a, std::size_t b) { return flags[a].score > flags[b].score; });

    APReport report;
    report.iou_threshold = iou_threshold;
    report.ground_truths = total_truths;
    const double n_truth = static_cast<double>(total_truths);
    std::size_t tp = 0;
    for (std::size_t k = 0; k < rank.size(); ++k) {
        const auto& f = flags[rank[k]];
        tp += f.true_positive ? 1 : 0;
        report.curve.push_back({f.score, static_cast<double>(tp) / static_cast<double>(k + 1),
                                static_cast<double>(tp) / n_truth});
    }
    report.true_positives = tp;
    report.false_positives = rank.size() - tp;
    report.false_negatives = total_truths - tp;

    // Envelope: precision at recall r is the best precision at any recall >= r.
    std::vector<double> envelope(report.curve.size());
    double best = 0.0;
    for (std::size_t k = report.curve.size(); k-- > 0;) {
        best = std::max(best, report.curve[k].precision);
        envelope[k] = best;
    }
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t k = 0; k < report.curve.size(); ++k) {
        ap += (report.curve[k].recall - prev_recall) * envelope[k];
        prev_recall = report.curve[k].recall;
    }
    report.ap = ap;
    return report;
}

APReport evaluate_predictions(const PredictFn& predict, const LabeledSource& split, double iou_threshold)
{
    const std::size_t n = split.size();
    if (n == 0) {
        throw ArgumentError("evaluate: split is empty");
    }
    std::vector<std::vector<ScoredFlag>> per_item(n);
    std::vector<std::string> errors(n);
#pragma omp parallel for schedule(dynamic, 4)
    for (std::size_t i = 0; i < n; ++i) {
        try {
            const LabeledImage item = split.load(i);
            const auto detections = predict(item, i);
            const auto flags = match_detections(detections, item.boxes, iou_threshold);
            for (std::size_t d = 0; d < detections.size(); ++d) {
                per_item[i].push_back({detections[d].score, flags[d]});
            }
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }
    for (const auto& e : errors) {
        if (!e.empty()) {
            throw Error("evaluate: " + e);
        }
    }
    std::vector<ScoredFlag> pooled;
    std::size_t truths = 0;
    for (std::size_t i = 0; i < n; ++i) {
        pooled.insert(pooled.end(), per_item[i].begin(), per_item[i].end());
        truths += split.boxes(i).size();
    }
    return average_precision(pooled, truths, iou_threshold);
}

APReport evaluate_detector(const Detector& detector, const LabeledSource& split, double iou_threshold)
{
    return evaluate_predictions(
        [&](const LabeledImage& item, std::size_t) { return detector.predict(item.pixels); }, split, iou_threshold);
}

nlohmann::json APReport::to_json() const
{
    auto points = nlohmann::json::array();
    for (const auto& p : curve) {
        points.push_back({{"threshold", p.threshold}, {"precision", p.precision}, {"recall", p.recall}});
    }
    return {{"ap", ap},
            {"iou_threshold", iou_threshold},
            {"true_positives", true_positives},
            {"false_positives", false_positives},
            {"false_negatives", false_negatives},
            {"ground_truths", ground_truths},
            {"curve", points}};
}

void write_report_json(const std::filesystem::path& path, const APReport& report)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << report.to_json().dump(2) << '\n';
}

void write_pr_csv(const std::filesystem::path& path, const APReport& report)
{
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out.precision(17);
    out << "threshold,precision,recall\n";
    for (const auto& p : report.curve) {
        out << p.threshold << ',' << p.precision << ',' << p.recall << '\n';
    }
}

}  // namespace jointdet
