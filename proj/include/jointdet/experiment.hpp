#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "jointdet/training.hpp"

namespace jointdet {

struct ArmRun {
    std::string label;  ///< arm name, or "beta(alpha=...)" for sweep rows
    Arm arm = Arm::Base;
    std::uint64_t seed = 0;
    double ap_image_test = 0.0;
    double ap_video_test = 0.0;
    double wall_seconds = 0.0;
};

struct TableRow {
    std::string label;
    std::size_t runs = 0;
    double image_mean = 0.0;
    double image_spread = 0.0;  ///< sample standard deviation (0 for one run)
    double video_mean = 0.0;
    double video_spread = 0.0;
};

struct ComparisonTable {
    std::vector<TableRow> rows;
    std::vector<ArmRun> runs;

    const TableRow& row(const std::string& label) const;
    /// Fixed-width text with "mean ± sd" cells.
    std::string format() const;
    nlohmann::json to_json() const;
};

struct MatrixOptions {
    TrainingConfig base;  ///< arm and seed are overwritten per run
    std::vector<Arm> arms = {Arm::Base, Arm::Mixup, Arm::Tcr, Arm::MixupTcr};
    /// Extra MIXUP rows with Beta(alpha, alpha+1) lambda, one per alpha.
    std::vector<double> beta_sweep;
    /// When set, each run's run.json, checkpoint and PR CSVs land under here.
    std::optional<std::filesystem::path> out_dir;
    bool verbose = false;
};

ComparisonTable summarize(const std::vector<ArmRun>& runs);

ComparisonTable run_experiment_matrix(const Corpus& corpus, const std::vector<std::uint64_t>& seeds,
                                      const MatrixOptions& options);

}  // namespace jointdet
