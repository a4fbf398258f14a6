#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "jointdet/checkpoint.hpp"
#include "jointdet/datapipe.hpp"
#include "jointdet/evalkit.hpp"
#include "jointdet/mixup.hpp"
#include "jointdet/optimizer.hpp"
#include "jointdet/reference_detector.hpp"

namespace jointdet {

/// The four compared training setups.
enum class Arm { Base, Mixup, Tcr, MixupTcr };

std::string to_string(Arm arm);
Arm arm_from_string(const std::string& name);
inline bool uses_mixup(Arm arm) { return arm == Arm::Mixup || arm == Arm::MixupTcr; }
inline bool uses_tcr(Arm arm) { return arm == Arm::Tcr || arm == Arm::MixupTcr; }

struct LrMilestone {
    int epoch = 0;
    double lr = 0.0;
    friend bool operator==(const LrMilestone&, const LrMilestone&) = default;
};

struct TrainingConfig {
    Arm arm = Arm::Base;
    int epochs = 10;
    std::vector<LrMilestone> lr_milestones = {{0, 1e-2}, {6, 1e-3}, {8, 1e-4}};
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::size_t batch_size = 8;
    /// Triples per step for the TCR arms; ignored otherwise.
    std::size_t triple_batch_size = 8;
    double gamma = 0.01;
    double tcr_epsilon = 1e-8;
    MixupConfig mixup = MixupConfig::discrete(0.5, 0.2);
    double flip_probability = 0.5;
    std::uint64_t seed = 0;
    DetectorConfig detector;
    /// Truncate each epoch after this many steps (0 = full epoch).
    std::size_t max_steps_per_epoch = 0;
    /// Evaluate both test splits every this many epochs (0 = final epoch only).
    int eval_every = 1;
    /// Write a checkpoint after every epoch (needs an output directory).
    bool checkpoint_every_epoch = true;

    /// 26 epochs, 1e-2 / 1e-3 from 16 / 1e-4 from 22.
    static TrainingConfig full_schedule();
    void validate() const;
    nlohmann::json to_json() const;
};

/// Unknown keys are rejected with ConfigError; absent keys keep defaults.
TrainingConfig training_config_from_json(const nlohmann::json& j);
/// {"distribution": "beta", "alpha": a} or {"distribution": "discrete", "c": c, "p": p}.
MixupConfig mixup_config_from_json(const nlohmann::json& j);
TrainingConfig load_training_config(const std::filesystem::path& path);

/// Learning rate of the last milestone at or before `epoch`.
double lr_at(const TrainingConfig& config, int epoch);

struct StepLoss {
    double detection = 0.0;
    double regularization = 0.0;
    double combined = 0.0;
};

struct EpochRecord {
    int epoch = 0;
    double lr = 0.0;
    StepLoss mean_loss;
    std::size_t steps = 0;
    std::optional<double> ap_image_test;
    std::optional<double> ap_video_test;
    double seconds = 0.0;
};

struct RunRecord {
    TrainingConfig config;
    std::vector<EpochRecord> epochs;
    std::vector<StepLoss> steps;
    std::optional<APReport> final_image_test;
    std::optional<APReport> final_video_test;
    double wall_seconds = 0.0;
    std::string final_checkpoint;
    std::optional<std::string> abort_reason;

    nlohmann::json to_json() const;
};

/// Owns the detector and optimizer for one training run.
class Trainer {
public:
    Trainer(TrainingConfig config, const Corpus& corpus);

    /// Continue from a checkpoint written by a previous run with the same config.
    void resume(const Checkpoint& checkpoint);

    /// One optimizer step on a batch; returns the batch losses.
    StepLoss step(const JointBatch& batch, double lr);

    /// Train until config.epochs; writes checkpoints and run.json under out_dir when given.
    RunRecord run(const std::optional<std::filesystem::path>& out_dir = std::nullopt);

    ReferenceDetector& detector() { return detector_; }
    const MomentumSgd& optimizer() const { return optimizer_; }
    BatchConfig batch_config() const;

private:
    TrainingConfig config_;
    const Corpus& corpus_;
    ReferenceDetector detector_;
    MomentumSgd optimizer_;
};

RunRecord train(const TrainingConfig& config, const Corpus& corpus,
                const std::optional<std::filesystem::path>& out_dir = std::nullopt);

}  // namespace jointdet
