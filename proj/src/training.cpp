#include "jointdet/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

#include "jointdet/errors.hpp"
#include "jointdet/tcr.hpp"

namespace jointdet {

namespace fs = std::filesystem;

std::string to_string(Arm arm)
{
    switch (arm) {
    case Arm::Base:
        return "base";
    case Arm::Mixup:
        return "mixup";
    case Arm::Tcr:
        return "tcr";
    case Arm::MixupTcr:
        return "mixup_tcr";
    }
    return "?";
}

Arm arm_from_string(const std::string& name)
{
    if (name == "base") return Arm::Base;
    if (name == "mixup") return Arm::Mixup;
    if (name == "tcr") return Arm::Tcr;
    if (name == "mixup_tcr") return Arm::MixupTcr;
    throw ConfigError("unknown arm '" + name + "' (expected base, mixup, tcr or mixup_tcr)");
}

TrainingConfig TrainingConfig::full_schedule()
{
    TrainingConfig c;
    c.epochs = 26;
    c.lr_milestones = {{0, 1e-2}, {16, 1e-3}, {22, 1e-4}};
    return c;
}

void TrainingConfig::validate() const
{
    if (epochs < 1) {
        throw ConfigError("training: epochs must be positive");
    }
    if (lr_milestones.empty() || lr_milestones.front().epoch != 0) {
        throw ConfigError("training: the first learning-rate milestone must be at epoch 0");
    }
    for (std::size_t i = 0; i < lr_milestones.size(); ++i) {
        if (!(lr_milestones[i].lr > 0.0)) {
            throw ConfigError("training: learning rates must be positive");
        }
        if (i > 0 && lr_milestones[i].epoch <= lr_milestones[i - 1].epoch) {
            throw ConfigError("training: milestones must be strictly increasing in epoch");
        }
    }
    if (!(momentum >= 0.0 && momentum < 1.0) || !(weight_decay >= 0.0)) {
        throw ConfigError("training: momentum must lie in [0,1) and weight decay must be >= 0");
    }
    if (batch_size < 1) {
        throw ConfigError("training: batch_size must be positive");
    }
    if (uses_tcr(arm) && triple_batch_size < 1) {
        throw ConfigError("training: TCR arms need triple_batch_size >= 1");
    }
    TcrConfig{gamma, tcr_epsilon}.validate();
    mixup.validate();
    if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) {
        throw ConfigError("training: flip_probability must lie in [0,1]");
    }
    if (eval_every < 0) {
        throw ConfigError("training: eval_every must be >= 0");
    }
    detector.validate();
}

double lr_at(const TrainingConfig& config, int epoch)
{
    if (epoch < 0 || epoch >= config.epochs) {
        throw ArgumentError("lr_at: epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(config.epochs) + ")");
    }
    double lr = config.lr_milestones.front().lr;
    for (const auto& m : config.lr_milestones) {
        if (m.epoch <= epoch) {
            lr = m.lr;
        }
    }
    return lr;
}

nlohmann::json TrainingConfig::to_json() const
{
    nlohmann::json mixup_json;
    if (const auto* beta = std::get_if<BetaLambda>(&mixup.distribution)) {
        mixup_json = {{"distribution", "beta"}, {"alpha", beta->alpha}};
    } else {
        const auto& d = std::get<DiscreteLambda>(mixup.distribution);
        mixup_json = {{"distribution", "discrete"}, {"c", d.c}, {"p", d.p}};
    }
    auto milestones = nlohmann::json::array();
    for (const auto& m : lr_milestones) {
        milestones.push_back({m.epoch, m.lr});
    }
    return {{"arm", to_string(arm)},
            {"epochs", epochs},
            {"lr_milestones", milestones},
            {"momentum", momentum},
            {"weight_decay", weight_decay},
            {"batch_size", batch_size},
            {"triple_batch_size", triple_batch_size},
            {"gamma", gamma},
            {"tcr_epsilon", tcr_epsilon},
            {"mixup", mixup_json},
            {"flip_probability", flip_probability},
            {"seed", seed},
            {"detector", detector_config_to_json(detector)},
            {"max_steps_per_epoch", max_steps_per_epoch},
            {"eval_every", eval_every},
            {"checkpoint_every_epoch", checkpoint_every_epoch}};
}

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where)
{
    for (const auto& item : j.items()) {
        if (!known.contains(item.key())) {
            throw ConfigError(where + ": unknown key '" + item.key() + "'");
        }
    }
}

}  // namespace

MixupConfig mixup_config_from_json(const nlohmann::json& j)
{
    if (!j.is_object() || !j.contains("distribution")) {
        throw ConfigError("mixup config needs a 'distribution' key");
    }
    const auto kind = j.at("distribution").get<std::string>();
    if (kind == "beta") {
        reject_unknown(j, {"distribution", "alpha"}, "mixup");
        return MixupConfig::beta(j.at("alpha").get<double>());
    }
    if (kind == "discrete") {
        reject_unknown(j, {"distribution", "c", "p"}, "mixup");
        return MixupConfig::discrete(j.at("c").get<double>(), j.at("p").get<double>());
    }
    throw ConfigError("mixup: distribution must be 'beta' or 'discrete'");
}

TrainingConfig training_config_from_json(const nlohmann::json& j)
{
    if (!j.is_object()) {
        throw ConfigError("training config must be a JSON object");
    }
    reject_unknown(j,
                   {"arm", "epochs", "lr_milestones", "momentum", "weight_decay", "batch_size", "triple_batch_size",
                    "gamma", "tcr_epsilon", "mixup", "flip_probability", "seed", "detector", "max_steps_per_epoch",
                    "eval_every", "checkpoint_every_epoch"},
                   "training config");
    TrainingConfig c;
    try {
        if (j.contains("arm")) c.arm = arm_from_string(j.at("arm").get<std::string>());
        c.epochs = j.value("epochs", c.epochs);
        if (j.contains("lr_milestones")) {
            c.lr_milestones.clear();
            for (const auto& m : j.at("lr_milestones")) {
                c.lr_milestones.push_back({m.at(0).get<int>(), m.at(1).get<double>()});
            }
        }
        c.momentum = j.value("momentum", c.momentum);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.triple_batch_size = j.value("triple_batch_size", c.triple_batch_size);
        c.gamma = j.value("gamma", c.gamma);
        c.tcr_epsilon = j.value("tcr_epsilon", c.tcr_epsilon);
        if (j.contains("mixup")) c.mixup = mixup_config_from_json(j.at("mixup"));
        c.flip_probability = j.value("flip_probability", c.flip_probability);
        c.seed = j.value("seed", c.seed);
        if (j.contains("detector")) c.detector = detector_config_from_json(j.at("detector"));
        c.max_steps_per_epoch = j.value("max_steps_per_epoch", c.max_steps_per_epoch);
        c.eval_every = j.value("eval_every", c.eval_every);
        c.checkpoint_every_epoch = j.value("checkpoint_every_epoch", c.checkpoint_every_epoch);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("training config: ") + e.what());
    }
    c.validate();
    return c;
}

TrainingConfig load_training_config(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config " + path.string());
    }
    try {
        return training_config_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

nlohmann::json RunRecord::to_json() const
{
    auto epochs_json = nlohmann::json::array();
    for (const auto& e : epochs) {
        nlohmann::json row = {{"epoch", e.epoch},
                              {"lr", e.lr},
                              {"steps", e.steps},
                              {"detection_loss", e.mean_loss.detection},
                              {"regularization_loss", e.mean_loss.regularization},
                              {"combined_loss", e.mean_loss.combined},
                              {"seconds", e.seconds}};
        row["ap_image_test"] = e.ap_image_test ? nlohmann::json(*e.ap_image_test) : nlohmann::json(nullptr);
        row["ap_video_test"] = e.ap_video_test ? nlohmann::json(*e.ap_video_test) : nlohmann::json(nullptr);
        epochs_json.push_back(std::move(row));
    }
    nlohmann::json j = {{"config", config.to_json()},
                        {"epochs", epochs_json},
                        {"wall_seconds", wall_seconds},
                        {"final_checkpoint", final_checkpoint}};
    j["abort_reason"] = abort_reason ? nlohmann::json(*abort_reason) : nlohmann::json(nullptr);
    if (final_image_test) j["final_image_test"] = final_image_test->to_json();
    if (final_video_test) j["final_video_test"] = final_video_test->to_json();
    return j;
}

Trainer::Trainer(TrainingConfig config, const Corpus& corpus)
    : config_(std::move(config)),
      corpus_(corpus),
      detector_(config_.detector, derive_seed(config_.seed, {0x6d6f64656c})),
      optimizer_(config_.momentum, config_.weight_decay)
{
    config_.validate();
    if (corpus_.image_train.size() == 0) {
        throw ConfigError("training: corpus has no image-train items");
    }
    if (uses_mixup(config_.arm) && corpus_.video_train.frame_count() == 0) {
        throw ConfigError("training: arm " + to_string(config_.arm) + " needs negative video frames");
    }
    if (uses_tcr(config_.arm) && corpus_.video_train.triple_count() == 0) {
        throw ConfigError("training: arm " + to_string(config_.arm) + " needs negative video triples");
    }
}

BatchConfig Trainer::batch_config() const
{
    BatchConfig b;
    b.batch_size = config_.batch_size;
    b.triple_batch_size = uses_tcr(config_.arm) ? config_.triple_batch_size : 0;
    b.flip_probability = config_.flip_probability;
    if (uses_mixup(config_.arm)) {
        b.mixup = config_.mixup;
    }
    b.seed = derive_seed(config_.seed, {0x64617461});
    return b;
}

void Trainer::resume(const Checkpoint& checkpoint)
{
    if (!(checkpoint.config == config_.detector)) {
        throw ConfigError("resume: checkpoint detector config differs from the training config");
    }
    detector_ = restore_detector(checkpoint);
    if (!checkpoint.velocity.arrays.empty()) {
        optimizer_.set_velocity(checkpoint.velocity);
    }
}

StepLoss Trainer::step(const JointBatch& batch, double lr)
{
    const std::size_t n_det = batch.mixup_samples.size();
    const std::size_t n_reg = batch.triples.size();
    if (n_det == 0) {
        throw ArgumentError("training step: batch has no supervised samples");
    }
    const std::size_t total = n_det + n_reg;
    const Parameters zero = detector_.parameters().zeros_like();
    std::vector<Parameters> grads(total, zero);
    std::vector<double> losses(total, 0.0);
    std::vector<std::string> errors(total);
    const double eps = config_.tcr_epsilon;

    // Each work item fills its own gradient; the reduction below runs in a
    // fixed order so the step is independent of the thread count.
#pragma omp parallel for schedule(dynamic, 1)
    for (std::size_t w = 0; w < total; ++w) {
        try {
            if (w < n_det) {
                const auto& s = batch.mixup_samples[w];
                losses[w] = detector_.detection_loss(s.pixels, s.boxes, &grads[w]).total;
            } else {
                const auto& t = batch.triples[w - n_det];
                FeatureMap f_prev, f_mid, f_next;
                const auto tr_prev = detector_.encode_traced(t.prev.pixels, f_prev);
                const auto tr_mid = detector_.encode_traced(t.mid.pixels, f_mid);
                const auto tr_next = detector_.encode_traced(t.next.pixels, f_next);
                const FeatureMap f_hat = estimate_midframe(f_prev, f_next);
                const TcrLossGrad lg = tcr_loss_grad(f_mid, f_hat, eps);
                const FeatureMap d_side = split_midframe_grad(lg.d_hat);
                detector_.backward_feature(*tr_mid, lg.d_mid, grads[w]);
                detector_.backward_feature(*tr_prev, d_side, grads[w]);
                detector_.backward_feature(*tr_next, d_side, grads[w]);
                losses[w] = lg.loss;
            }
        } catch (const std::exception& e) {
            errors[w] = e.what();
        }
    }
    for (const auto& e : errors) {
        if (!e.empty()) {
            throw NumericError("training step failed: " + e);
        }
    }

    StepLoss loss;
    Parameters grad = zero;
    for (std::size_t w = 0; w < n_det; ++w) {
        loss.detection += losses[w];
        grad.add(grads[w]);
    }
    loss.detection /= static_cast<double>(n_det);
    grad.scale(1.0 / static_cast<double>(n_det));
    if (n_reg > 0) {
        Parameters reg = zero;
        for (std::size_t w = n_det; w < total; ++w) {
            loss.regularization += losses[w];
            reg.add(grads[w]);
        }
        loss.regularization /= static_cast<double>(n_reg);
        reg.scale(config_.gamma / static_cast<double>(n_reg));
        grad.add(reg);
    }
    loss.combined = combined_loss(loss.detection, loss.regularization, config_.gamma);
    if (!std::isfinite(loss.combined) || !grad.all_finite()) {
        throw NumericError("training step: non-finite loss or gradient at epoch " + std::to_string(batch.epoch) +
                           ", batch " + std::to_string(batch.step));
    }
    optimizer_.step(detector_.parameters(), grad, lr);
    ++detector_.step;
    return loss;
}

RunRecord Trainer::run(const std::optional<fs::path>& out_dir)
{
    using clock = std::chrono::steady_clock;
    const auto run_start = clock::now();
    RunRecord record;
    record.config = config_;
    if (out_dir) {
        fs::create_directories(*out_dir);
    }
    const BatchConfig batches = batch_config();
    const VideoSource* negatives = corpus_.video_train.frame_count() > 0 ? &corpus_.video_train : nullptr;

    auto save = [&](const fs::path& path) {
        Checkpoint ck = make_checkpoint(detector_, &optimizer_.velocity());
        ck.extra = {{"training_config", config_.to_json()}};
        save_checkpoint(path, ck);
        return path.string();
    };

    for (int epoch = static_cast<int>(detector_.epoch); epoch < config_.epochs; ++epoch) {
        const auto epoch_start = clock::now();
        EpochRecord er;
        er.epoch = epoch;
        er.lr = lr_at(config_, epoch);
        BatchStream stream(corpus_.image_train, negatives, batches, epoch);
        std::size_t limit = stream.batch_count();
        if (config_.max_steps_per_epoch > 0) {
            limit = std::min(limit, config_.max_steps_per_epoch);
        }
        try {
            for (std::size_t b = 0; b < limit; ++b) {
                const StepLoss s = step(stream.batch(b), er.lr);
                record.steps.push_back(s);
                er.mean_loss.detection += s.detection;
                er.mean_loss.regularization += s.regularization;
                er.mean_loss.combined += s.combined;
                ++er.steps;
            }
        } catch (const NumericError& e) {
            record.abort_reason = e.what();
            if (out_dir) {
                std::ofstream(*out_dir / "diagnostic.json") << record.to_json().dump(2) << '\n';
            }
            break;
        }
        if (er.steps > 0) {
            er.mean_loss.detection /= static_cast<double>(er.steps);
            er.mean_loss.regularization /= static_cast<double>(er.steps);
            er.mean_loss.combined /= static_cast<double>(er.steps);
        }
        detector_.epoch = epoch + 1;

        const bool last = epoch + 1 == config_.epochs;
        const bool evaluate = last || (config_.eval_every > 0 && (epoch + 1) % config_.eval_every == 0);
        if (evaluate) {
            if (corpus_.image_test.size() > 0) {
                auto report = evaluate_detector(detector_, corpus_.image_test);
                er.ap_image_test = report.ap;
                if (last) record.final_image_test = std::move(report);
            }
            if (corpus_.video_test.size() > 0) {
                auto report = evaluate_detector(detector_, corpus_.video_test);
                er.ap_video_test = report.ap;
                if (last) record.final_video_test = std::move(report);
            }
        }
        er.seconds = std::chrono::duration<double>(clock::now() - epoch_start).count();
        record.epochs.push_back(er);

        if (out_dir && (config_.checkpoint_every_epoch || last)) {
            char name[32];
            std::snprintf(name, sizeof name, "epoch_%03d.ckpt", epoch + 1);
            record.final_checkpoint = save(*out_dir / name);
        }
    }
    record.wall_seconds = std::chrono::duration<double>(clock::now() - run_start).count();
    if (out_dir) {
        std::ofstream(*out_dir / "run.json") << record.to_json().dump(2) << '\n';
    }
    return record;
}

RunRecord train(const TrainingConfig& config, const Corpus& corpus, const std::optional<fs::path>& out_dir)
{
    Trainer trainer(config, corpus);
    return trainer.run(out_dir);
}

}  // namespace jointdet
