#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "jointdet/checkpoint.hpp"
#include "jointdet/datapipe.hpp"
#include "jointdet/errors.hpp"
#include "jointdet/evalkit.hpp"
#include "jointdet/experiment.hpp"
#include "jointdet/image_io.hpp"
#include "jointdet/synthgen.hpp"
#include "jointdet/training.hpp"

namespace fs = std::filesystem;
using namespace jointdet;

namespace {

std::vector<std::uint64_t> parse_seeds(const std::string& text)
{
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            seeds.push_back(std::stoull(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::logic_error&) {
            throw ConfigError("--seeds: '" + item + "' is not a non-negative integer");
        }
    }
    return seeds;
}

void draw_box(Tensor3& img, const BoundingBox& b)
{
    const int x0 = std::clamp(static_cast<int>(std::floor(b.x_min)), 0, img.width - 1);
    const int x1 = std::clamp(static_cast<int>(std::ceil(b.x_max)) - 1, 0, img.width - 1);
    const int y0 = std::clamp(static_cast<int>(std::floor(b.y_min)), 0, img.height - 1);
    const int y1 = std::clamp(static_cast<int>(std::ceil(b.y_max)) - 1, 0, img.height - 1);
    auto put = [&](int y, int x) {
        for (int c = 0; c < img.channels; ++c) img.at(c, y, x) = c == 1 ? 1.0 : 0.0;
    };
    for (int x = x0; x <= x1; ++x) {
        put(y0, x);
        put(y1, x);
    }
    for (int y = y0; y <= y1; ++y) {
        put(y, x0);
        put(y, x1);
    }
}

int cmd_generate(const fs::path& out, CorpusConfig config)
{
    const CorpusManifest m = gen_corpus(config, out);
    std::printf("wrote %zu images and %zu videos to %s (checksum %s)\n", m.images.size(), m.videos.size(),
                out.string().c_str(), m.checksum.c_str());
    return 0;
}

int cmd_train(const fs::path& corpus_dir, const std::string& arm, const std::optional<fs::path>& config_file,
              const fs::path& out, const std::optional<std::uint64_t>& seed,
              const std::optional<fs::path>& resume_from)
{
    TrainingConfig config = config_file ? load_training_config(*config_file) : TrainingConfig{};
    config.arm = arm_from_string(arm);
    if (seed) config.seed = *seed;
    config.validate();
    const Corpus corpus = load_manifest(corpus_dir);
    Trainer trainer(config, corpus);
    if (resume_from) trainer.resume(load_checkpoint(*resume_from));
    const RunRecord rec = trainer.run(out);
    for (const auto& e : rec.epochs) {
        std::printf("epoch %2d  lr %.0e  loss %.4f (det %.4f reg %.4f)", e.epoch, e.lr, e.mean_loss.combined,
                    e.mean_loss.detection, e.mean_loss.regularization);
        if (e.ap_image_test) std::printf("  AP image %.4f", *e.ap_image_test);
        if (e.ap_video_test) std::printf("  AP video %.4f", *e.ap_video_test);
        std::printf("  %.1fs\n", e.seconds);
    }
    if (rec.abort_reason) {
        std::fprintf(stderr, "training aborted: %s\n", rec.abort_reason->c_str());
        return 2;
    }
    std::printf("checkpoint %s\n", rec.final_checkpoint.c_str());
    return 0;
}

int cmd_eval(const fs::path& corpus_dir, const fs::path& checkpoint, const std::string& split, const fs::path& out)
{
    const Corpus corpus = load_manifest(corpus_dir);
    const ReferenceDetector det = restore_detector(load_checkpoint(checkpoint));
    const LabeledSource* source = nullptr;
    if (split == "image-test") {
        source = &corpus.image_test;
    } else if (split == "video-test") {
        source = &corpus.video_test;
    } else {
        throw ConfigError("--split must be image-test or video-test");
    }
    const APReport report = evaluate_detector(det, *source);
    write_report_json(out, report);
    fs::path csv = out;
    csv.replace_extension(".csv");
    write_pr_csv(csv, report);
    std::printf("%s AP@0.5 = %.4f (%zu truths, %zu TP, %zu FP)\n", split.c_str(), report.ap, report.ground_truths,
                report.true_positives, report.false_positives);
    return 0;
}

int cmd_matrix(const fs::path& corpus_dir, const std::string& seeds_text, const fs::path& out,
               const std::optional<fs::path>& config_file, const std::vector<std::string>& arms,
               const std::vector<double>& sweep)
{
    const auto seeds = parse_seeds(seeds_text);
    if (seeds.empty()) throw ConfigError("--seeds: at least one seed is required");
    MatrixOptions options;
    if (config_file) options.base = load_training_config(*config_file);
    if (!arms.empty()) {
        options.arms.clear();
        for (const auto& a : arms) options.arms.push_back(arm_from_string(a));
    }
    options.beta_sweep = sweep;
    options.out_dir = out;
    options.verbose = true;
    const Corpus corpus = load_manifest(corpus_dir);
    const ComparisonTable table = run_experiment_matrix(corpus, seeds, options);
    std::printf("%s", table.format().c_str());
    return 0;
}

int cmd_preview(const fs::path& corpus_dir, const fs::path& mixup_file, const fs::path& out, int count,
                std::uint64_t seed)
{
    std::ifstream in(mixup_file);
    if (!in) throw ConfigError("cannot open " + mixup_file.string());
    MixupConfig mixup;
    try {
        mixup = mixup_config_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(mixup_file.string() + ": " + e.what());
    }
    mixup.validate();
    const Corpus corpus = load_manifest(corpus_dir);
    BatchConfig bc;
    bc.batch_size = static_cast<std::size_t>(count);
    bc.triple_batch_size = 0;
    bc.mixup = mixup;
    bc.seed = seed;
    const BatchStream stream(corpus.image_train, &corpus.video_train, bc, 0);
    const JointBatch batch = stream.batch(0);
    fs::create_directories(out);
    for (std::size_t i = 0; i < batch.mixup_samples.size(); ++i) {
        const auto& s = batch.mixup_samples[i];
        Tensor3 img = s.pixels;
        for (const auto& b : s.boxes) draw_box(img, b);
        char name[64];
        std::snprintf(name, sizeof name, "preview_%03zu_lambda_%.3f.png", i, s.lambda_used);
        write_png(out / name, img);
    }
    std::printf("wrote %zu previews (%s) to %s\n", batch.mixup_samples.size(), mixup.describe().c_str(),
                out.string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"jointdet: joint image/video detector training on synthetic data"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("generate", "Generate a synthetic corpus");
    fs::path gen_out;
    CorpusConfig gen_cfg;
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--seed", gen_cfg.seed, "Corpus seed");
    gen->add_option("--images", gen_cfg.images, "Labeled report images");
    gen->add_option("--neg-videos", gen_cfg.negative_videos, "Negative videos");
    gen->add_option("--pos-videos", gen_cfg.positive_videos, "Positive videos");
    gen->add_option("--frames", gen_cfg.negative_frames, "Frames per negative video");
    gen->add_option("--pos-frames", gen_cfg.positive_frames, "Frames per positive video");
    gen->add_option("--gap", gen_cfg.gap_strength, "Domain-gap strength (0 = none)");

    auto* tr = app.add_subcommand("train", "Train one arm");
    fs::path tr_corpus, tr_out;
    std::string tr_arm;
    std::optional<fs::path> tr_config, tr_resume;
    std::optional<std::uint64_t> tr_seed;
    tr->add_option("--corpus", tr_corpus)->required();
    tr->add_option("--arm", tr_arm)->required()->check(CLI::IsMember({"base", "mixup", "tcr", "mixup_tcr"}));
    tr->add_option("--config", tr_config, "Training config JSON");
    tr->add_option("--out", tr_out)->required();
    tr->add_option("--seed", tr_seed);
    tr->add_option("--resume", tr_resume, "Checkpoint to continue from");

    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
    fs::path ev_corpus, ev_ckpt, ev_out;
    std::string ev_split;
    ev->add_option("--corpus", ev_corpus)->required();
    ev->add_option("--checkpoint", ev_ckpt)->required();
    ev->add_option("--split", ev_split)->required()->check(CLI::IsMember({"image-test", "video-test"}));
    ev->add_option("--out", ev_out, "Report JSON (PR curve goes next to it as .csv)")->required();

    auto* mx = app.add_subcommand("matrix", "Train every arm for every seed and tabulate AP");
    fs::path mx_corpus, mx_out;
    std::string mx_seeds;
    std::optional<fs::path> mx_config;
    std::vector<std::string> mx_arms;
    std::vector<double> mx_sweep;
    mx->add_option("--corpus", mx_corpus)->required();
    mx->add_option("--seeds", mx_seeds, "Comma-separated seeds")->required();
    mx->add_option("--out", mx_out)->required();
    mx->add_option("--config", mx_config, "Base training config JSON");
    mx->add_option("--arms", mx_arms, "Subset of arms")->delimiter(',');
    mx->add_option("--beta-sweep", mx_sweep, "Extra MIXUP rows with Beta lambda, one per alpha")->delimiter(',');

    auto* pv = app.add_subcommand("preview", "Write blended samples with boxes drawn");
    fs::path pv_corpus, pv_mixup, pv_out;
    int pv_count = 16;
    std::uint64_t pv_seed = 0;
    pv->add_option("--corpus", pv_corpus)->required();
    pv->add_option("--mixup-config", pv_mixup)->required();
    pv->add_option("--out", pv_out)->required();
    pv->add_option("--count", pv_count)->check(CLI::Range(1, 1000));
    pv->add_option("--seed", pv_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed()) return cmd_generate(gen_out, gen_cfg);
        if (tr->parsed()) return cmd_train(tr_corpus, tr_arm, tr_config, tr_out, tr_seed, tr_resume);
        if (ev->parsed()) return cmd_eval(ev_corpus, ev_ckpt, ev_split, ev_out);
        if (mx->parsed()) return cmd_matrix(mx_corpus, mx_seeds, mx_out, mx_config, mx_arms, mx_sweep);
        if (pv->parsed()) return cmd_preview(pv_corpus, pv_mixup, pv_out, pv_count, pv_seed);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const ArgumentError& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
