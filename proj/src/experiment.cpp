#include "jointdet/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "jointdet/errors.hpp"

namespace jointdet {

namespace fs = std::filesystem;

namespace {

std::pair<double, double> mean_sd(const std::vector<double>& v)
{
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

std::string sweep_label(double alpha)
{
    char buf[48];
    std::snprintf(buf, sizeof buf, "mixup_beta(alpha=%g)", alpha);
    return buf;
}

}  // namespace

ComparisonTable summarize(const std::vector<ArmRun>& runs)
{
    ComparisonTable table;
    table.runs = runs;
    for (const auto& r : runs) {
        bool seen = false;
        for (const auto& row : table.rows) seen = seen || row.label == r.label;
        if (seen) continue;
        std::vector<double> image, video;
        for (const auto& s : runs) {
            if (s.label == r.label) {
                image.push_back(s.ap_image_test);
                video.push_back(s.ap_video_test);
            }
        }
        TableRow row;
        row.label = r.label;
        row.runs = image.size();
        std::tie(row.image_mean, row.image_spread) = mean_sd(image);
        std::tie(row.video_mean, row.video_spread) = mean_sd(video);
        table.rows.push_back(row);
    }
    return table;
}

const TableRow& ComparisonTable::row(const std::string& label) const
{
    for (const auto& r : rows) {
        if (r.label == label) return r;
    }
    throw ArgumentError("comparison table has no row '" + label + "'");
}

std::string ComparisonTable::format() const
{
    std::ostringstream out;
    char line[160];
    std::snprintf(line, sizeof line, "%-26s %4s  %-17s  %-17s\n", "method", "runs", "AP image-test", "AP video-test");
    out << line;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%-26s %4zu  %.3f ± %.3f    %.3f ± %.3f\n", r.label.c_str(), r.runs,
                      r.image_mean, r.image_spread, r.video_mean, r.video_spread);
        out << line;
    }
    return out.str();
}

nlohmann::json ComparisonTable::to_json() const
{
    auto rows_json = nlohmann::json::array();
    for (const auto& r : rows) {
        rows_json.push_back({{"label", r.label},
                             {"runs", r.runs},
                             {"ap_image_test_mean", r.image_mean},
                             {"ap_image_test_sd", r.image_spread},
                             {"ap_video_test_mean", r.video_mean},
                             {"ap_video_test_sd", r.video_spread}});
    }
    auto runs_json = nlohmann::json::array();
    for (const auto& r : runs) {
        runs_json.push_back({{"label", r.label},
                             {"arm", to_string(r.arm)},
                             {"seed", r.seed},
                             {"ap_image_test", r.ap_image_test},
                             {"ap_video_test", r.ap_video_test},
                             {"wall_seconds", r.wall_seconds}});
    }
    return {{"rows", rows_json}, {"runs", runs_json}};
}

ComparisonTable run_experiment_matrix(const Corpus& corpus, const std::vector<std::uint64_t>& seeds,
                                      const MatrixOptions& options)
{
    if (seeds.empty()) {
        throw ArgumentError("experiment matrix: at least one seed is required");
    }
    if (options.arms.empty() && options.beta_sweep.empty()) {
        throw ArgumentError("experiment matrix: no arms requested");
    }
    if (corpus.image_test.size() == 0 || corpus.video_test.size() == 0) {
        throw ConfigError("experiment matrix: corpus needs both image-test and video-test items");
    }

    struct Job {
        std::string label;
        TrainingConfig config;
    };
    std::vector<Job> jobs;
    for (const auto seed : seeds) {
        for (const Arm arm : options.arms) {
            TrainingConfig c = options.base;
            c.arm = arm;
            c.seed = seed;
            jobs.push_back({to_string(arm), c});
        }
        for (const double alpha : options.beta_sweep) {
            TrainingConfig c = options.base;
            c.arm = Arm::Mixup;
            c.seed = seed;
            c.mixup = MixupConfig::beta(alpha);
            jobs.push_back({sweep_label(alpha), c});
        }
    }

    std::vector<ArmRun> runs;
    for (auto& job : jobs) {
        job.config.eval_every = 0;
        std::optional<fs::path> dir;
        if (options.out_dir) {
            dir = *options.out_dir / (job.label + "_seed" + std::to_string(job.config.seed));
            job.config.checkpoint_every_epoch = false;
        }
        const RunRecord rec = train(job.config, corpus, dir);
        if (rec.abort_reason) {
            throw NumericError("experiment matrix: " + job.label + " seed " + std::to_string(job.config.seed) +
                               " aborted: " + *rec.abort_reason);
        }
        ArmRun r{job.label, job.config.arm, job.config.seed, rec.final_image_test->ap, rec.final_video_test->ap,
                 rec.wall_seconds};
        if (dir) {
            write_pr_csv(*dir / "pr_image_test.csv", *rec.final_image_test);
            write_pr_csv(*dir / "pr_video_test.csv", *rec.final_video_test);
        }
        if (options.verbose) {
            std::fprintf(stderr, "[matrix] %-24s seed %-3llu image %.4f video %.4f (%.1fs)\n", r.label.c_str(),
                         static_cast<unsigned long long>(r.seed), r.ap_image_test, r.ap_video_test, r.wall_seconds);
        }
        runs.push_back(r);
    }

    ComparisonTable table = summarize(runs);
    if (options.out_dir) {
        fs::create_directories(*options.out_dir);
        std::ofstream(*options.out_dir / "table.txt") << table.format();
        std::ofstream(*options.out_dir / "table.json") << table.to_json().dump(2) << '\n';
    }
    return table;
}

}  // namespace jointdet
