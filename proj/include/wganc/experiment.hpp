#pragma once

#include <filesystem>
#include <string>

#include "wganc/config.hpp"
#include "wganc/sinusoid.hpp"
#include "wganc/trainer.hpp"

namespace wganc::experiment {

struct ArmResult {
    trainer::RunMetrics metrics;
    sinusoid::EvalReport report;
    double wall_seconds = 0.0;
};

// Trains one arm and writes config.json, metrics.csv, samples.csv, eval.csv
// and checkpoints into out_dir. baseline = single-stage schedule on the
// finest critic. On a numeric abort the partial metrics stream is published
// before the error propagates.
ArmResult run_arm(const config::RunConfig& cfg, const std::filesystem::path& out_dir, bool baseline,
                  bool timing);

struct ComparisonResult {
    ArmResult curriculum;
    ArmResult baseline;
    double improvement = 0.0;  // (baseline - curriculum) / baseline mean error
};

// Curriculum and no-curriculum arms with matched seeds, budgets and
// architectures, under out_dir/curriculum and out_dir/baseline.
ComparisonResult run_comparison(const config::RunConfig& cfg, const std::filesystem::path& out_dir,
                                bool timing);

std::string format_report(const sinusoid::EvalReport& report);  // key = value lines
void write_eval_csv(const std::filesystem::path& path, const sinusoid::EvalReport& report);
sinusoid::EvalReport read_eval_csv(const std::filesystem::path& path);

}  // namespace wganc::experiment
