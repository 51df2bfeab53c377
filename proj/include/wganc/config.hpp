#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "wganc/curriculum.hpp"
#include "wganc/families.hpp"
#include "wganc/sinusoid.hpp"
#include "wganc/trainer.hpp"

namespace wganc::config {

enum class ScheduleRecipe { one_hot, blended, explicit_stages };

struct ScheduleSpec {
    ScheduleRecipe recipe = ScheduleRecipe::one_hot;
    size_t iters_per_stage = 400;  // one_hot
    size_t stage_len = 300;        // blended
    size_t ramp_len = 100;         // blended
    std::vector<curriculum::Stage> stages;  // explicit
};

struct DatasetSpec {
    size_t n = 10000;
    size_t length = 64;
    sinusoid::ParamRanges ranges;
};

struct EvalSpec {
    size_t grid = 100;  // smallest resolution whose report moves < 1% vs 2x
    size_t num_samples = 256;
};

struct RunConfig {
    trainer::TrainConfig train;
    ScheduleSpec schedule;
    families::FamilySpec family;
    DatasetSpec dataset;
    EvalSpec eval;
    std::vector<size_t> gen_hidden = {128, 128};
    std::string out_dir;  // optional default; the CLI --out flag overrides

    void validate() const;
};

// Parse/serialize against a strict schema: unknown keys are rejected and all
// referenced-module validations run at load time.
RunConfig parse(const std::string& json_text, const std::string& origin);
RunConfig load(const std::filesystem::path& path);
std::string to_json(const RunConfig& cfg);  // resolved snapshot, round-trips

// Replaces all three seeds with values derived from one master seed.
void apply_seed_override(RunConfig& cfg, uint64_t master_seed);

curriculum::Schedule build_schedule(const RunConfig& cfg);
// Single-stage schedule holding e_d on the finest critic: the no-curriculum arm.
curriculum::Schedule baseline_schedule(const RunConfig& cfg);
nn::MlpSpec generator_spec(const RunConfig& cfg);

}  // namespace wganc::config
