#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

#include "wganc/checkpoint.hpp"
#include "wganc/config.hpp"
#include "wganc/csvio.hpp"
#include "wganc/error.hpp"
#include "wganc/experiment.hpp"

namespace fs = std::filesystem;
using namespace wganc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumeric = 2;

struct SeedList {
    std::vector<uint64_t> seeds;
};

SeedList parse_seeds(const std::string& csv) {
    SeedList out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (tok.empty()) continue;
        out.seeds.push_back(std::stoull(tok));
    }
    if (out.seeds.empty()) throw ConfigError("--seeds: no seeds given");
    return out;
}

config::RunConfig load_config(const std::string& path, bool has_seed, uint64_t seed) {
    config::RunConfig cfg = config::load(path);
    if (has_seed) config::apply_seed_override(cfg, seed);
    return cfg;
}

fs::path resolve_out_dir(const std::string& flag, const config::RunConfig& cfg) {
    if (!flag.empty()) return flag;
    if (!cfg.out_dir.empty()) return cfg.out_dir;
    throw ConfigError("no output directory: pass --out or set out_dir in the config");
}

int cmd_train(const std::string& config_path, const std::string& out_flag, bool has_seed,
              uint64_t seed, bool baseline, bool timing) {
    config::RunConfig cfg = load_config(config_path, has_seed, seed);
    const fs::path out = resolve_out_dir(out_flag, cfg);
    experiment::ArmResult res = experiment::run_arm(cfg, out, baseline, timing);
    std::cerr << (baseline ? "baseline" : "curriculum") << " arm: " << cfg.train.iterations
              << " iterations in " << res.wall_seconds << " s\n";
    std::cout << experiment::format_report(res.report);
    return kExitOk;
}

int cmd_eval(const std::string& samples_path, const std::string& config_path) {
    config::RunConfig cfg = config::load(config_path);
    ad::Tensor samples = csvio::read_samples_csv(samples_path);
    if (samples.cols() != cfg.dataset.length) {
        throw ConfigError("samples width " + std::to_string(samples.cols()) +
                          " does not match the configured length " +
                          std::to_string(cfg.dataset.length));
    }
    sinusoid::EvalReport report =
        sinusoid::nearest_sine_error(samples, cfg.dataset.ranges, cfg.eval.grid);
    std::cout << experiment::format_report(report);
    experiment::write_eval_csv(fs::path(samples_path).parent_path() / "eval.csv", report);
    return kExitOk;
}

struct SeedRow {
    uint64_t seed;
    sinusoid::EvalReport curriculum, baseline;
    double improvement;
    double curriculum_wall, baseline_wall;
};

SeedRow run_one_seed(const config::RunConfig& base_cfg, const fs::path& out, uint64_t seed,
                     bool timing) {
    config::RunConfig cfg = base_cfg;
    config::apply_seed_override(cfg, seed);
    experiment::ComparisonResult res =
        experiment::run_comparison(cfg, out / ("seed_" + std::to_string(seed)), timing);
    return {seed,
            res.curriculum.report,
            res.baseline.report,
            res.improvement,
            res.curriculum.wall_seconds,
            res.baseline.wall_seconds};
}

void write_summary(const fs::path& out, const std::vector<SeedRow>& rows) {
    std::ostringstream os;
    os << "seed,curriculum_error,curriculum_stderr,baseline_error,baseline_stderr,improvement,"
          "curriculum_wall_s,baseline_wall_s\n";
    double cur_sum = 0.0, base_sum = 0.0;
    for (const SeedRow& r : rows) {
        os << r.seed << ',' << csvio::format_double(r.curriculum.mean_error) << ','
           << csvio::format_double(r.curriculum.std_error) << ','
           << csvio::format_double(r.baseline.mean_error) << ','
           << csvio::format_double(r.baseline.std_error) << ','
           << csvio::format_double(r.improvement) << ',' << csvio::format_double(r.curriculum_wall)
           << ',' << csvio::format_double(r.baseline_wall) << '\n';
        cur_sum += r.curriculum.mean_error;
        base_sum += r.baseline.mean_error;
    }
    const double n = static_cast<double>(rows.size());
    const double cur_mean = cur_sum / n, base_mean = base_sum / n;
    const double agg = base_mean == 0.0 ? 0.0 : (base_mean - cur_mean) / base_mean;
    os << "aggregate," << csvio::format_double(cur_mean) << ",," << csvio::format_double(base_mean)
       << ",," << csvio::format_double(agg) << ",,\n";
    csvio::atomic_write_text(out / "summary.csv", os.str());
}

int cmd_compare(const std::string& config_path, const std::string& out_flag,
                const std::string& seeds_csv, bool parallel, bool timing) {
    config::RunConfig cfg = config::load(config_path);
    const fs::path out = resolve_out_dir(out_flag, cfg);
    fs::create_directories(out);
    SeedList seeds = parse_seeds(seeds_csv);

    std::vector<SeedRow> rows;
    if (!parallel) {
        for (uint64_t s : seeds.seeds) {
            rows.push_back(run_one_seed(cfg, out, s, timing));
            std::cerr << "seed " << s << ": curriculum " << rows.back().curriculum.mean_error
                      << " vs baseline " << rows.back().baseline.mean_error << '\n';
        }
    } else {
        // One child process per seed; each writes its own artifact directory,
        // the parent re-reads the eval results to build the summary.
        std::vector<pid_t> children;
        for (uint64_t s : seeds.seeds) {
            pid_t pid = fork();
            if (pid < 0) throw IoError("fork failed");
            if (pid == 0) {
                try {
                    run_one_seed(cfg, out, s, timing);
                    _exit(kExitOk);
                } catch (const NumericError&) {
                    _exit(kExitNumeric);
                } catch (const std::exception&) {
                    _exit(kExitConfig);
                }
            }
            children.push_back(pid);
        }
        int worst = kExitOk;
        for (pid_t pid : children) {
            int status = 0;
            waitpid(pid, &status, 0);
            const int code = WIFEXITED(status) ? WEXITSTATUS(status) : kExitConfig;
            worst = std::max(worst, code);
        }
        if (worst != kExitOk) return worst;
        for (uint64_t s : seeds.seeds) {
            const fs::path seed_dir = out / ("seed_" + std::to_string(s));
            SeedRow row;
            row.seed = s;
            row.curriculum = experiment::read_eval_csv(seed_dir / "curriculum" / "eval.csv");
            row.baseline = experiment::read_eval_csv(seed_dir / "baseline" / "eval.csv");
            row.improvement = row.baseline.mean_error == 0.0
                                  ? 0.0
                                  : (row.baseline.mean_error - row.curriculum.mean_error) /
                                        row.baseline.mean_error;
            // wall-clock is not recoverable from the child artifacts
            row.curriculum_wall = 0.0;
            row.baseline_wall = 0.0;
            rows.push_back(row);
        }
    }
    write_summary(out, rows);
    std::cout << "summary written to " << (out / "summary.csv").string() << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Curriculum WGAN training and evaluation"};
    app.require_subcommand(1);

    std::string config_path, out_dir, samples_path, seeds_csv = "1,2,3";
    uint64_t seed = 0;
    bool baseline = false, timing = false, parallel = false;

    CLI::App* train = app.add_subcommand("train", "train one arm and emit artifacts");
    train->add_option("--config", config_path, "run config (JSON)")->required();
    train->add_option("--out", out_dir, "output directory");
    CLI::Option* seed_opt = train->add_option("--seed", seed, "master seed override");
    train->add_flag("--baseline", baseline, "single-stage schedule on the finest critic");
    train->add_flag("--timing", timing, "record wall-clock ms in metrics.csv");

    CLI::App* eval = app.add_subcommand("eval", "nearest-sine error of a samples dump");
    eval->add_option("--samples", samples_path, "samples CSV")->required();
    eval->add_option("--config", config_path, "run config (JSON)")->required();

    CLI::App* compare = app.add_subcommand("compare", "paired curriculum vs baseline runs");
    compare->add_option("--config", config_path, "run config (JSON)")->required();
    compare->add_option("--out", out_dir, "output directory");
    compare->add_option("--seeds", seeds_csv, "comma-separated master seeds");
    compare->add_flag("--parallel", parallel, "one process per seed");
    compare->add_flag("--timing", timing, "record wall-clock ms in metrics.csv");

    try {
        app.parse(argc, argv);
        if (train->parsed()) {
            return cmd_train(config_path, out_dir, seed_opt->count() > 0, seed, baseline, timing);
        }
        if (eval->parsed()) return cmd_eval(samples_path, config_path);
        if (compare->parsed()) return cmd_compare(config_path, out_dir, seeds_csv, parallel, timing);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const NumericError& e) {
        std::cerr << "numeric abort: " << e.what() << '\n';
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitOk;
}
