#include "wganc/experiment.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "wganc/checkpoint.hpp"
#include "wganc/csvio.hpp"
#include "wganc/error.hpp"
#include "wganc/rng.hpp"

namespace wganc::experiment {

namespace fs = std::filesystem;

namespace {

ad::Tensor draw_samples(const nn::MlpParams& gen, size_t count, size_t z_dim, uint64_t seed) {
    Rng rng(seed);
    return nn::mlp_eval(gen, trainer::sample_noise(count, z_dim, rng));
}

}  // namespace

ArmResult run_arm(const config::RunConfig& cfg, const fs::path& out_dir, bool baseline,
                  bool timing) {
    cfg.validate();
    fs::create_directories(out_dir / "checkpoints");
    csvio::atomic_write_text(out_dir / "config.json", config::to_json(cfg));

    sinusoid::SineDataset dataset =
        sinusoid::make_dataset(cfg.dataset.n, cfg.dataset.length, cfg.dataset.ranges, cfg.train.data_seed);
    families::CriticBank bank = families::build_bank(cfg.family, cfg.train.init_seed);
    nn::MlpParams gen = nn::init_mlp(config::generator_spec(cfg), mix_seed(cfg.train.init_seed, 999));
    curriculum::Schedule schedule =
        baseline ? config::baseline_schedule(cfg) : config::build_schedule(cfg);

    ArmResult result;
    csvio::MetricsWriter writer(out_dir / "metrics.csv", timing);
    trainer::TrainCallbacks cb;
    cb.on_row = [&](const trainer::IterationRecord& row) { writer.write_row(row); };
    cb.on_stage_change = [&](size_t stage) {
        checkpoint::save_mlp(out_dir / "checkpoints" / ("gen_stage_" + std::to_string(stage) + ".txt"),
                             gen);
    };

    const auto start = std::chrono::steady_clock::now();
    try {
        result.metrics =
            trainer::train(cfg.train, schedule, bank, gen, trainer::replay_sampler(dataset.waves), cb);
    } catch (const NumericError&) {
        writer.finalize();  // publish the partial metrics stream
        throw;
    }
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    writer.finalize();

    checkpoint::save_mlp(out_dir / "checkpoints" / "gen_final.txt", gen);
    checkpoint::save_bank(out_dir / "checkpoints" / "bank_final.txt", bank);

    ad::Tensor samples = draw_samples(gen, cfg.eval.num_samples, cfg.train.z_dim,
                                      mix_seed(cfg.train.train_seed, 777));
    csvio::write_samples_csv(out_dir / "samples.csv", samples);

    result.report = sinusoid::nearest_sine_error(samples, cfg.dataset.ranges, cfg.eval.grid);
    write_eval_csv(out_dir / "eval.csv", result.report);
    return result;
}

ComparisonResult run_comparison(const config::RunConfig& cfg, const fs::path& out_dir, bool timing) {
    ComparisonResult res;
    res.curriculum = run_arm(cfg, out_dir / "curriculum", /*baseline=*/false, timing);
    res.baseline = run_arm(cfg, out_dir / "baseline", /*baseline=*/true, timing);
    res.improvement = res.baseline.report.mean_error == 0.0
                          ? 0.0
                          : (res.baseline.report.mean_error - res.curriculum.report.mean_error) /
                                res.baseline.report.mean_error;
    return res;
}

std::string format_report(const sinusoid::EvalReport& report) {
    std::ostringstream os;
    os << "mean_error = " << csvio::format_double(report.mean_error) << '\n';
    os << "std_error = " << csvio::format_double(report.std_error) << '\n';
    os << "n_samples = " << report.n_samples << '\n';
    os << "grid_resolution = " << report.grid_resolution << '\n';
    return os.str();
}

void write_eval_csv(const fs::path& path, const sinusoid::EvalReport& report) {
    std::ostringstream os;
    os << "mean_error,std_error,n_samples,grid\n";
    os << csvio::format_double(report.mean_error) << ',' << csvio::format_double(report.std_error)
       << ',' << report.n_samples << ',' << report.grid_resolution << '\n';
    csvio::atomic_write_text(path, os.str());
}

sinusoid::EvalReport read_eval_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::string header, data;
    std::getline(in, header);
    if (!std::getline(in, data)) throw IoError(path.string() + ": missing data row");
    sinusoid::EvalReport r;
    unsigned long n = 0, grid = 0;
    if (std::sscanf(data.c_str(), "%lf,%lf,%lu,%lu", &r.mean_error, &r.std_error, &n, &grid) != 4) {
        throw IoError(path.string() + ": malformed eval row");
    }
    r.n_samples = n;
    r.grid_resolution = grid;
    return r;
}

}  // namespace wganc::experiment
