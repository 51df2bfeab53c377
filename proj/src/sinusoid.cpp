#include "wganc/sinusoid.hpp"

#include <cmath>

#include "wganc/error.hpp"
#include "wganc/rng.hpp"

namespace wganc::sinusoid {

void ParamRanges::validate() const {
    if (a_min > a_max || omega_min > omega_max || b_min > b_max) {
        throw ConfigError("sinusoid ranges: empty parameter range");
    }
    if (a_min < 0.0) throw ConfigError("sinusoid ranges: amplitude must be nonnegative");
}

std::vector<double> render_wave(const SineParams& p, size_t t_len) {
    std::vector<double> wave(t_len);
    for (size_t t = 0; t < t_len; ++t) {
        wave[t] = p.amplitude * std::sin(p.omega * static_cast<double>(t) + p.phase);
    }
    return wave;
}

SineDataset make_dataset(size_t n, size_t t_len, const ParamRanges& ranges, uint64_t seed) {
    ranges.validate();
    if (n < 1 || t_len < 1) throw ConfigError("sinusoid dataset: n and T must be >= 1");
    Rng rng(seed);
    SineDataset ds;
    ds.ranges = ranges;
    ds.seed = seed;
    ds.waves = ad::Tensor::zeros({n, t_len});
    for (size_t i = 0; i < n; ++i) {
        SineParams p;
        p.amplitude = rng.uniform(ranges.a_min, ranges.a_max);
        p.omega = rng.uniform(ranges.omega_min, ranges.omega_max);
        p.phase = rng.uniform(ranges.b_min, ranges.b_max);
        const std::vector<double> wave = render_wave(p, t_len);
        for (size_t t = 0; t < t_len; ++t) ds.waves.data[i * t_len + t] = wave[t];
    }
    return ds;
}

namespace {

// Inclusive endpoints; a single point collapses to the lower bound.
std::vector<double> linspace_inclusive(double lo, double hi, size_t n) {
    std::vector<double> v(n);
    if (n == 1) {
        v[0] = lo;
        return v;
    }
    for (size_t i = 0; i < n; ++i) {
        v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return v;
}

// Excludes the upper endpoint, matching the half-open phase interval.
std::vector<double> linspace_exclusive(double lo, double hi, size_t n) {
    std::vector<double> v(n);
    for (size_t i = 0; i < n; ++i) {
        v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n);
    }
    return v;
}

}  // namespace

EvalReport nearest_sine_error(const ad::Tensor& samples, const ParamRanges& ranges,
                              size_t grid_resolution) {
    ranges.validate();
    if (samples.rank() != 2) throw ShapeError("nearest_sine_error: samples must be [n, T]");
    if (grid_resolution < 2) throw ValueError("nearest_sine_error: grid resolution must be >= 2");

    const size_t n = samples.rows(), t_len = samples.cols();
    const std::vector<double> amps = linspace_inclusive(ranges.a_min, ranges.a_max, grid_resolution);
    const std::vector<double> omegas =
        linspace_inclusive(ranges.omega_min, ranges.omega_max, grid_resolution);
    const std::vector<double> phases = linspace_exclusive(ranges.b_min, ranges.b_max, grid_resolution);

    // Precompute unit-amplitude grid waves; amplitude scales at lookup time.
    std::vector<double> unit_waves(omegas.size() * phases.size() * t_len);
    for (size_t wi = 0; wi < omegas.size(); ++wi) {
        for (size_t pi = 0; pi < phases.size(); ++pi) {
            double* wave = &unit_waves[(wi * phases.size() + pi) * t_len];
            for (size_t t = 0; t < t_len; ++t) {
                wave[t] = std::sin(omegas[wi] * static_cast<double>(t) + phases[pi]);
            }
        }
    }

    double sum = 0.0, sum_sq = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double* sample = &samples.data[i * t_len];
        double best = 1e300;
        for (double amp : amps) {
            for (size_t wi = 0; wi < omegas.size(); ++wi) {
                for (size_t pi = 0; pi < phases.size(); ++pi) {
                    const double* wave = &unit_waves[(wi * phases.size() + pi) * t_len];
                    double ssq = 0.0;
                    for (size_t t = 0; t < t_len; ++t) {
                        const double d = sample[t] - amp * wave[t];
                        ssq += d * d;
                    }
                    if (ssq < best) best = ssq;  // strict: first grid point wins ties
                }
            }
        }
        const double dist = std::sqrt(best);
        sum += dist;
        sum_sq += dist * dist;
    }

    EvalReport report;
    report.n_samples = n;
    report.grid_resolution = grid_resolution;
    report.mean_error = sum / static_cast<double>(n);
    const double var = sum_sq / static_cast<double>(n) - report.mean_error * report.mean_error;
    report.std_error = n > 1 ? std::sqrt(std::max(0.0, var) / static_cast<double>(n - 1)) : 0.0;
    return report;
}

}  // namespace wganc::sinusoid
