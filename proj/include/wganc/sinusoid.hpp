#pragma once

#include <cstdint>
#include <vector>

#include "wganc/tensor.hpp"

namespace wganc::sinusoid {

// x_t = A sin(w t + b), t = 0..T-1. Phase is half-open in [b_min, b_max).
// Default frequencies span 0.5 to 2 full cycles over a length-64 wave.
struct ParamRanges {
    double a_min = 0.5, a_max = 1.5;
    double omega_min = 0.049087385212340517;  // pi/64
    double omega_max = 0.19634954084936207;   // pi/16
    double b_min = 0.0, b_max = 6.283185307179586;  // 2*pi

    void validate() const;
};

struct SineParams {
    double amplitude = 1.0;
    double omega = 1.0;
    double phase = 0.0;
};

std::vector<double> render_wave(const SineParams& p, size_t t_len);

struct SineDataset {
    ad::Tensor waves;  // [N, T]
    ParamRanges ranges;
    uint64_t seed = 0;
};

// Parameters drawn uniformly per wave; deterministic per seed.
SineDataset make_dataset(size_t n, size_t t_len, const ParamRanges& ranges, uint64_t seed);

struct EvalReport {
    double mean_error = 0.0;
    double std_error = 0.0;  // standard error of the mean
    size_t n_samples = 0;
    size_t grid_resolution = 0;
};

// Mean over samples of the minimum l2 distance to a sinusoid on the
// resolution^3 (A, omega, b) grid. Amplitude and omega grids include both
// endpoints; the phase grid is endpoint-exclusive to respect [0, 2*pi). Ties
// break toward the lexicographically first grid point by iteration order.
EvalReport nearest_sine_error(const ad::Tensor& samples, const ParamRanges& ranges,
                              size_t grid_resolution);

}  // namespace wganc::sinusoid
