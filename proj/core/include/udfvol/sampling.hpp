#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "udfvol/fields.hpp"

namespace udfvol {

// Sampling kernel zeta_s(d) = s * e^{-sd} / (1 + e^{-sd})^2: positive,
// strictly decreasing in d, zeta_s(0) = s/4, integral over [0, inf) = 1/2.
double zeta_s(double d, double s);

struct SamplerConfig {
    int coarse = 64;
    int rounds = 2;
    int per_round = 32;
    double s0 = 0.05;         // base sharpness of the first round
    double round_rate = 2.0;  // round z uses s0 * round_rate^{z-1}
    bool jitter_coarse = false;
};

struct SampleSet {
    std::vector<double> t;        // ascending, coarse + hierarchical draws merged
    std::vector<double> psi;      // field values at t
    std::vector<double> added_t;  // the importance draws only, in draw order
    int coarse_count = 0;
    bool fallback_uniform = false;  // set when a round saw all-zero weights
};

// Normalized per-bin draw weights for one round: trapezoid tau integration,
// alpha-composited, neighbor-max smoothed, normalized. Returns false when the
// total mass vanished (caller falls back to uniform draws).
bool round_bin_weights(const std::vector<double>& t, const std::vector<double>& psi, double s,
                       std::vector<double>& w_out);

// Stratified inverse-CDF draws from piecewise-constant bin weights. `u` holds
// `count` stratified uniforms in [0,1).
std::vector<double> draw_from_bins(const std::vector<double>& t, const std::vector<double>& w,
                                   const std::vector<double>& u);

// Hierarchical sampler: uniform coarse samples on [t0, t1] followed by
// `rounds` importance rounds with sharpness s0 * rate^{z-1}. `eval_psi`
// evaluates the field at ray parameters (batched).
SampleSet hierarchical_sample(
    const Ray& ray, double t0, double t1, const SamplerConfig& cfg,
    const std::function<void(const std::vector<double>&, std::vector<double>&)>& eval_psi,
    uint64_t seed);

// Convenience wrapper for analytic fields.
SampleSet hierarchical_sample(const Ray& ray, double t0, double t1, const SamplerConfig& cfg,
                              const DistanceField& field, uint64_t seed);

}  // namespace udfvol
