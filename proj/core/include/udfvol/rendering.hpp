#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "udfvol/fields.hpp"

namespace udfvol {

// Monotone concave density mappings sigma_r: [0, inf) -> [0, 1) with
// sigma_r(0) = 0 and sup sigma_r = 1. All share one sharpness parameter r.
enum class DensityKind { Rational, Exponential, Arctan };

struct DensityFamily {
    DensityKind kind = DensityKind::Rational;
    double r = 1.0;

    double sigma(double d) const;       // sigma_r(d), requires d >= 0
    double dsigma_dd(double d) const;   // d/dd sigma_r(d)
    double d2sigma_dd2(double d) const; // second derivative in d
    double dsigma_dr(double d) const;   // d/dr sigma_r(d)
};

DensityKind density_kind_from_string(const std::string& name);
std::string to_string(DensityKind kind);

// Per-bin record of the discrete compositor. Bin i spans [t[i], t[i+1]];
// weight w[i] = T[i] * alpha[i] with T[i] = prod_{j<i} (1 - alpha[j]).
struct WeightProfile {
    std::vector<double> t;      // n sample parameters (ascending)
    std::vector<double> psi;    // n field values at the samples
    std::vector<double> sigma;  // n mapped densities sigma_r(psi)
    std::vector<double> alpha;  // n-1
    std::vector<double> trans;  // n-1, transmittance entering each bin
    std::vector<double> w;      // n-1

    double acc = 0.0;  // sum of w, the predicted opacity

    size_t bins() const { return w.size(); }
    // Sum of bin weights with right endpoint <= t_query.
    double mass_through(double t_query) const;
    // Index of the sample at the right endpoint of the heaviest bin.
    int argmax_sample() const;
    void dump_tsv(const std::string& path) const;
};

// Discrete unsigned-distance compositor: per bin,
// alpha_i = (sigma_max - sigma_min) / sigma_max over the bin's two endpoint
// densities (0 when both vanish). Exact telescoping on monotone segments.
WeightProfile alpha_compose(const std::vector<double>& t, const std::vector<double>& psi,
                            const DensityFamily& family);

// Sign-aware comparator: NeuS-style alpha over Phi_s = sigmoid(s * psi) with
// negative (rising-psi) bins clamped to zero.
WeightProfile naive_neus_compose(const std::vector<double>& t, const std::vector<double>& psi,
                                 double s);

// Continuous density tau_r(t) = |d/dt sigma_r(psi(p(t)))| / sigma_r(psi(p(t)))
// evaluated with the analytic field gradient.
double tau_r_continuous(const DistanceField& field, const Ray& ray, double t,
                        const DensityFamily& family);

// Adaptive Simpson quadrature of tau_r along [t0, t1].
double integrate_tau_r(const DistanceField& field, const Ray& ray, double t0, double t1,
                       const DensityFamily& family, double tol = 1e-9);

struct RenderOptions {
    Vec3 background = Vec3::Zero();
    bool midpoint_colors = false;  // default: bin color at the left endpoint
};

// Composite per-sample colors (3 x n) into one radiance value.
Vec3 composite_color(const WeightProfile& profile, const Eigen::Matrix3Xd& colors,
                     const RenderOptions& opts);

}  // namespace udfvol
