#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "udfvol/fields.hpp"
#include "udfvol/rendering.hpp"

namespace udfvol {

// Uniform grid of n samples on [t0, t1] where for each anchor the nearest
// sample is moved onto the anchor (the count stays n). Verification grids
// use this so that surface crossings coincide with sample points.
std::vector<double> snapped_grid(double t0, double t1, int n, const std::vector<double>& anchors);

// Relative error of prod_{i in [i0, i1)} (1 - alpha_i) against the closed
// form sigma[i1] / sigma[i0]; the field must be monotone on that range.
double telescoping_error(const WeightProfile& p, size_t i0, size_t i1);

struct ExtractionConfig {
    int grid = 96;        // cells per axis over [-domain, domain]^3
    double domain = 1.0;
    double eps = 1e-3;    // keep projected points with residual <= eps
    int max_iters = 24;
};

// Zero-level-set point extraction: probe a cell grid, project candidate
// centers along the distance gradient, keep converged points.
std::vector<Vec3> extract_zero_set(const DistanceField& field, const ExtractionConfig& cfg);

// Symmetric mean squared nearest-neighbor distance between point clouds.
double chamfer_sq(const std::vector<Vec3>& a, const std::vector<Vec3>& b);
double chamfer_sq_brute(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

// Area-weighted uniform samples of an analytic scene's surface.
std::vector<Vec3> sample_surface(const AnalyticScene& scene, int count, uint64_t seed);

// Translate to the centroid and scale so the farthest point has norm one.
void normalize_points_unit(std::vector<Vec3>& pts);

// ASCII point-cloud PLY (double x/y/z vertex properties).
void save_ply(const std::string& path, const std::vector<Vec3>& pts);
std::vector<Vec3> load_ply(const std::string& path);

// Mass accounting on a two-surface ray for the unsigned compositor across a
// sharpness sweep, against the sign-aware comparator at one fixed s.
struct BiasRow {
    double r = 0.0;
    double mass_first = 0.0;    // weight at or before the first hit
    double mass_between = 0.0;  // weight strictly between the hits
    double residual = 0.0;      // remainder (after second hit or never absorbed)
    double argmax_t = 0.0;      // sample at the right end of the heaviest bin
    double mass_near_first = 0.0;  // weight within +-delta of the first hit
};

struct BiasStudy {
    int samples = 0;
    double t_first = 0.0, t_second = 0.0;
    double delta = 0.0;
    std::vector<BiasRow> rows;
    double naive_s = 0.0;
    double naive_mass_first = 0.0, naive_mass_between = 0.0, naive_residual = 0.0;
    // Weight placed before the comparator's approach point t_first - 4/s,
    // where the continuous limit still carries sigmoid(-4) of the mass.
    double naive_mass_early = 0.0;
};

BiasStudy run_bias_study(const AnalyticScene& scene, const Ray& ray, double t0, double t1, int n,
                         const std::vector<double>& rs, DensityKind kind, double naive_s,
                         double delta);
std::string bias_study_text(const BiasStudy& study);
std::string bias_study_json(const BiasStudy& study);

}  // namespace udfvol
