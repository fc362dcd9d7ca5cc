#pragma once

#include <cstdint>
#include <vector>

#include "udfvol/fields.hpp"
#include "udfvol/neural.hpp"
#include "udfvol/rendering.hpp"
#include "udfvol/sampling.hpp"

namespace udfvol {

struct LossWeights {
    double color = 1.0;
    double eikonal = 0.1;
    double mask = 0.1;
};

// Normal input for the radiance head at sample i: the average of the K
// preceding spatial gradients, weighted by squared distance to sample i
// (or inverse squared distance with `inverse_weights`), then normalized.
// Sample 0 falls back to its own gradient.
struct NormalRegConfig {
    int neighbors = 3;
    bool inverse_weights = false;
};

struct RayBatchEntry {
    Ray ray;
    Vec3 target_color = Vec3::Zero();
    double target_mask = 0.0;
    double t0 = 0.0, t1 = 0.0;  // integration bounds
};

// All trainable state of one reconstruction: distance network, radiance
// network and the shared density sharpness r = exp(rate * rho).
struct SceneModel {
    ParamStore store;
    UdfNetwork udf;
    ColorNetwork color;
    DensityParamHandle density;
    DensityKind density_kind = DensityKind::Rational;

    void build(const UdfNetConfig& ucfg, const ColorNetConfig& ccfg, double r_init,
               double r_rate, uint64_t seed);
    DensityFamily family() const { return DensityFamily{density_kind, density.r(store)}; }
    // Rebuild cached layer weights after a parameter update.
    void refresh();
};

struct BatchLossStats {
    double total = 0.0;
    double color = 0.0;    // mean absolute channel error
    double eikonal = 0.0;  // mean (|grad| - 1)^2 over samples
    double mask = 0.0;     // mean binary cross entropy of accumulated opacity
    double acc_mean = 0.0;
    int64_t samples = 0;
    int rays = 0;
};

// Full objective over a batch of rays with fixed sample positions `ts`
// (one ascending parameter list per ray, at least two entries). Accumulates
// exact parameter gradients into model.store.grads(); the caller zeroes
// them. model.refresh() must have been called after the last update.
// `eik_pts` adds free-space points to the unit-gradient penalty; without
// them the penalty only acts where the rays sample, and the field can go
// flat (and stay flat, since a zero gradient gets no pull) everywhere else.
BatchLossStats compute_batch_loss(SceneModel& model, const std::vector<RayBatchEntry>& rays,
                                  const std::vector<std::vector<double>>& ts,
                                  const LossWeights& lw, const NormalRegConfig& nc,
                                  const Vec3& background = Vec3::Zero(),
                                  const Eigen::Matrix3Xd* eik_pts = nullptr);

// Linear warmup to `peak` over `warmup` iterations, then cosine decay to
// `final_lr`; never below `floor`.
double lr_schedule(int64_t iter, int64_t total, int64_t warmup, double peak, double final_lr,
                   double floor = 1e-6);

// Regresses the distance head (and its spatial gradient) onto the unsigned
// distance of a centered sphere, as a geometry warm start before rendering
// supervision. Points are drawn uniformly from a ball of radius `domain`.
void warm_start_sphere(SceneModel& model, Adam& adam, double radius, double domain, int iters,
                       int batch, double lr, uint64_t seed);

struct TrainState {
    SceneModel model;
    Adam adam;
    int64_t iter = 0;
};

// One optimizer step: hierarchical sampling along each ray (positions are
// detached), loss + gradients, Adam update. Returns the batch statistics.
// `eik_global` uniform points in the ball of radius `eik_radius` join the
// unit-gradient penalty each step.
BatchLossStats train_step(TrainState& st, const std::vector<RayBatchEntry>& rays,
                          const SamplerConfig& sampler_cfg, const LossWeights& lw,
                          const NormalRegConfig& nc, double lr, uint64_t seed,
                          const Vec3& background = Vec3::Zero(), int eik_global = 128,
                          double eik_radius = 1.0);

}  // namespace udfvol
