#pragma once

#include <cstdint>
#include <string>

#include "udfvol/neural.hpp"
#include "udfvol/sampling.hpp"
#include "udfvol/supervision.hpp"

namespace udfvol {

struct DataConfig {
    std::string scene;        // builtin name or scene JSON path (analytic supervision)
    std::string dataset_dir;  // directory holding cameras.json and PNG views
    double scene_radius = 1.0;
    Vec3 background = Vec3::Zero();  // radiance behind rays that keep transmittance
};

struct ModelConfig {
    UdfNetConfig udf;
    ColorNetConfig color;
    std::string density = "rational";
    // Start the learned sharpness where the density already saturates a few
    // tenths away from the surface; far smaller values make every ray
    // absorb (the compositor works on density ratios) and the mask loss
    // then fights the whole field instead of the surface.
    double r_init = 20.0;
    double r_rate = 10.0;
};

struct TrainConfig {
    int iterations = 20000;
    int rays_per_batch = 512;
    int warmup_iters = 5000;
    double lr_peak = 2e-4;
    double lr_final = 1e-5;
    double lr_floor = 1e-6;
    int warm_start_iters = 1500;
    int warm_start_batch = 1024;
    double warm_start_radius = 0.3;
    double warm_start_lr = 1e-3;
    int log_every = 50;
    int checkpoint_every = 5000;
    // The sampler's base sharpness doubles every `s0_double_every`
    // iterations (geometrically, capped), so late importance rounds focus
    // tightly on the level set. <= 0 disables the anneal.
    double s0_double_every = 2000.0;
    double s0_cap = 64.0;
    int eik_global = 128;  // free-space points joining the unit-gradient penalty
    LossWeights loss;
    NormalRegConfig normals;
};

// Sampler sharpness after `iter` optimizer steps.
double annealed_s0(const SamplerConfig& sampler, const TrainConfig& train, int64_t iter);

struct RunConfig {
    uint64_t seed = 1;
    DataConfig data;
    ModelConfig model;
    SamplerConfig sampler;
    TrainConfig train;
};

// Every key is optional (defaults apply); unknown keys anywhere are an
// error. to/from round trips exactly.
RunConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const RunConfig& cfg);
RunConfig load_config(const std::string& path);
void save_config(const std::string& path, const RunConfig& cfg);

}  // namespace udfvol
