#pragma once

#include "udfvol/camera.hpp"
#include "udfvol/image.hpp"
#include "udfvol/rendering.hpp"
#include "udfvol/sampling.hpp"
#include "udfvol/supervision.hpp"
#include "udfvol/synth.hpp"

namespace udfvol {

struct VolumeRenderOptions {
    SamplerConfig sampler;
    NormalRegConfig normals;
    Vec3 background = Vec3::Zero();
    double scene_radius = 1.0;
    uint64_t seed = 0;
    // analytic path
    int analytic_samples = 256;
    double analytic_r = 1e4;
    DensityKind analytic_kind = DensityKind::Rational;
    SynthConfig shading;
};

// Volume rendering of a trained model; RGBA with alpha = accumulated
// opacity. Deterministic for a fixed seed.
Image render_model_view(SceneModel& model, const Camera& cam, const VolumeRenderOptions& opts);

// The same compositing path driven by the exact analytic field: uniform
// samples with the surface crossings snapped onto the grid, first-hit
// shading for the sample colors. Matches the flat-shaded reference images
// up to quantization.
Image render_analytic_volume_view(const AnalyticScene& scene, const Camera& cam,
                                  const VolumeRenderOptions& opts);

}  // namespace udfvol
