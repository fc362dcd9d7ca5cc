#pragma once

#include <string>

#include "udfvol/camera.hpp"
#include "udfvol/fields.hpp"
#include "udfvol/image.hpp"

namespace udfvol {

struct SynthConfig {
    int width = 100, height = 100;
    int views = 12;
    double orbit_radius = 2.0;  // camera distance from the z axis
    double orbit_height = 0.9;
    double focal_px = 110.0;
    double ambient = 0.3;
    double lambert = 0.7;
    Vec3 light = Vec3(0.4, 0.3, 0.85);
    double scene_radius = 1.0;
};

// First-hit flat shading, albedo * (ambient + lambert * |n . l|), black
// background, alpha records hit / no hit.
Image render_analytic_view(const AnalyticScene& scene, const Camera& cam, const SynthConfig& cfg);

// Cameras on a tilted orbit around the origin, all looking at the origin.
CameraSet make_orbit_cameras(const SynthConfig& cfg);

// Writes cameras.json plus RGBA views named view_XXX.png into `dir`
// (created when missing).
void write_synth_dataset(const AnalyticScene& scene, const SynthConfig& cfg,
                         const std::string& dir);

}  // namespace udfvol
