#include "udfvol/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <stdexcept>

namespace udfvol {

namespace {

uint8_t quantize(double v) {
    return uint8_t(std::clamp(std::lround(v * 255.0), 0L, 255L));
}

}  // namespace

Image render_analytic_view(const AnalyticScene& scene, const Camera& cam,
                           const SynthConfig& cfg) {
    Image img(cam.width, cam.height, 4);
    const Vec3 l = cfg.light.normalized();
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            Ray ray = cam.pixel_to_ray(x + 0.5, y + 0.5);
            auto clip = sphere_clip(ray, cfg.scene_radius);
            if (!clip) continue;
            auto hits = scene.intersections(ray, clip->first, clip->second);
            if (hits.empty()) continue;
            const RayHit& h = hits.front();
            const Vec3& albedo = scene.primitives[size_t(h.primitive)].albedo;
            const double shade = cfg.ambient + cfg.lambert * std::abs(h.normal.dot(l));
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = quantize(albedo[c] * shade);
            img.at(x, y, 3) = 255;
        }
    }
    return img;
}

CameraSet make_orbit_cameras(const SynthConfig& cfg) {
    if (cfg.views <= 0) throw std::invalid_argument("need at least one view");
    CameraSet set;
    for (int i = 0; i < cfg.views; ++i) {
        const double a = 2.0 * std::numbers::pi * i / cfg.views;
        const Vec3 eye(cfg.orbit_radius * std::cos(a), cfg.orbit_radius * std::sin(a),
                       cfg.orbit_height);
        set.cameras.push_back(make_lookat_camera(eye, Vec3::Zero(), Vec3::UnitZ(), cfg.width,
                                                 cfg.height, cfg.focal_px));
        char name[32];
        std::snprintf(name, sizeof(name), "view_%03d.png", i);
        set.files.emplace_back(name);
    }
    return set;
}

void write_synth_dataset(const AnalyticScene& scene, const SynthConfig& cfg,
                         const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    CameraSet set = make_orbit_cameras(cfg);
    save_cameras_json((fs::path(dir) / "cameras.json").string(), set);
    for (size_t i = 0; i < set.cameras.size(); ++i) {
        Image img = render_analytic_view(scene, set.cameras[i], cfg);
        save_png((fs::path(dir) / set.files[i]).string(), img);
    }
}

}  // namespace udfvol
