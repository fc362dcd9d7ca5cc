#pragma once

#include <optional>
#include <string>
#include <vector>

#include "udfvol/camera.hpp"
#include "udfvol/image.hpp"
#include "udfvol/supervision.hpp"

namespace udfvol {

// Multi-view capture: cameras.json plus one PNG per camera. RGBA alpha is
// the foreground mask; plain RGB images get a constant mask of one.
struct Dataset {
    CameraSet cams;
    std::vector<Image> images;

    int count() const { return int(cams.cameras.size()); }
    Vec3 pixel_color(int view, int x, int y) const;
    double pixel_mask(int view, int x, int y) const;
};

Dataset load_dataset(const std::string& dir);

// Supervision entry for one pixel: ray through the pixel center clipped to
// the scene sphere. Empty when the ray misses the sphere entirely.
std::optional<RayBatchEntry> make_ray_entry(const Dataset& ds, int view, int x, int y,
                                            double scene_radius);

}  // namespace udfvol
