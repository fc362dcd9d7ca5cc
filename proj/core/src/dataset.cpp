#include "udfvol/dataset.hpp"

#include <filesystem>
#include <stdexcept>

namespace udfvol {

Vec3 Dataset::pixel_color(int view, int x, int y) const {
    const Image& img = images[size_t(view)];
    return Vec3(img.at(x, y, 0), img.at(x, y, 1), img.at(x, y, 2)) / 255.0;
}

double Dataset::pixel_mask(int view, int x, int y) const {
    const Image& img = images[size_t(view)];
    return img.channels == 4 ? img.at(x, y, 3) / 255.0 : 1.0;
}

Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    Dataset ds;
    ds.cams = load_cameras_json((fs::path(dir) / "cameras.json").string());
    ds.images.reserve(ds.cams.cameras.size());
    for (size_t i = 0; i < ds.cams.cameras.size(); ++i) {
        if (ds.cams.files[i].empty())
            throw std::runtime_error("dataset: camera " + std::to_string(i) +
                                     " has no image file");
        Image img = load_png((fs::path(dir) / ds.cams.files[i]).string());
        const Camera& cam = ds.cams.cameras[i];
        if (img.width != cam.width || img.height != cam.height)
            throw std::runtime_error("dataset: image size mismatch for " + ds.cams.files[i]);
        ds.images.push_back(std::move(img));
    }
    return ds;
}

std::optional<RayBatchEntry> make_ray_entry(const Dataset& ds, int view, int x, int y,
                                            double scene_radius) {
    const Camera& cam = ds.cams.cameras[size_t(view)];
    RayBatchEntry e;
    e.ray = cam.pixel_to_ray(x + 0.5, y + 0.5);
    auto clip = sphere_clip(e.ray, scene_radius);
    if (!clip) return std::nullopt;
    e.t0 = clip->first;
    e.t1 = clip->second;
    e.target_color = ds.pixel_color(view, x, y);
    e.target_mask = ds.pixel_mask(view, x, y);
    return e;
}

}  // namespace udfvol
