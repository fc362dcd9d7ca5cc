#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "udfvol/fields.hpp"

namespace udfvol {

// Pinhole camera with world-to-camera pose: x_cam = R * x_world + t.
// Pixel (px, py) maps to the camera-space direction
// ((px - cx) / fx, (py - cy) / fy, 1); +z looks forward, +x right, +y down.
struct Camera {
    int width = 0, height = 0;
    double fx = 0, fy = 0, cx = 0, cy = 0;
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    Vec3 t = Vec3::Zero();

    Vec3 center() const { return -R.transpose() * t; }
    // Continuous pixel coordinates; pass x + 0.5, y + 0.5 for pixel centers.
    Ray pixel_to_ray(double px, double py) const;
    // Projects a world point; returns pixel coordinates, writes camera-space
    // depth to `depth` when given.
    Eigen::Vector2d project(const Vec3& x_world, double* depth = nullptr) const;
    // Throws on degenerate intrinsics or a non-rotation R.
    void validate() const;
};

struct CameraSet {
    std::vector<Camera> cameras;
    std::vector<std::string> files;  // image file name per camera, may be empty
};

CameraSet cameras_from_json_text(const std::string& text);
std::string cameras_to_json_text(const CameraSet& set);
CameraSet load_cameras_json(const std::string& path);
void save_cameras_json(const std::string& path, const CameraSet& set);

// Camera at `eye` looking toward `target` (camera +z), with `up` fixing the
// roll; `focal_px` is the focal length in pixels, principal point centered.
Camera make_lookat_camera(const Vec3& eye, const Vec3& target, const Vec3& up, int width,
                          int height, double focal_px);

}  // namespace udfvol
