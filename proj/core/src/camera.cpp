#include "udfvol/camera.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "json_util.hpp"

namespace udfvol {

Ray Camera::pixel_to_ray(double px, double py) const {
    if (!(px >= 0.0 && px <= width && py >= 0.0 && py <= height))
        throw std::out_of_range("camera: pixel outside the image");
    Vec3 dir_cam((px - cx) / fx, (py - cy) / fy, 1.0);
    Ray ray;
    ray.origin = center();
    ray.dir = (R.transpose() * dir_cam).normalized();
    return ray;
}

Eigen::Vector2d Camera::project(const Vec3& x_world, double* depth) const {
    Vec3 xc = R * x_world + t;
    if (depth) *depth = xc.z();
    if (std::abs(xc.z()) < 1e-12) throw std::runtime_error("camera: point on the image plane");
    return Eigen::Vector2d(fx * xc.x() / xc.z() + cx, fy * xc.y() / xc.z() + cy);
}

void Camera::validate() const {
    if (width <= 0 || height <= 0) throw std::runtime_error("camera: bad image size");
    if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy))
        throw std::runtime_error("camera: focal lengths must be positive");
    if (!std::isfinite(cx) || !std::isfinite(cy))
        throw std::runtime_error("camera: principal point must be finite");
    if (!R.allFinite() || !t.allFinite()) throw std::runtime_error("camera: non-finite pose");
    Eigen::Matrix3d err = R.transpose() * R - Eigen::Matrix3d::Identity();
    if (err.cwiseAbs().maxCoeff() > 1e-6)
        throw std::runtime_error("camera: R is not orthonormal");
    if (std::abs(R.determinant() - 1.0) > 1e-6)
        throw std::runtime_error("camera: R must have determinant +1");
}

namespace {

Camera camera_from_json(const nlohmann::json& j, size_t index) {
    const std::string ctx = "cameras[" + std::to_string(index) + "]";
    detail::require_object(j, ctx);
    detail::require_keys(j, ctx,
                         {"width", "height", "fx", "fy", "cx", "cy", "R", "t", "file"});
    auto num = [&](const char* key) {
        if (!j.contains(key) || !j.at(key).is_number())
            throw std::runtime_error(ctx + ": missing or non-numeric '" + key + "'");
        return j.at(key).get<double>();
    };
    Camera c;
    c.width = int(num("width"));
    c.height = int(num("height"));
    c.fx = num("fx");
    c.fy = num("fy");
    c.cx = num("cx");
    c.cy = num("cy");
    if (!j.contains("R")) throw std::runtime_error(ctx + ": missing 'R'");
    if (!j.contains("t")) throw std::runtime_error(ctx + ": missing 't'");
    const auto& rj = j.at("R");
    if (!rj.is_array() || rj.size() != 3)
        throw std::runtime_error(ctx + ": R must be a 3x3 row-major array");
    for (int r = 0; r < 3; ++r) {
        const auto& row = rj[size_t(r)];
        if (!row.is_array() || row.size() != 3)
            throw std::runtime_error(ctx + ": R must be a 3x3 row-major array");
        for (int col = 0; col < 3; ++col) c.R(r, col) = row[size_t(col)].get<double>();
    }
    c.t = detail::parse_vec3(j.at("t"), ctx + ".t");
    try {
        c.validate();
    } catch (const std::exception& e) {
        throw std::runtime_error(ctx + ": " + e.what());
    }
    return c;
}

}  // namespace

CameraSet cameras_from_json_text(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    detail::require_object(j, "cameras file");
    detail::require_keys(j, "cameras file", {"cameras"});
    const auto& arr = j.at("cameras");
    if (!arr.is_array() || arr.empty())
        throw std::runtime_error("cameras file: 'cameras' must be a non-empty array");
    CameraSet set;
    for (size_t i = 0; i < arr.size(); ++i) {
        set.cameras.push_back(camera_from_json(arr[i], i));
        if (arr[i].contains("file") && !arr[i]["file"].is_string())
            throw std::runtime_error("cameras[" + std::to_string(i) +
                                     "]: 'file' must be a string");
        set.files.push_back(arr[i].contains("file") ? arr[i]["file"].get<std::string>()
                                                    : std::string());
    }
    return set;
}

std::string cameras_to_json_text(const CameraSet& set) {
    nlohmann::json arr = nlohmann::json::array();
    for (size_t i = 0; i < set.cameras.size(); ++i) {
        const Camera& c = set.cameras[i];
        nlohmann::json j{{"width", c.width}, {"height", c.height}, {"fx", c.fx},
                         {"fy", c.fy},       {"cx", c.cx},         {"cy", c.cy}};
        j["R"] = {{c.R(0, 0), c.R(0, 1), c.R(0, 2)},
                  {c.R(1, 0), c.R(1, 1), c.R(1, 2)},
                  {c.R(2, 0), c.R(2, 1), c.R(2, 2)}};
        j["t"] = {c.t.x(), c.t.y(), c.t.z()};
        if (i < set.files.size() && !set.files[i].empty()) j["file"] = set.files[i];
        arr.push_back(std::move(j));
    }
    nlohmann::json root{{"cameras", std::move(arr)}};
    return root.dump(2);
}

CameraSet load_cameras_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open cameras file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return cameras_from_json_text(ss.str());
}

void save_cameras_json(const std::string& path, const CameraSet& set) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write cameras file: " + path);
    out << cameras_to_json_text(set) << "\n";
}

Camera make_lookat_camera(const Vec3& eye, const Vec3& target, const Vec3& up, int width,
                          int height, double focal_px) {
    Vec3 fwd = target - eye;
    if (fwd.norm() < 1e-12) throw std::runtime_error("look-at: eye equals target");
    fwd.normalize();
    Vec3 right = fwd.cross(up.normalized());
    if (right.norm() < 1e-9) throw std::runtime_error("look-at: view direction parallel to up");
    right.normalize();
    Vec3 down = fwd.cross(right);  // +y points down in the image

    Camera c;
    c.width = width;
    c.height = height;
    c.fx = c.fy = focal_px;
    c.cx = 0.5 * width;
    c.cy = 0.5 * height;
    c.R.row(0) = right.transpose();
    c.R.row(1) = down.transpose();
    c.R.row(2) = fwd.transpose();
    c.t = -c.R * eye;
    c.validate();
    return c;
}

}  // namespace udfvol
