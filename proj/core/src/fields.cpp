#include "udfvol/fields.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace udfvol {

namespace {

constexpr double kCuspEps = 1e-12;

Vec3 parse_vec3(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 3)
        throw std::runtime_error("scene: " + what + " must be an array of 3 numbers");
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

}  // namespace

void DistanceField::eval_dist(const std::vector<Vec3>& pts, std::vector<double>& out) const {
    out.resize(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) out[i] = eval(pts[i]).dist;
}

void DistanceField::eval_batch(const std::vector<Vec3>& pts, std::vector<FieldSample>& out) const {
    out.resize(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) out[i] = eval(pts[i]);
}

double Primitive::distance(const Vec3& p, Vec3* nearest, bool* degenerate) const {
    if (degenerate) *degenerate = false;
    switch (type) {
        case Type::Sphere: {
            Vec3 rel = p - center;
            double n = rel.norm();
            Vec3 dir = n > kCuspEps ? Vec3(rel / n) : Vec3::UnitX();  // center is a cusp
            if (degenerate && n <= kCuspEps) *degenerate = true;
            if (nearest) *nearest = center + radius * dir;
            return std::abs(n - radius);
        }
        case Type::Disk: {
            Vec3 nrm = normal.normalized();
            Vec3 rel = p - center;
            double h = rel.dot(nrm);
            Vec3 in_plane = rel - h * nrm;
            double rho = in_plane.norm();
            double rho_c = std::min(rho, radius);
            Vec3 foot = rho > kCuspEps ? Vec3(center + rho_c / rho * in_plane) : center;
            if (nearest) *nearest = foot;
            return std::sqrt(std::max(rho - radius, 0.0) * std::max(rho - radius, 0.0) + h * h);
        }
        case Type::PlaneSegment: {
            Vec3 nrm = normal.normalized();
            Vec3 tu = (tangent - tangent.dot(nrm) * nrm).normalized();
            Vec3 tv = nrm.cross(tu);
            Vec3 rel = p - center;
            double u = std::clamp(rel.dot(tu), -half_extents.x(), half_extents.x());
            double v = std::clamp(rel.dot(tv), -half_extents.y(), half_extents.y());
            Vec3 foot = center + u * tu + v * tv;
            if (nearest) *nearest = foot;
            return (p - foot).norm();
        }
    }
    return 0.0;
}

FieldSample AnalyticScene::eval(const Vec3& p) const {
    if (primitives.empty()) throw std::runtime_error("scene: empty primitive list");
    FieldSample best;
    best.dist = std::numeric_limits<double>::infinity();
    Vec3 best_nearest = Vec3::Zero();
    bool best_degenerate = false;
    for (const Primitive& prim : primitives) {
        Vec3 nearest;
        bool degenerate = false;
        double d = prim.distance(p, &nearest, &degenerate);
        if (d < best.dist) {  // ties keep the lowest index: one-sided medial policy
            best.dist = d;
            best_nearest = nearest;
            best_degenerate = degenerate;
        }
    }
    if (best_degenerate) {
        best.gradient = Vec3::Zero();
        best.cusp = true;
        return best;
    }
    Vec3 rel = p - best_nearest;
    if (best.dist > kCuspEps) {
        best.gradient = rel / rel.norm();
    } else {
        best.gradient = Vec3::Zero();  // on-surface cusp
        best.cusp = true;
    }
    return best;
}

void AnalyticScene::eval_dist(const std::vector<Vec3>& pts, std::vector<double>& out) const {
    out.resize(pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (const Primitive& prim : primitives) best = std::min(best, prim.distance(pts[i]));
        out[i] = best;
    }
}

std::vector<RayHit> AnalyticScene::intersections(const Ray& ray, double t_min, double t_max,
                                                 double grazing_eps) const {
    std::vector<RayHit> hits;
    auto push_hit = [&](double t, int prim, const Vec3& nrm) {
        if (t < t_min || t > t_max) return;
        double ct = std::abs(ray.dir.dot(nrm));
        if (ct < grazing_eps) return;
        RayHit h;
        h.t = t;
        h.primitive = prim;
        h.point = ray.at(t);
        h.normal = nrm;
        h.cos_theta = ct;
        hits.push_back(h);
    };
    for (size_t i = 0; i < primitives.size(); ++i) {
        const Primitive& prim = primitives[i];
        switch (prim.type) {
            case Primitive::Type::Sphere: {
                Vec3 oc = ray.origin - prim.center;
                double b = oc.dot(ray.dir);
                double c = oc.squaredNorm() - prim.radius * prim.radius;
                double disc = b * b - c;
                if (disc <= 0.0) break;
                double s = std::sqrt(disc);
                for (double t : {-b - s, -b + s}) {
                    Vec3 nrm = (ray.at(t) - prim.center).normalized();
                    push_hit(t, int(i), nrm);
                }
                break;
            }
            case Primitive::Type::Disk:
            case Primitive::Type::PlaneSegment: {
                Vec3 nrm = prim.normal.normalized();
                double denom = ray.dir.dot(nrm);
                if (std::abs(denom) < 1e-15) break;
                double t = (prim.center - ray.origin).dot(nrm) / denom;
                Vec3 q = ray.at(t);
                if (prim.type == Primitive::Type::Disk) {
                    if ((q - prim.center).norm() > prim.radius) break;
                } else {
                    Vec3 tu = (prim.tangent - prim.tangent.dot(nrm) * nrm).normalized();
                    Vec3 tv = nrm.cross(tu);
                    Vec3 rel = q - prim.center;
                    if (std::abs(rel.dot(tu)) > prim.half_extents.x() ||
                        std::abs(rel.dot(tv)) > prim.half_extents.y())
                        break;
                }
                push_hit(t, int(i), nrm);
                break;
            }
        }
    }
    std::sort(hits.begin(), hits.end(), [](const RayHit& a, const RayHit& b) { return a.t < b.t; });
    std::vector<RayHit> merged;
    for (const RayHit& h : hits) {
        if (!merged.empty() && std::abs(h.t - merged.back().t) < 1e-12) continue;
        merged.push_back(h);
    }
    return merged;
}

namespace {

Primitive primitive_from_json(const nlohmann::json& j, size_t index) {
    static const std::vector<std::string> known = {"type",          "center", "normal",
                                                   "tangent",       "radius", "half_extents",
                                                   "albedo"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            throw std::runtime_error("scene: primitive " + std::to_string(index) +
                                     ": unknown key '" + it.key() + "'");
    }
    Primitive p;
    std::string type = j.at("type").get<std::string>();
    if (type == "sphere")
        p.type = Primitive::Type::Sphere;
    else if (type == "disk")
        p.type = Primitive::Type::Disk;
    else if (type == "plane_segment")
        p.type = Primitive::Type::PlaneSegment;
    else
        throw std::runtime_error("scene: primitive " + std::to_string(index) +
                                 ": unknown type '" + type + "'");
    p.center = parse_vec3(j.at("center"), "center");
    if (j.contains("normal")) p.normal = parse_vec3(j["normal"], "normal");
    if (j.contains("tangent")) p.tangent = parse_vec3(j["tangent"], "tangent");
    if (j.contains("radius")) p.radius = j["radius"].get<double>();
    if (j.contains("half_extents")) {
        auto& he = j["half_extents"];
        if (!he.is_array() || he.size() != 2)
            throw std::runtime_error("scene: half_extents must be an array of 2 numbers");
        p.half_extents = Eigen::Vector2d(he[0].get<double>(), he[1].get<double>());
    }
    if (j.contains("albedo")) p.albedo = parse_vec3(j["albedo"], "albedo");
    if (p.type != Primitive::Type::PlaneSegment && !j.contains("radius"))
        throw std::runtime_error("scene: primitive " + std::to_string(index) +
                                 " requires 'radius'");
    if (p.radius <= 0.0) throw std::runtime_error("scene: radius must be positive");
    if (p.normal.norm() < 1e-12) throw std::runtime_error("scene: degenerate normal");
    return p;
}

}  // namespace

AnalyticScene AnalyticScene::from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("scene: invalid JSON: ") + e.what());
    }
    for (auto it = j.begin(); it != j.end(); ++it)
        if (it.key() != "primitives")
            throw std::runtime_error("scene: unknown key '" + it.key() + "'");
    if (!j.contains("primitives") || !j["primitives"].is_array() || j["primitives"].empty())
        throw std::runtime_error("scene: requires a non-empty 'primitives' array");
    AnalyticScene scene;
    size_t idx = 0;
    for (const auto& pj : j["primitives"]) scene.primitives.push_back(primitive_from_json(pj, idx++));
    return scene;
}

AnalyticScene AnalyticScene::load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("scene: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string AnalyticScene::to_json_text() const {
    nlohmann::ordered_json j;
    j["primitives"] = nlohmann::ordered_json::array();
    for (const Primitive& p : primitives) {
        nlohmann::ordered_json pj;
        switch (p.type) {
            case Primitive::Type::Sphere: pj["type"] = "sphere"; break;
            case Primitive::Type::Disk: pj["type"] = "disk"; break;
            case Primitive::Type::PlaneSegment: pj["type"] = "plane_segment"; break;
        }
        pj["center"] = {p.center.x(), p.center.y(), p.center.z()};
        if (p.type != Primitive::Type::Sphere) {
            pj["normal"] = {p.normal.x(), p.normal.y(), p.normal.z()};
        }
        if (p.type == Primitive::Type::PlaneSegment) {
            pj["tangent"] = {p.tangent.x(), p.tangent.y(), p.tangent.z()};
            pj["half_extents"] = {p.half_extents.x(), p.half_extents.y()};
        } else {
            pj["radius"] = p.radius;
        }
        pj["albedo"] = {p.albedo.x(), p.albedo.y(), p.albedo.z()};
        j["primitives"].push_back(pj);
    }
    return j.dump(2);
}

AnalyticScene AnalyticScene::builtin(const std::string& name) {
    AnalyticScene scene;
    auto disk = [](double z, double radius, Vec3 albedo) {
        Primitive p;
        p.type = Primitive::Type::Disk;
        p.center = Vec3(0, 0, z);
        p.normal = Vec3::UnitZ();
        p.radius = radius;
        p.albedo = albedo;
        return p;
    };
    auto plane = [](double z, double he, Vec3 albedo) {
        Primitive p;
        p.type = Primitive::Type::PlaneSegment;
        p.center = Vec3(0, 0, z);
        p.normal = Vec3::UnitZ();
        p.tangent = Vec3::UnitX();
        p.half_extents = Eigen::Vector2d(he, he);
        p.albedo = albedo;
        return p;
    };
    if (name == "disk") {
        scene.primitives.push_back(disk(0.0, 0.5, Vec3(0.85, 0.45, 0.20)));
    } else if (name == "sphere") {
        Primitive p;
        p.type = Primitive::Type::Sphere;
        p.center = Vec3::Zero();
        p.radius = 0.5;
        p.albedo = Vec3(0.30, 0.55, 0.85);
        scene.primitives.push_back(p);
    } else if (name == "two-disks") {
        scene.primitives.push_back(disk(0.0, 0.4, Vec3(0.85, 0.45, 0.20)));
        scene.primitives.push_back(disk(0.5, 0.4, Vec3(0.25, 0.60, 0.35)));
    } else if (name == "two-planes") {
        scene.primitives.push_back(plane(0.0, 0.4, Vec3(0.85, 0.45, 0.20)));
        scene.primitives.push_back(plane(0.5, 0.4, Vec3(0.25, 0.60, 0.35)));
    } else {
        throw std::runtime_error("unknown builtin scene '" + name + "'");
    }
    return scene;
}

ProjectionResult project_to_surface(const DistanceField& field, const Vec3& start, int max_iters,
                                    double tol) {
    ProjectionResult res;
    res.point = start;
    FieldSample s = field.eval(start);
    res.residual = s.dist;
    for (int i = 0; i < max_iters; ++i) {
        if (s.dist <= tol || s.cusp) break;
        res.point -= s.dist * s.gradient;
        s = field.eval(res.point);
        res.residual = s.dist;
        res.iterations = i + 1;
    }
    res.converged = res.residual <= tol;
    return res;
}

std::optional<std::pair<double, double>> sphere_clip(const Ray& ray, double radius,
                                                     const Vec3& center, double t_min) {
    Vec3 oc = ray.origin - center;
    double b = oc.dot(ray.dir);
    double c = oc.squaredNorm() - radius * radius;
    double disc = b * b - c;
    if (disc <= 0.0) return std::nullopt;
    double s = std::sqrt(disc);
    double t0 = std::max(-b - s, t_min);
    double t1 = -b + s;
    if (t1 <= t0) return std::nullopt;
    return std::make_pair(t0, t1);
}

}  // namespace udfvol
