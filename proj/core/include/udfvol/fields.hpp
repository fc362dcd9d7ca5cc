#pragma once

#include <Eigen/Core>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace udfvol {

using Vec3 = Eigen::Vector3d;

struct Ray {
    Vec3 origin;
    Vec3 dir;  // unit length

    Vec3 at(double t) const { return origin + t * dir; }
};

// Result of one unsigned-distance query. `gradient` points away from the
// nearest surface point and has unit norm except on the cusp set (surface
// itself, medial axis degeneracies), where it is zero and `cusp` is set.
struct FieldSample {
    double dist = 0.0;
    Vec3 gradient = Vec3::Zero();
    bool cusp = false;
};

class DistanceField {
public:
    virtual ~DistanceField() = default;
    virtual FieldSample eval(const Vec3& p) const = 0;

    // Batched distance-only queries; the default loops over eval().
    virtual void eval_dist(const std::vector<Vec3>& pts, std::vector<double>& out) const;

    // Batched full queries (distance and gradient); the default loops.
    virtual void eval_batch(const std::vector<Vec3>& pts, std::vector<FieldSample>& out) const;
};

struct Primitive {
    enum class Type { Sphere, Disk, PlaneSegment };

    Type type = Type::Sphere;
    Vec3 center = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();    // disk / plane segment
    Vec3 tangent = Vec3::UnitX();   // plane segment in-plane axis
    double radius = 1.0;            // sphere / disk
    Eigen::Vector2d half_extents = Eigen::Vector2d(0.5, 0.5);  // plane segment
    Vec3 albedo = Vec3(0.8, 0.8, 0.8);

    // Distance and nearest surface point. `degenerate` is set when the
    // nearest point is not unique (the center of a sphere).
    double distance(const Vec3& p, Vec3* nearest = nullptr, bool* degenerate = nullptr) const;
};

struct RayHit {
    double t = 0.0;
    int primitive = -1;
    Vec3 point = Vec3::Zero();
    Vec3 normal = Vec3::Zero();   // geometric (two-sided) surface normal
    double cos_theta = 0.0;       // |dir . normal|
};

// Union of primitives. Exact unsigned distance with closed-form nearest
// points; equidistant (medial) queries resolve to the lowest primitive index.
class AnalyticScene : public DistanceField {
public:
    std::vector<Primitive> primitives;

    FieldSample eval(const Vec3& p) const override;
    void eval_dist(const std::vector<Vec3>& pts, std::vector<double>& out) const override;

    // All ray-surface intersections sorted by t, duplicates merged and
    // grazing hits (|cos theta| < grazing_eps) excluded.
    std::vector<RayHit> intersections(const Ray& ray, double t_min = 0.0,
                                      double t_max = std::numeric_limits<double>::infinity(),
                                      double grazing_eps = 1e-4) const;

    static AnalyticScene load_json(const std::string& path);
    static AnalyticScene from_json_text(const std::string& text);
    std::string to_json_text() const;

    // Built-in verification scenes: "disk", "sphere", "two-disks", "two-planes".
    static AnalyticScene builtin(const std::string& name);
};

struct ProjectionResult {
    Vec3 point = Vec3::Zero();
    double residual = 0.0;  // field value at `point`
    int iterations = 0;
    bool converged = false;
};

// Gradient-descent projection x <- x - d * grad(d) toward the zero level set.
ProjectionResult project_to_surface(const DistanceField& field, const Vec3& start,
                                    int max_iters = 16, double tol = 1e-7);

// Clip a ray against the sphere |x - c| = radius; returns [t_near, t_far]
// with t_near >= t_min, or nullopt when the ray misses.
std::optional<std::pair<double, double>> sphere_clip(const Ray& ray, double radius = 1.0,
                                                     const Vec3& center = Vec3::Zero(),
                                                     double t_min = 0.0);

}  // namespace udfvol
