#include <doctest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <random>

#include <json.hpp>

#include "udfvol/fields.hpp"

using namespace udfvol;

namespace {

Vec3 random_point(std::mt19937_64& rng, double extent) {
    std::uniform_real_distribution<double> u(-extent, extent);
    return Vec3(u(rng), u(rng), u(rng));
}

// Dense surface sampling gives an upper bound on the true distance that
// tightens with the sample count.
std::vector<Vec3> dense_disk_points(const Primitive& p, int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vec3 nrm = p.normal.normalized();
    Vec3 tu = Vec3::UnitX();
    if (std::abs(nrm.dot(tu)) > 0.9) tu = Vec3::UnitY();
    tu = (tu - tu.dot(nrm) * nrm).normalized();
    Vec3 tv = nrm.cross(tu);
    std::vector<Vec3> pts;
    pts.reserve(size_t(n));
    for (int i = 0; i < n; ++i) {
        double rho = p.radius * std::sqrt(u(rng));
        double th = 2.0 * M_PI * u(rng);
        pts.push_back(p.center + rho * std::cos(th) * tu + rho * std::sin(th) * tv);
    }
    return pts;
}

std::vector<Vec3> dense_plane_points(const Primitive& p, int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vec3 nrm = p.normal.normalized();
    Vec3 tu = (p.tangent - p.tangent.dot(nrm) * nrm).normalized();
    Vec3 tv = nrm.cross(tu);
    std::vector<Vec3> pts;
    pts.reserve(size_t(n));
    for (int i = 0; i < n; ++i)
        pts.push_back(p.center + p.half_extents.x() * u(rng) * tu +
                      p.half_extents.y() * u(rng) * tv);
    return pts;
}

double brute_min_dist(const Vec3& q, const std::vector<Vec3>& surf) {
    double best = std::numeric_limits<double>::infinity();
    for (const Vec3& s : surf) best = std::min(best, (q - s).norm());
    return best;
}

}  // namespace

TEST_CASE("sphere distance, nearest point and gradient") {
    Primitive p;
    p.type = Primitive::Type::Sphere;
    p.center = Vec3(0.1, -0.2, 0.3);
    p.radius = 0.7;

    std::mt19937_64 rng(11);
    for (int i = 0; i < 200; ++i) {
        Vec3 q = random_point(rng, 1.2);
        Vec3 nearest;
        double d = p.distance(q, &nearest);
        double expected = std::abs((q - p.center).norm() - p.radius);
        CHECK(d == doctest::Approx(expected).epsilon(1e-12));
        CHECK((nearest - p.center).norm() == doctest::Approx(p.radius).epsilon(1e-12));
        CHECK((q - nearest).norm() == doctest::Approx(d).epsilon(1e-9));
    }
}

TEST_CASE("disk distance matches a dense surface-sampling bound") {
    Primitive p;
    p.type = Primitive::Type::Disk;
    p.center = Vec3(0.05, 0.1, -0.2);
    p.normal = Vec3(0.3, -0.2, 0.9);
    p.radius = 0.5;

    std::mt19937_64 rng(12);
    auto surf = dense_disk_points(p, 120000, rng);
    for (int i = 0; i < 120; ++i) {
        Vec3 q = random_point(rng, 1.0);
        double d = p.distance(q);
        double bound = brute_min_dist(q, surf);
        CHECK(d <= bound + 1e-12);       // sampled surface can only overestimate
        CHECK(bound - d <= 4e-3);        // and not by much at this density
    }
}

TEST_CASE("disk distance hand values") {
    Primitive p;
    p.type = Primitive::Type::Disk;
    p.radius = 0.5;  // centered, normal +z

    CHECK(p.distance(Vec3(0, 0, 0.3)) == doctest::Approx(0.3));
    CHECK(p.distance(Vec3(0.2, 0, -0.4)) == doctest::Approx(0.4));
    CHECK(p.distance(Vec3(0.7, 0, 0)) == doctest::Approx(0.2));
    // past the rim in both directions: hypot against the rim point (0.5, 0, 0)
    CHECK(p.distance(Vec3(0.8, 0, 0.4)) == doctest::Approx(0.5));
    Vec3 nearest;
    p.distance(Vec3(0.8, 0, 0.4), &nearest);
    CHECK(nearest.x() == doctest::Approx(0.5));
    CHECK(nearest.z() == doctest::Approx(0.0));
}

TEST_CASE("plane segment distance matches a dense surface-sampling bound") {
    Primitive p;
    p.type = Primitive::Type::PlaneSegment;
    p.center = Vec3(0.0, 0.2, 0.1);
    p.normal = Vec3(0.2, 0.9, -0.1);
    p.tangent = Vec3(1.0, 0.3, 0.0);
    p.half_extents = Eigen::Vector2d(0.4, 0.3);

    std::mt19937_64 rng(13);
    auto surf = dense_plane_points(p, 120000, rng);
    for (int i = 0; i < 120; ++i) {
        Vec3 q = random_point(rng, 1.0);
        double d = p.distance(q);
        double bound = brute_min_dist(q, surf);
        CHECK(d <= bound + 1e-12);
        CHECK(bound - d <= 4e-3);
    }
}

TEST_CASE("plane segment corner distance") {
    Primitive p;
    p.type = Primitive::Type::PlaneSegment;
    p.half_extents = Eigen::Vector2d(0.4, 0.4);  // centered, normal +z, tangent +x

    CHECK(p.distance(Vec3(0.7, 0.7, 0.1)) ==
          doctest::Approx(std::sqrt(0.09 + 0.09 + 0.01)));
    CHECK(p.distance(Vec3(0.1, -0.2, -0.5)) == doctest::Approx(0.5));
}

TEST_CASE("field gradient is unit away from the surface and flagged on it") {
    AnalyticScene scene = AnalyticScene::builtin("disk");
    std::mt19937_64 rng(14);
    for (int i = 0; i < 100; ++i) {
        Vec3 q = random_point(rng, 0.9);
        FieldSample s = scene.eval(q);
        if (s.dist > 1e-9) {
            CHECK(!s.cusp);
            CHECK(s.gradient.norm() == doctest::Approx(1.0).epsilon(1e-9));
        }
    }
    FieldSample on_surface = scene.eval(Vec3(0.1, 0.2, 0.0));
    CHECK(on_surface.dist == doctest::Approx(0.0));
    CHECK(on_surface.cusp);
    CHECK(on_surface.gradient.norm() == doctest::Approx(0.0));

    Primitive sp;
    sp.type = Primitive::Type::Sphere;
    sp.radius = 0.5;
    AnalyticScene sps;
    sps.primitives.push_back(sp);
    FieldSample center = sps.eval(Vec3::Zero());  // equidistant to the whole shell
    CHECK(center.cusp);
}

TEST_CASE("union takes the minimum and ties resolve to the lowest index") {
    AnalyticScene scene = AnalyticScene::builtin("two-disks");  // z = 0 and z = 0.5
    FieldSample s = scene.eval(Vec3(0.0, 0.1, 0.25));
    CHECK(s.dist == doctest::Approx(0.25));
    CHECK(s.gradient.z() == doctest::Approx(1.0));  // away from the z=0 disk

    FieldSample lower = scene.eval(Vec3(0.0, 0.0, 0.1));
    CHECK(lower.dist == doctest::Approx(0.1));
    FieldSample upper = scene.eval(Vec3(0.0, 0.0, 0.45));
    CHECK(upper.dist == doctest::Approx(0.05));
    CHECK(upper.gradient.z() == doctest::Approx(-1.0));
}

TEST_CASE("batched evaluation agrees with scalar evaluation") {
    AnalyticScene scene = AnalyticScene::builtin("two-disks");
    std::mt19937_64 rng(15);
    std::vector<Vec3> pts;
    for (int i = 0; i < 64; ++i) pts.push_back(random_point(rng, 1.0));

    std::vector<double> d;
    scene.eval_dist(pts, d);
    std::vector<FieldSample> s;
    scene.eval_batch(pts, s);
    REQUIRE(d.size() == pts.size());
    REQUIRE(s.size() == pts.size());
    for (size_t i = 0; i < pts.size(); ++i) {
        FieldSample ref = scene.eval(pts[i]);
        CHECK(d[i] == ref.dist);
        CHECK(s[i].dist == ref.dist);
        CHECK((s[i].gradient - ref.gradient).norm() == doctest::Approx(0.0));
    }
}

TEST_CASE("ray intersections are sorted, deduplicated and skip grazing hits") {
    AnalyticScene scene = AnalyticScene::builtin("two-disks");
    Ray axis{Vec3(0, 0, -0.8), Vec3(0, 0, 1)};
    auto hits = scene.intersections(axis, 0.0, 2.0);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].t == doctest::Approx(0.8));
    CHECK(hits[1].t == doctest::Approx(1.3));
    CHECK(hits[0].primitive == 0);
    CHECK(hits[1].primitive == 1);
    CHECK(hits[0].cos_theta == doctest::Approx(1.0));

    Ray miss{Vec3(0.45, 0, -0.8), Vec3(0, 0, 1)};
    CHECK(scene.intersections(miss, 0.0, 2.0).empty());

    // travelling inside the disk plane: |dir . normal| = 0, grazing
    Ray grazing{Vec3(-1.0, 0, 0), Vec3(1, 0, 0)};
    CHECK(scene.intersections(grazing, 0.0, 2.0).empty());

    // a duplicated primitive yields one merged crossing
    AnalyticScene dup = scene;
    dup.primitives.push_back(dup.primitives[0]);
    auto merged = dup.intersections(axis, 0.0, 2.0);
    CHECK(merged.size() == 2);

    // range clipping
    auto clipped = scene.intersections(axis, 0.0, 1.0);
    REQUIRE(clipped.size() == 1);
    CHECK(clipped[0].t == doctest::Approx(0.8));
}

TEST_CASE("sphere clipping") {
    Ray inside{Vec3(0, 0, 0), Vec3(0, 0, 1)};
    auto c1 = sphere_clip(inside, 1.0);
    REQUIRE(c1.has_value());
    CHECK(c1->first == doctest::Approx(0.0));
    CHECK(c1->second == doctest::Approx(1.0));

    Ray outside{Vec3(0, 0, -2.0), Vec3(0, 0, 1)};
    auto c2 = sphere_clip(outside, 1.0);
    REQUIRE(c2.has_value());
    CHECK(c2->first == doctest::Approx(1.0));
    CHECK(c2->second == doctest::Approx(3.0));

    Ray miss{Vec3(0, 2.0, -2.0), Vec3(0, 0, 1)};
    CHECK(!sphere_clip(miss, 1.0).has_value());

    Ray behind{Vec3(0, 0, 2.0), Vec3(0, 0, 1)};  // sphere entirely behind the origin
    CHECK(!sphere_clip(behind, 1.0).has_value());
}

TEST_CASE("projection reaches the zero level set and never climbs") {
    AnalyticScene scene = AnalyticScene::builtin("sphere");
    std::mt19937_64 rng(16);
    for (int i = 0; i < 50; ++i) {
        Vec3 q = random_point(rng, 0.9);
        double before = scene.eval(q).dist;
        ProjectionResult res = project_to_surface(scene, q);
        CHECK(res.residual <= before + 1e-15);
        if (!scene.eval(q).cusp) {
            CHECK(res.converged);
            CHECK((res.point).norm() == doctest::Approx(0.5).epsilon(1e-6));
        }
    }
}

TEST_CASE("scene JSON round trip and unknown-key rejection") {
    AnalyticScene scene = AnalyticScene::builtin("two-disks");
    std::string text = scene.to_json_text();
    AnalyticScene back = AnalyticScene::from_json_text(text);
    CHECK(back.to_json_text() == text);
    REQUIRE(back.primitives.size() == scene.primitives.size());
    CHECK(back.primitives[1].center.z() == doctest::Approx(0.5));

    nlohmann::json j = nlohmann::json::parse(text);
    j["primitives"][0]["bogus"] = 1;
    CHECK_THROWS(AnalyticScene::from_json_text(j.dump()));
}

TEST_CASE("builtin scene names") {
    CHECK(AnalyticScene::builtin("disk").primitives.size() == 1);
    CHECK(AnalyticScene::builtin("sphere").primitives.size() == 1);
    CHECK(AnalyticScene::builtin("two-disks").primitives.size() == 2);
    CHECK(AnalyticScene::builtin("two-planes").primitives.size() == 2);
    CHECK_THROWS(AnalyticScene::builtin("torus"));
}
