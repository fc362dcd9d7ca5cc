#include <doctest.h>

#include <Eigen/Geometry>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "test_util.hpp"
#include "udfvol/evaluation.hpp"

using namespace udfvol;

TEST_CASE("snapped grid: uniform base, nearest-sample anchoring, sorted output") {
    auto plain = snapped_grid(0.0, 1.0, 5, {});
    REQUIRE(plain.size() == 5);
    for (int i = 0; i < 5; ++i) CHECK(plain[size_t(i)] == doctest::Approx(i * 0.25));
    CHECK(plain.front() == 0.0);
    CHECK(plain.back() == 1.0);

    auto snapped = snapped_grid(0.0, 1.0, 5, {0.26, 0.9});
    REQUIRE(snapped.size() == 5);
    CHECK(std::count(snapped.begin(), snapped.end(), 0.26) == 1);
    CHECK(std::count(snapped.begin(), snapped.end(), 0.9) == 1);
    CHECK(std::is_sorted(snapped.begin(), snapped.end()));
    CHECK(std::count(snapped.begin(), snapped.end(), 0.25) == 0);

    auto outside = snapped_grid(0.0, 1.0, 5, {-0.5, 1.5});
    CHECK(outside == plain);

    CHECK_THROWS(snapped_grid(1.0, 1.0, 8, {}));
    CHECK_THROWS(snapped_grid(0.0, 1.0, 1, {}));
}

namespace {

struct ConstantField final : DistanceField {
    double value;
    explicit ConstantField(double v) : value(v) {}
    FieldSample eval(const Vec3&) const override {
        FieldSample s;
        s.dist = value;
        s.gradient = Vec3::UnitZ();
        s.cusp = false;
        return s;
    }
};

}  // namespace

TEST_CASE("zero-set extraction recovers analytic surfaces") {
    ExtractionConfig cfg;
    cfg.grid = 48;
    cfg.eps = 1e-4;

    AnalyticScene sphere = AnalyticScene::builtin("sphere");
    auto pts = extract_zero_set(sphere, cfg);
    CHECK(pts.size() > 1000);
    for (const Vec3& p : pts) CHECK(std::abs(p.norm() - 0.5) <= 2e-4);

    AnalyticScene disk = AnalyticScene::builtin("disk");
    auto dpts = extract_zero_set(disk, cfg);
    CHECK(dpts.size() > 500);
    for (const Vec3& p : dpts) {
        CHECK(std::abs(p.z()) <= 2e-4);
        CHECK(p.head<2>().norm() <= 0.5 + 2e-4);
    }
}

TEST_CASE("zero-set extraction reports fields with nothing to extract") {
    ExtractionConfig cfg;
    cfg.grid = 24;
    ConstantField far_field(0.7);
    CHECK_THROWS_WITH_AS(extract_zero_set(far_field, cfg),
                         doctest::Contains("no grid cells"), std::runtime_error);
}

namespace {

std::vector<Vec3> random_cloud(int n, uint64_t seed, double scale = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<Vec3> pts;
    pts.reserve(size_t(n));
    for (int i = 0; i < n; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
    return pts;
}

}  // namespace

TEST_CASE("chamfer distance: hand values and symmetry") {
    std::vector<Vec3> a{Vec3::Zero()};
    std::vector<Vec3> b{Vec3(1, 0, 0)};
    CHECK(chamfer_sq(a, b) == 2.0);  // 1^2 each way, summed means
    CHECK(chamfer_sq(a, a) == 0.0);

    auto c = random_cloud(400, 11);
    auto d = random_cloud(300, 12);
    CHECK(chamfer_sq(c, d) == chamfer_sq(d, c));
    CHECK_THROWS(chamfer_sq({}, d));
    CHECK_THROWS(chamfer_sq(c, {}));
}

TEST_CASE("chamfer grid index agrees exactly with brute force") {
    // mixed scales, duplicate points and a tight cluster with one far outlier
    for (uint64_t seed : {21u, 22u, 23u}) {
        auto a = random_cloud(1000, seed);
        auto b = random_cloud(900, seed + 100);
        a.push_back(a.front());
        b.push_back(Vec3(40.0, -3.0, 7.0));
        CHECK(chamfer_sq(a, b) == chamfer_sq_brute(a, b));
    }
    auto tight = random_cloud(500, 31, 1e-4);
    auto wide = random_cloud(500, 32, 5.0);
    CHECK(chamfer_sq(tight, wide) == chamfer_sq_brute(tight, wide));
}

TEST_CASE("chamfer distance is invariant under a shared rigid motion") {
    auto a = random_cloud(600, 41);
    auto b = random_cloud(500, 42);
    const double base = chamfer_sq(a, b);

    Eigen::Quaterniond q(0.3, -0.8, 0.5, 0.11);
    q.normalize();
    const Eigen::Matrix3d R = q.toRotationMatrix();
    const Vec3 t(0.7, -2.1, 0.4);
    auto ra = a, rb = b;
    for (Vec3& p : ra) p = R * p + t;
    for (Vec3& p : rb) p = R * p + t;
    CHECK(chamfer_sq(ra, rb) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("surface sampling lands on the surface with area-proportional counts") {
    AnalyticScene two = AnalyticScene::builtin("two-disks");
    auto pts = sample_surface(two, 4000, 7);
    REQUIRE(pts.size() == 4000);
    int low = 0;
    for (const Vec3& p : pts) {
        CHECK(two.eval(p).dist < 1e-9);
        if (p.z() < 0.25) ++low;
    }
    // equal radii, equal areas
    CHECK(low > 1800);
    CHECK(low < 2200);

    auto again = sample_surface(two, 4000, 7);
    CHECK(pts[100] == again[100]);
    auto other = sample_surface(two, 4000, 8);
    CHECK(pts[100] != other[100]);
}

TEST_CASE("unit normalization centers the cloud and scales the farthest point to one") {
    auto pts = random_cloud(300, 51, 3.0);
    for (Vec3& p : pts) p += Vec3(5.0, -1.0, 2.0);
    normalize_points_unit(pts);
    Vec3 centroid = Vec3::Zero();
    double far = 0.0;
    for (const Vec3& p : pts) {
        centroid += p;
        far = std::max(far, p.norm());
    }
    centroid /= double(pts.size());
    CHECK(centroid.norm() < 1e-12);
    CHECK(far == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("point-cloud PLY round trip is exact") {
    TempDir dir;
    auto pts = random_cloud(150, 61);
    pts.push_back(Vec3(1e-17, -3.25, 1.0 / 3.0));
    save_ply(dir.str("c.ply"), pts);
    auto back = load_ply(dir.str("c.ply"));
    REQUIRE(back.size() == pts.size());
    for (size_t i = 0; i < pts.size(); ++i) CHECK(back[i] == pts[i]);
}

TEST_CASE("PLY loader rejects malformed files") {
    TempDir dir;
    CHECK_THROWS(load_ply(dir.str("missing.ply")));

    std::ofstream(dir.str("bad_magic.ply")) << "plyx\nformat ascii 1.0\n";
    CHECK_THROWS(load_ply(dir.str("bad_magic.ply")));

    std::ofstream(dir.str("binfmt.ply"))
        << "ply\nformat binary_little_endian 1.0\nelement vertex 0\nend_header\n";
    CHECK_THROWS(load_ply(dir.str("binfmt.ply")));

    std::ofstream(dir.str("extra_prop.ply"))
        << "ply\nformat ascii 1.0\nelement vertex 1\nproperty double x\nproperty double y\n"
           "property double z\nproperty double w\nend_header\n0 0 0 0\n";
    CHECK_THROWS(load_ply(dir.str("extra_prop.ply")));

    std::ofstream(dir.str("short.ply"))
        << "ply\nformat ascii 1.0\nelement vertex 3\nproperty double x\nproperty double y\n"
           "property double z\nend_header\n0 0 0\n1 1 1\n";
    CHECK_THROWS(load_ply(dir.str("short.ply")));
}

TEST_CASE("two-surface mass accounting: reproducible, conservative, reported") {
    AnalyticScene scene = AnalyticScene::builtin("two-disks");
    Ray ray{Vec3(0, 0, -0.8), Vec3(0, 0, 1)};
    std::vector<double> rs{10.0, 1000.0};

    BiasStudy s1 = run_bias_study(scene, ray, 0.0, 2.0, 4096, rs, DensityKind::Rational,
                                  1e4, 0.01);
    BiasStudy s2 = run_bias_study(scene, ray, 0.0, 2.0, 4096, rs, DensityKind::Rational,
                                  1e4, 0.01);
    CHECK(s1.t_first == doctest::Approx(0.8));
    CHECK(s1.t_second == doctest::Approx(1.3));
    REQUIRE(s1.rows.size() == 2);
    for (size_t i = 0; i < s1.rows.size(); ++i) {
        const BiasRow& r = s1.rows[i];
        CHECK(r.mass_first >= 0.0);
        CHECK(r.mass_between >= 0.0);
        CHECK(r.residual >= 0.0);
        CHECK(r.mass_first + r.mass_between + r.residual == doctest::Approx(1.0));
        CHECK(r.mass_near_first <= r.mass_first + 1e-12);
        CHECK(r.mass_first == s2.rows[i].mass_first);  // bitwise reproducible
        CHECK(r.argmax_t == s2.rows[i].argmax_t);
    }
    // sharper density concentrates more mass near the first surface
    CHECK(s1.rows[1].mass_near_first > s1.rows[0].mass_near_first);
    CHECK(s1.naive_mass_first + s1.naive_mass_between + s1.naive_residual ==
          doctest::Approx(1.0).epsilon(1e-9));
    CHECK(s1.naive_mass_early >= 0.0);
    CHECK(s1.naive_mass_early <= s1.naive_mass_first);

    std::string text = bias_study_text(s1);
    CHECK(text.find("early=") != std::string::npos);
    auto parsed = nlohmann::json::parse(bias_study_json(s1));
    CHECK(parsed["rows"].size() == 2);
    CHECK(parsed["naive"]["mass_early"].get<double>() == s1.naive_mass_early);

    // a single-crossing ray has no second surface to account against
    AnalyticScene disk = AnalyticScene::builtin("disk");
    CHECK_THROWS(run_bias_study(disk, ray, 0.0, 2.0, 512, rs, DensityKind::Rational, 1e4,
                                0.01));
}
