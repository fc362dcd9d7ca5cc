#include <doctest.h>

#include <cmath>
#include <vector>

#include "udfvol/evaluation.hpp"
#include "udfvol/fields.hpp"
#include "udfvol/rendering.hpp"

using namespace udfvol;

namespace {

const DensityKind kKinds[] = {DensityKind::Rational, DensityKind::Exponential,
                              DensityKind::Arctan};

std::vector<double> log_grid(double lo, double hi, int n) {
    std::vector<double> g;
    double l0 = std::log10(lo), l1 = std::log10(hi);
    for (int i = 0; i < n; ++i) g.push_back(std::pow(10.0, l0 + (l1 - l0) * i / (n - 1)));
    return g;
}

}  // namespace

TEST_CASE("density families vanish at zero, saturate at one, rise concavely") {
    for (DensityKind kind : kKinds) {
        for (double r : log_grid(1e-1, 1e4, 6)) {
            DensityFamily fam{kind, r};
            CHECK(fam.sigma(0.0) == 0.0);
            // far point: saturated but never reaching one (rd = 30 keeps the
            // exponential family representable below one in doubles)
            CHECK(fam.sigma(30.0 / r) > 0.95);
            CHECK(fam.sigma(30.0 / r) < 1.0);
            CHECK(fam.sigma(1e6 / r) <= 1.0);

            double prev = 0.0;
            double prev_slope = std::numeric_limits<double>::infinity();
            for (double d : log_grid(1e-6 / r, 30.0 / r, 40)) {
                double s = fam.sigma(d);
                CHECK(s > prev);  // strictly increasing
                prev = s;
                double slope = fam.dsigma_dd(d);
                CHECK(slope > 0.0);
                CHECK(slope < prev_slope);  // derivative falls: concave
                prev_slope = slope;
                CHECK(fam.d2sigma_dd2(d) < 0.0);
            }
        }
    }
}

TEST_CASE("density derivatives match finite differences") {
    for (DensityKind kind : kKinds) {
        DensityFamily fam{kind, 37.0};
        for (double d : {1e-3, 0.05, 0.4, 2.0}) {
            const double hd = 1e-6 * std::max(d, 0.01);
            double fd_d = (fam.sigma(d + hd) - fam.sigma(d - hd)) / (2 * hd);
            CHECK(fam.dsigma_dd(d) == doctest::Approx(fd_d).epsilon(1e-6));

            double fd_dd = (fam.dsigma_dd(d + hd) - fam.dsigma_dd(d - hd)) / (2 * hd);
            CHECK(fam.d2sigma_dd2(d) == doctest::Approx(fd_dd).epsilon(1e-5));

            DensityFamily hi{kind, 37.0 * (1 + 1e-7)}, lo{kind, 37.0 * (1 - 1e-7)};
            double fd_r = (hi.sigma(d) - lo.sigma(d)) / (37.0 * 2e-7);
            CHECK(fam.dsigma_dr(d) == doctest::Approx(fd_r).epsilon(1e-5));
        }
    }
}

TEST_CASE("compositing telescopes exactly on monotone segments") {
    // psi falls linearly 0.8 -> 0.05, then a rising version of the same ramp
    for (DensityKind kind : kKinds) {
        for (double r : {2.0, 300.0}) {
            DensityFamily fam{kind, r};
            for (int bins : {8, 64, 512}) {
                std::vector<double> t, fall, rise;
                for (int i = 0; i <= bins; ++i) {
                    double x = double(i) / bins;
                    t.push_back(x);
                    fall.push_back(0.8 - 0.75 * x);
                    rise.push_back(0.05 + 0.75 * x);
                }
                WeightProfile pf = alpha_compose(t, fall, fam);
                CHECK(telescoping_error(pf, 0, bins) < 1e-12);

                // rising run: the product telescopes to the reciprocal ratio
                WeightProfile pr = alpha_compose(t, rise, fam);
                double prod = 1.0;
                for (double a : pr.alpha) prod *= 1.0 - a;
                double expect = fam.sigma(rise.front()) / fam.sigma(rise.back());
                CHECK(prod == doctest::Approx(expect).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("an exact zero-crossing sample absorbs everything that remains") {
    DensityFamily fam{DensityKind::Rational, 100.0};
    std::vector<double> t{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<double> psi{0.5, 0.25, 0.0, 0.25, 0.5};
    WeightProfile p = alpha_compose(t, psi, fam);
    CHECK(p.alpha[1] == doctest::Approx(1.0));
    CHECK(p.acc == doctest::Approx(1.0));
    CHECK(p.w[2] == 0.0);
    CHECK(p.w[3] == 0.0);
    CHECK(p.mass_through(0.5) == doctest::Approx(1.0));
    CHECK(p.argmax_sample() == 2);
}

TEST_CASE("weight profile bookkeeping stays a probability measure") {
    DensityFamily fam{DensityKind::Exponential, 25.0};
    std::vector<double> t, psi;
    for (int i = 0; i <= 100; ++i) {
        double x = i / 100.0;
        t.push_back(x);
        psi.push_back(0.3 + 0.25 * std::sin(7 * x) - 0.4 * x);  // wiggly, dips near zero
    }
    for (double& v : psi) v = std::abs(v);
    WeightProfile p = alpha_compose(t, psi, fam);
    double sum = 0.0;
    for (size_t i = 0; i < p.w.size(); ++i) {
        CHECK(p.w[i] >= 0.0);
        CHECK(p.alpha[i] >= 0.0);
        CHECK(p.alpha[i] <= 1.0);
        if (i) CHECK(p.trans[i] <= p.trans[i - 1] + 1e-15);
        sum += p.w[i];
    }
    CHECK(p.acc == doctest::Approx(sum).epsilon(1e-12));
    CHECK(p.acc <= 1.0 + 1e-12);
    CHECK(p.mass_through(2.0) == doctest::Approx(p.acc));
    CHECK(p.mass_through(-1.0) == 0.0);
}

TEST_CASE("constant and all-zero fields produce no absorption") {
    DensityFamily fam{DensityKind::Rational, 50.0};
    std::vector<double> t{0, 0.5, 1.0};
    WeightProfile flat = alpha_compose(t, {0.4, 0.4, 0.4}, fam);
    CHECK(flat.acc == 0.0);
    WeightProfile zero = alpha_compose(t, {0.0, 0.0, 0.0}, fam);  // 0/0 bins stay empty
    CHECK(zero.acc == doctest::Approx(0.0));
}

TEST_CASE("sign-aware comparator reproduces the leaked-mass cascade") {
    AnalyticScene scene = AnalyticScene::builtin("two-planes");
    Ray ray{Vec3(0, 0, -0.8), Vec3(0, 0, 1)};
    const int n = 1 << 14;
    const double s = 1e4;
    auto hits = scene.intersections(ray, 0.0, 2.0);
    REQUIRE(hits.size() == 2);
    std::vector<double> grid = snapped_grid(0.0, 2.0, n, {hits[0].t, hits[1].t});
    std::vector<Vec3> pts(grid.size());
    for (size_t i = 0; i < grid.size(); ++i) pts[i] = ray.at(grid[i]);
    std::vector<double> psi;
    scene.eval_dist(pts, psi);

    WeightProfile p = naive_neus_compose(grid, psi, s);
    // with the crossings on the grid the telescoped masses are exact
    CHECK(p.mass_through(hits[0].t) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(p.mass_through(hits[1].t) - p.mass_through(hits[0].t) ==
          doctest::Approx(0.25).epsilon(1e-9));
    CHECK(1.0 - p.mass_through(hits[1].t) == doctest::Approx(0.25).epsilon(1e-9));
    CHECK(p.mass_through(hits[0].t - 4.0 / s) < 0.02);

    // purely rising distance: every bin clamps to zero absorption
    std::vector<double> t{0, 0.5, 1.0}, rising{0.1, 0.3, 0.6};
    CHECK(naive_neus_compose(t, rising, s).acc == 0.0);
}

TEST_CASE("comparator discretization error shrinks linearly with the step") {
    AnalyticScene scene = AnalyticScene::builtin("two-planes");
    Ray ray{Vec3(0, 0, -0.8), Vec3(0, 0, 1)};
    auto hits = scene.intersections(ray, 0.0, 2.0);
    for (double s : {100.0, 1000.0}) {
        for (int n : {1 << 12, 1 << 13, 1 << 14}) {
            // plain uniform grid: no snapping, so discretization error shows
            std::vector<double> grid, psi;
            std::vector<Vec3> pts;
            for (int i = 0; i < n; ++i) grid.push_back(2.0 * i / (n - 1));
            for (double tv : grid) pts.push_back(ray.at(tv));
            scene.eval_dist(pts, psi);
            WeightProfile p = naive_neus_compose(grid, psi, s);
            double err = std::abs(p.mass_through(hits[0].t) - 0.5);
            // half the worst-case sample offset times the sigmoid slope
            CHECK(err <= 0.25 * s * 2.0 / (n - 1));
        }
    }
}

TEST_CASE("continuous absorption integral matches its closed form") {
    AnalyticScene scene = AnalyticScene::builtin("disk");
    Ray ray{Vec3(0, 0, -0.8), Vec3(0, 0, 1)};  // psi(t) = 0.8 - t on [0, 0.8)
    for (DensityKind kind : kKinds) {
        DensityFamily fam{kind, 40.0};
        double got = integrate_tau_r(scene, ray, 0.0, 0.7, fam);
        double expect = std::log(fam.sigma(0.8) / fam.sigma(0.1));
        CHECK(got == doctest::Approx(expect).epsilon(1e-8));

        // pointwise: tau = |d sigma/dt| / sigma with unit |cos theta|
        double d = 0.35;
        double tau = tau_r_continuous(scene, ray, 0.8 - d, fam);
        CHECK(tau == doctest::Approx(fam.dsigma_dd(d) / fam.sigma(d)).epsilon(1e-9));
    }
}

TEST_CASE("color compositing blends bin colors and the background") {
    DensityFamily fam{DensityKind::Rational, 1000.0};
    std::vector<double> t{0.0, 0.5, 1.0};
    std::vector<double> psi{0.2, 0.1, 0.0};  // falls to an exact crossing
    WeightProfile p = alpha_compose(t, psi, fam);
    REQUIRE(p.bins() == 2);

    Eigen::Matrix3Xd colors(3, 3);
    colors.col(0) = Vec3(1.0, 0.0, 0.0);
    colors.col(1) = Vec3(0.0, 1.0, 0.0);
    colors.col(2) = Vec3(0.0, 0.0, 1.0);

    RenderOptions opts;
    opts.background = Vec3(0.0, 0.0, 1.0);
    Vec3 c = composite_color(p, colors, opts);
    // left-endpoint colors: w0 * red + w1 * green, plus leftover background
    CHECK(c.x() == doctest::Approx(p.w[0]));
    CHECK(c.y() == doctest::Approx(p.w[1]));
    CHECK(c.z() == doctest::Approx(1.0 - p.acc));
}

TEST_CASE("density family names round trip") {
    CHECK(to_string(density_kind_from_string("rational")) == "rational");
    CHECK(to_string(density_kind_from_string("exponential")) == "exponential");
    CHECK(to_string(density_kind_from_string("arctan")) == "arctan");
    CHECK_THROWS(density_kind_from_string("gaussian"));
}
