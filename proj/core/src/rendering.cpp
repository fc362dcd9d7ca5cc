#include "udfvol/rendering.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <stdexcept>

namespace udfvol {

namespace {

const double kPi = 3.14159265358979323846;

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

void check_dist(double d) {
    if (d < 0.0 || !std::isfinite(d))
        throw std::invalid_argument("sigma_r: distance must be finite and non-negative");
}

}  // namespace

double DensityFamily::sigma(double d) const {
    check_dist(d);
    double x = r * d;
    switch (kind) {
        case DensityKind::Rational: return x / (1.0 + x);
        case DensityKind::Exponential: return -std::expm1(-x);
        case DensityKind::Arctan: return 2.0 / kPi * std::atan(x);
    }
    return 0.0;
}

double DensityFamily::dsigma_dd(double d) const {
    check_dist(d);
    double x = r * d;
    switch (kind) {
        case DensityKind::Rational: return r / ((1.0 + x) * (1.0 + x));
        case DensityKind::Exponential: return r * std::exp(-x);
        case DensityKind::Arctan: return 2.0 / kPi * r / (1.0 + x * x);
    }
    return 0.0;
}

double DensityFamily::d2sigma_dd2(double d) const {
    check_dist(d);
    double x = r * d;
    switch (kind) {
        case DensityKind::Rational: return -2.0 * r * r / std::pow(1.0 + x, 3.0);
        case DensityKind::Exponential: return -r * r * std::exp(-x);
        case DensityKind::Arctan: return -4.0 / kPi * r * r * x / ((1.0 + x * x) * (1.0 + x * x));
    }
    return 0.0;
}

double DensityFamily::dsigma_dr(double d) const {
    check_dist(d);
    double x = r * d;
    switch (kind) {
        case DensityKind::Rational: return d / ((1.0 + x) * (1.0 + x));
        case DensityKind::Exponential: return d * std::exp(-x);
        case DensityKind::Arctan: return 2.0 / kPi * d / (1.0 + x * x);
    }
    return 0.0;
}

DensityKind density_kind_from_string(const std::string& name) {
    if (name == "rational") return DensityKind::Rational;
    if (name == "exponential") return DensityKind::Exponential;
    if (name == "arctan") return DensityKind::Arctan;
    throw std::runtime_error("unknown density family '" + name + "'");
}

std::string to_string(DensityKind kind) {
    switch (kind) {
        case DensityKind::Rational: return "rational";
        case DensityKind::Exponential: return "exponential";
        case DensityKind::Arctan: return "arctan";
    }
    return "?";
}

double WeightProfile::mass_through(double t_query) const {
    double m = 0.0;
    for (size_t i = 0; i < w.size(); ++i)
        if (t[i + 1] <= t_query) m += w[i];
    return m;
}

int WeightProfile::argmax_sample() const {
    if (w.empty()) return -1;
    size_t best = 0;
    for (size_t i = 1; i < w.size(); ++i)
        if (w[i] > w[best]) best = i;
    return int(best) + 1;
}

void WeightProfile::dump_tsv(const std::string& path) const {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    std::fprintf(f, "t\tpsi\tsigma\talpha\ttrans\tw\n");
    for (size_t i = 0; i < t.size(); ++i) {
        if (i < w.size())
            std::fprintf(f, "%.17g\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\n", t[i], psi[i], sigma[i],
                         alpha[i], trans[i], w[i]);
        else
            std::fprintf(f, "%.17g\t%.17g\t%.17g\t\t\t\n", t[i], psi[i], sigma[i]);
    }
    std::fclose(f);
}

static void validate_samples(const std::vector<double>& t, const std::vector<double>& psi) {
    if (t.size() != psi.size()) throw std::invalid_argument("compositor: size mismatch");
    if (t.size() < 2) throw std::invalid_argument("compositor: need at least two samples");
    for (size_t i = 1; i < t.size(); ++i)
        if (!(t[i] > t[i - 1])) throw std::invalid_argument("compositor: t must be ascending");
}

WeightProfile alpha_compose(const std::vector<double>& t, const std::vector<double>& psi,
                            const DensityFamily& family) {
    validate_samples(t, psi);
    WeightProfile p;
    p.t = t;
    p.psi = psi;
    p.sigma.resize(t.size());
    for (size_t i = 0; i < t.size(); ++i) p.sigma[i] = family.sigma(psi[i]);
    size_t nb = t.size() - 1;
    p.alpha.resize(nb);
    p.trans.resize(nb);
    p.w.resize(nb);
    double trans = 1.0;
    for (size_t i = 0; i < nb; ++i) {
        double hi = std::max(p.sigma[i], p.sigma[i + 1]);
        double lo = std::min(p.sigma[i], p.sigma[i + 1]);
        double a = hi > 0.0 ? (hi - lo) / hi : 0.0;
        p.alpha[i] = a;
        p.trans[i] = trans;
        p.w[i] = trans * a;
        p.acc += p.w[i];
        trans *= 1.0 - a;
    }
    return p;
}

WeightProfile naive_neus_compose(const std::vector<double>& t, const std::vector<double>& psi,
                                 double s) {
    validate_samples(t, psi);
    WeightProfile p;
    p.t = t;
    p.psi = psi;
    p.sigma.resize(t.size());
    for (size_t i = 0; i < t.size(); ++i) p.sigma[i] = sigmoid(s * psi[i]);
    size_t nb = t.size() - 1;
    p.alpha.resize(nb);
    p.trans.resize(nb);
    p.w.resize(nb);
    double trans = 1.0;
    for (size_t i = 0; i < nb; ++i) {
        double a = (p.sigma[i] - p.sigma[i + 1]) / p.sigma[i];
        a = std::clamp(a, 0.0, 1.0);
        p.alpha[i] = a;
        p.trans[i] = trans;
        p.w[i] = trans * a;
        p.acc += p.w[i];
        trans *= 1.0 - a;
    }
    return p;
}

double tau_r_continuous(const DistanceField& field, const Ray& ray, double t,
                        const DensityFamily& family) {
    FieldSample s = field.eval(ray.at(t));
    double sig = family.sigma(s.dist);
    if (sig <= 0.0) return std::numeric_limits<double>::infinity();
    double dpsi_dt = s.gradient.dot(ray.dir);
    return std::abs(family.dsigma_dd(s.dist) * dpsi_dt) / sig;
}

namespace {

double simpson_estimate(double a, double fa, double fm, double b, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double fa, double b,
                        double fb, double m, double fm, double whole, double tol, int depth) {
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = simpson_estimate(a, fa, flm, m, fm);
    double right = simpson_estimate(m, fm, frm, b, fb);
    if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
        return left + right + (left + right - whole) / 15.0;
    return adaptive_simpson(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           adaptive_simpson(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace

double integrate_tau_r(const DistanceField& field, const Ray& ray, double t0, double t1,
                       const DensityFamily& family, double tol) {
    std::function<double(double)> f = [&](double t) {
        return tau_r_continuous(field, ray, t, family);
    };
    double m = 0.5 * (t0 + t1);
    double fa = f(t0), fb = f(t1), fm = f(m);
    double whole = simpson_estimate(t0, fa, fm, t1, fb);
    return adaptive_simpson(f, t0, fa, t1, fb, m, fm, whole, tol, 28);
}

Vec3 composite_color(const WeightProfile& profile, const Eigen::Matrix3Xd& colors,
                     const RenderOptions& opts) {
    if (size_t(colors.cols()) != profile.t.size())
        throw std::invalid_argument("composite_color: need one color per sample");
    Vec3 c = Vec3::Zero();
    for (size_t i = 0; i < profile.bins(); ++i) {
        Vec3 ci = opts.midpoint_colors ? Vec3(0.5 * (colors.col(i) + colors.col(i + 1)))
                                       : Vec3(colors.col(i));
        c += profile.w[i] * ci;
    }
    c += (1.0 - profile.acc) * opts.background;
    return c;
}

}  // namespace udfvol
