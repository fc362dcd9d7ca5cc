#include "udfvol/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace udfvol {

double zeta_s(double d, double s) {
    if (d < 0.0 || !std::isfinite(d))
        throw std::invalid_argument("zeta_s: distance must be finite and non-negative");
    double e = std::exp(-s * d);
    double denom = 1.0 + e;
    return s * e / (denom * denom);
}

bool round_bin_weights(const std::vector<double>& t, const std::vector<double>& psi, double s,
                       std::vector<double>& w_out) {
    size_t n = t.size();
    if (n < 2 || psi.size() != n) throw std::invalid_argument("round_bin_weights: bad sizes");
    std::vector<double> tau(n);
    for (size_t i = 0; i < n; ++i) tau[i] = zeta_s(psi[i], s);
    size_t nb = n - 1;
    std::vector<double> w(nb);
    double trans = 1.0;
    for (size_t i = 0; i < nb; ++i) {
        double dt = t[i + 1] - t[i];
        double alpha = -std::expm1(-0.5 * (tau[i] + tau[i + 1]) * dt);
        w[i] = trans * alpha;
        trans *= 1.0 - alpha;
    }
    // Neighbor-max smoothing widens the importance peak by one bin each way.
    w_out.resize(nb);
    double total = 0.0;
    for (size_t i = 0; i < nb; ++i) {
        double m = w[i];
        if (i > 0) m = std::max(m, w[i - 1]);
        if (i + 1 < nb) m = std::max(m, w[i + 1]);
        w_out[i] = m;
        total += m;
    }
    if (!(total > 0.0)) return false;
    for (double& v : w_out) v /= total;
    return true;
}

std::vector<double> draw_from_bins(const std::vector<double>& t, const std::vector<double>& w,
                                   const std::vector<double>& u) {
    if (t.size() != w.size() + 1) throw std::invalid_argument("draw_from_bins: bad sizes");
    std::vector<double> cdf(w.size() + 1, 0.0);
    for (size_t i = 0; i < w.size(); ++i) cdf[i + 1] = cdf[i] + w[i];
    double total = cdf.back();
    std::vector<double> out;
    out.reserve(u.size());
    for (double uv : u) {
        double target = uv * total;
        size_t hi = std::upper_bound(cdf.begin(), cdf.end(), target) - cdf.begin();
        size_t bin = std::min(hi == 0 ? size_t(0) : hi - 1, w.size() - 1);
        double mass = cdf[bin + 1] - cdf[bin];
        double frac = mass > 0.0 ? (target - cdf[bin]) / mass : 0.5;
        out.push_back(t[bin] + frac * (t[bin + 1] - t[bin]));
    }
    return out;
}

SampleSet hierarchical_sample(
    const Ray& ray, double t0, double t1, const SamplerConfig& cfg,
    const std::function<void(const std::vector<double>&, std::vector<double>&)>& eval_psi,
    uint64_t seed) {
    (void)ray;
    if (!(t1 > t0)) throw std::invalid_argument("hierarchical_sample: empty interval");
    if (cfg.coarse < 2) throw std::invalid_argument("hierarchical_sample: need >= 2 coarse");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    SampleSet set;
    set.coarse_count = cfg.coarse;
    double h = (t1 - t0) / cfg.coarse;
    for (int i = 0; i < cfg.coarse; ++i) {
        double off = cfg.jitter_coarse ? unit(rng) : 0.5;
        set.t.push_back(t0 + (i + off) * h);
    }
    eval_psi(set.t, set.psi);

    for (int z = 1; z <= cfg.rounds; ++z) {
        double s = cfg.s0 * std::pow(cfg.round_rate, z - 1);
        std::vector<double> w;
        std::vector<double> draws;
        std::vector<double> u(cfg.per_round);
        for (int k = 0; k < cfg.per_round; ++k) u[k] = (k + unit(rng)) / cfg.per_round;
        if (round_bin_weights(set.t, set.psi, s, w)) {
            draws = draw_from_bins(set.t, w, u);
        } else {
            set.fallback_uniform = true;
            for (int k = 0; k < cfg.per_round; ++k) draws.push_back(t0 + u[k] * (t1 - t0));
        }
        std::vector<double> new_psi;
        eval_psi(draws, new_psi);
        set.added_t.insert(set.added_t.end(), draws.begin(), draws.end());
        set.t.insert(set.t.end(), draws.begin(), draws.end());
        set.psi.insert(set.psi.end(), new_psi.begin(), new_psi.end());
        // stable merge keeping psi aligned
        std::vector<size_t> order(set.t.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](size_t a, size_t b) { return set.t[a] < set.t[b]; });
        std::vector<double> ts(set.t.size()), ps(set.t.size());
        for (size_t i = 0; i < order.size(); ++i) {
            ts[i] = set.t[order[i]];
            ps[i] = set.psi[order[i]];
        }
        set.t.swap(ts);
        set.psi.swap(ps);
    }
    return set;
}

SampleSet hierarchical_sample(const Ray& ray, double t0, double t1, const SamplerConfig& cfg,
                              const DistanceField& field, uint64_t seed) {
    auto eval = [&](const std::vector<double>& ts, std::vector<double>& out) {
        std::vector<Vec3> pts;
        pts.reserve(ts.size());
        for (double t : ts) pts.push_back(ray.at(t));
        field.eval_dist(pts, out);
    };
    return hierarchical_sample(ray, t0, t1, cfg, eval, seed);
}

}  // namespace udfvol
