#include "udfvol/supervision.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "udfvol/parallel.hpp"

namespace udfvol {

namespace {

constexpr Eigen::Index kChunk = 2048;
// Opacity is clamped into [kBceClamp, 1 - kBceClamp] for the mask term and
// the gradient is taken at the clamped value, so saturated rays (opacity
// pinned at 0 or 1 by an exact level-set crossing) keep a bounded pull
// instead of going silent.
constexpr double kBceClamp = 1e-3;

double sgn(double x) { return (x > 0.0) ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

void SceneModel::build(const UdfNetConfig& ucfg, const ColorNetConfig& ccfg, double r_init,
                       double r_rate, uint64_t seed) {
    if (ucfg.feature_dim != ccfg.feature_dim)
        throw std::invalid_argument("feature dimensions of the two networks must match");
    store = ParamStore();
    udf = UdfNetwork(ucfg, store);
    color = ColorNetwork(ccfg, store);
    density.init(store, r_rate);
    store.finalize();
    std::mt19937_64 rng(seed);
    udf.init_params(store, rng);
    color.init_params(store, rng);
    density.set_r(store, r_init);
    refresh();
}

void SceneModel::refresh() {
    udf.refresh(store);
    color.refresh(store);
}

BatchLossStats compute_batch_loss(SceneModel& model, const std::vector<RayBatchEntry>& rays,
                                  const std::vector<std::vector<double>>& ts,
                                  const LossWeights& lw, const NormalRegConfig& nc,
                                  const Vec3& background, const Eigen::Matrix3Xd* eik_pts) {
    if (rays.empty()) throw std::invalid_argument("empty ray batch");
    if (rays.size() != ts.size()) throw std::invalid_argument("ray/sample count mismatch");
    const int R = int(rays.size());

    std::vector<Eigen::Index> off(R + 1, 0);
    for (int r = 0; r < R; ++r) {
        if (ts[r].size() < 2) throw std::invalid_argument("each ray needs at least two samples");
        off[r + 1] = off[r] + Eigen::Index(ts[r].size());
    }
    const Eigen::Index N = off[R];

    Eigen::Matrix3Xd pts(3, N), views(3, N);
    for (int r = 0; r < R; ++r) {
        Vec3 dir = rays[r].ray.dir.normalized();
        for (size_t i = 0; i < ts[r].size(); ++i) {
            pts.col(off[r] + Eigen::Index(i)) = rays[r].ray.at(ts[r][i]);
            views.col(off[r] + Eigen::Index(i)) = dir;
        }
    }

    // Distance network forward; tapes stay alive for the backward pass.
    const Eigen::Index chunks = (N + kChunk - 1) / kChunk;
    const size_t nchunks = size_t(chunks);
    std::vector<UdfNetwork::Tape> utapes(nchunks);
    Eigen::VectorXd psi(N);
    Eigen::Matrix3Xd grad(3, N);
    const int F = model.udf.config().feature_dim;
    Eigen::MatrixXd feat(F, N);
    for (Eigen::Index c = 0; c < chunks; ++c) {
        Eigen::Index b = c * kChunk, m = std::min(b + kChunk, N) - b;
        model.udf.forward(pts.middleCols(b, m), utapes[size_t(c)]);
        psi.segment(b, m) = utapes[size_t(c)].dist;
        grad.middleCols(b, m) = utapes[size_t(c)].grad;
        feat.middleCols(b, m) = utapes[size_t(c)].feat;
    }

    // Normal inputs: squared-distance weighted average of the trailing
    // gradients, then normalization. The weights depend only on detached
    // positions.
    Eigen::Matrix3Xd nraw(3, N), nhat(3, N);
    Eigen::VectorXd nnorm(N), wsum(N);
    std::vector<uint8_t> own_grad(size_t(N), 0);
    for (int r = 0; r < R; ++r) {
        const Eigen::Index n = Eigen::Index(ts[r].size());
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::Index idx = off[r] + i;
            const int K = std::min<Eigen::Index>(nc.neighbors, i);
            Vec3 acc_vec = Vec3::Zero();
            double acc_w = 0.0;
            for (int k = 1; k <= K; ++k) {
                double sq = (pts.col(idx) - pts.col(idx - k)).squaredNorm();
                double wgt = nc.inverse_weights ? 1.0 / std::max(sq, 1e-12) : sq;
                acc_w += wgt;
                acc_vec += wgt * grad.col(idx - k);
            }
            if (K == 0 || !(acc_w > 0.0)) {
                own_grad[size_t(idx)] = 1;
                nraw.col(idx) = grad.col(idx);
                wsum(idx) = 0.0;
            } else {
                nraw.col(idx) = acc_vec / acc_w;
                wsum(idx) = acc_w;
            }
            double nn = nraw.col(idx).norm();
            nnorm(idx) = nn;
            nhat.col(idx) = (nn >= 1e-12) ? Vec3(nraw.col(idx) / nn) : Vec3(nraw.col(idx));
        }
    }

    // Radiance network forward.
    std::vector<ColorNetwork::Tape> ctapes(nchunks);
    Eigen::Matrix3Xd rgb(3, N);
    for (Eigen::Index c = 0; c < chunks; ++c) {
        Eigen::Index b = c * kChunk, m = std::min(b + kChunk, N) - b;
        model.color.forward(pts.middleCols(b, m), views.middleCols(b, m), nhat.middleCols(b, m),
                            feat.middleCols(b, m), ctapes[size_t(c)]);
        rgb.middleCols(b, m) = ctapes[size_t(c)].rgb;
    }

    BatchLossStats st;
    st.rays = R;
    st.samples = N;
    const Eigen::Index M = eik_pts ? eik_pts->cols() : 0;
    const DensityFamily fam = model.family();
    const double wc = lw.color / (3.0 * R);
    const double wm = lw.mask / R;
    const double we = lw.eikonal / double(N + M);

    Eigen::Matrix3Xd cbar = Eigen::Matrix3Xd::Zero(3, N);
    Eigen::VectorXd psibar = Eigen::VectorXd::Zero(N);
    Eigen::Matrix3Xd gbar = Eigen::Matrix3Xd::Zero(3, N);
    double rbar = 0.0;

    std::vector<double> psi_r, wbar, abar, sbar;
    for (int r = 0; r < R; ++r) {
        const Eigen::Index n = Eigen::Index(ts[r].size());
        const Eigen::Index base = off[r];
        psi_r.assign(psi.data() + base, psi.data() + base + n);
        WeightProfile prof = alpha_compose(ts[r], psi_r, fam);
        const size_t nb = prof.bins();

        Vec3 C = (1.0 - prof.acc) * background;
        for (size_t i = 0; i < nb; ++i) C += prof.w[i] * rgb.col(base + Eigen::Index(i));
        Vec3 err = C - rays[r].target_color;
        st.color += err.cwiseAbs().sum();
        Vec3 Cb(wc * sgn(err.x()), wc * sgn(err.y()), wc * sgn(err.z()));

        const double a = prof.acc;
        const double ac = std::clamp(a, kBceClamp, 1.0 - kBceClamp);
        const double m = rays[r].target_mask;
        st.mask += -(m * std::log(ac) + (1.0 - m) * std::log(1.0 - ac));
        st.acc_mean += a;
        double accbar = wm * (-(m / ac) + (1.0 - m) / (1.0 - ac));
        accbar -= Cb.dot(background);

        wbar.assign(nb, 0.0);
        for (size_t i = 0; i < nb; ++i) {
            const Eigen::Index idx = base + Eigen::Index(i);
            wbar[i] = Cb.dot(rgb.col(idx) - background) + accbar;
            cbar.col(idx) = prof.w[i] * Cb;
        }

        // Reverse of w_i = T_i a_i, T_{i+1} = T_i (1 - a_i); division free.
        abar.assign(nb, 0.0);
        double Tbar = 0.0;
        for (size_t ii = nb; ii-- > 0;) {
            abar[ii] = (wbar[ii] - Tbar) * prof.trans[ii];
            Tbar = wbar[ii] * prof.alpha[ii] + Tbar * (1.0 - prof.alpha[ii]);
        }

        sbar.assign(size_t(n), 0.0);
        for (size_t i = 0; i < nb; ++i) {
            const double s_l = prof.sigma[i], s_r = prof.sigma[i + 1];
            const size_t hi_idx = (s_l < s_r) ? i + 1 : i;
            const size_t lo_idx = (s_l < s_r) ? i : i + 1;
            const double hi = prof.sigma[hi_idx];
            if (hi > 0.0) {
                sbar[hi_idx] += abar[i] * prof.sigma[lo_idx] / (hi * hi);
                sbar[lo_idx] -= abar[i] / hi;
            }
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            const double p = psi(base + i);
            psibar(base + i) += sbar[size_t(i)] * fam.dsigma_dd(p);
            rbar += sbar[size_t(i)] * fam.dsigma_dr(p);
        }
    }

    for (Eigen::Index idx = 0; idx < N; ++idx) {
        const double nrm = grad.col(idx).norm();
        st.eikonal += (nrm - 1.0) * (nrm - 1.0);
        if (nrm > 1e-12) gbar.col(idx) += we * 2.0 * (nrm - 1.0) / nrm * grad.col(idx);
    }

    // Radiance backward: parameter gradients plus adjoints of the normal and
    // feature inputs.
    Eigen::Matrix3Xd nbar_hat(3, N);
    Eigen::MatrixXd fbar(F, N);
    for (Eigen::Index c = 0; c < chunks; ++c) {
        Eigen::Index b = c * kChunk, m = std::min(b + kChunk, N) - b;
        Eigen::Matrix3Xd nb_chunk;
        Eigen::MatrixXd fb_chunk;
        model.color.backward(ctapes[size_t(c)], cbar.middleCols(b, m), nb_chunk, fb_chunk,
                             model.store);
        nbar_hat.middleCols(b, m) = nb_chunk;
        fbar.middleCols(b, m) = fb_chunk;
    }

    // Normal construction backward.
    for (int r = 0; r < R; ++r) {
        const Eigen::Index n = Eigen::Index(ts[r].size());
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::Index idx = off[r] + i;
            Vec3 nb = nbar_hat.col(idx);
            Vec3 nraw_bar;
            if (nnorm(idx) >= 1e-12) {
                Vec3 h = nhat.col(idx);
                nraw_bar = (nb - h * h.dot(nb)) / nnorm(idx);
            } else {
                nraw_bar = nb;
            }
            if (own_grad[size_t(idx)]) {
                gbar.col(idx) += nraw_bar;
            } else {
                const int K = std::min<Eigen::Index>(nc.neighbors, i);
                for (int k = 1; k <= K; ++k) {
                    double sq = (pts.col(idx) - pts.col(idx - k)).squaredNorm();
                    double wgt = nc.inverse_weights ? 1.0 / std::max(sq, 1e-12) : sq;
                    gbar.col(idx - k) += (wgt / wsum(idx)) * nraw_bar;
                }
            }
        }
    }

    for (Eigen::Index c = 0; c < chunks; ++c) {
        Eigen::Index b = c * kChunk, m = std::min(b + kChunk, N) - b;
        model.udf.backward(utapes[size_t(c)], psibar.segment(b, m), gbar.middleCols(b, m),
                           fbar.middleCols(b, m), model.store);
    }
    model.density.accumulate_r_grad(model.store, rbar);

    if (M > 0) {
        UdfNetwork::Tape etape;
        model.udf.forward(*eik_pts, etape);
        Eigen::VectorXd edbar = Eigen::VectorXd::Zero(M);
        Eigen::Matrix3Xd egbar = Eigen::Matrix3Xd::Zero(3, M);
        const Eigen::MatrixXd efbar = Eigen::MatrixXd::Zero(F, M);
        for (Eigen::Index i = 0; i < M; ++i) {
            const double nrm = etape.grad.col(i).norm();
            st.eikonal += (nrm - 1.0) * (nrm - 1.0);
            if (nrm > 1e-12) egbar.col(i) = we * 2.0 * (nrm - 1.0) / nrm * etape.grad.col(i);
        }
        model.udf.backward(etape, edbar, egbar, efbar, model.store);
    }

    st.color /= 3.0 * R;
    st.mask /= R;
    st.eikonal /= double(N + M);
    st.acc_mean /= R;
    st.total = lw.color * st.color + lw.eikonal * st.eikonal + lw.mask * st.mask;
    return st;
}

double lr_schedule(int64_t iter, int64_t total, int64_t warmup, double peak, double final_lr,
                   double floor) {
    double lr;
    if (warmup > 0 && iter < warmup) {
        lr = peak * double(iter + 1) / double(warmup);
    } else {
        const int64_t span = std::max<int64_t>(1, total - warmup);
        const double x = std::clamp(double(iter - warmup) / double(span), 0.0, 1.0);
        lr = final_lr + 0.5 * (peak - final_lr) * (1.0 + std::cos(std::numbers::pi * x));
    }
    return std::max(lr, floor);
}

void warm_start_sphere(SceneModel& model, Adam& adam, double radius, double domain, int iters,
                       int batch, double lr, uint64_t seed) {
    if (batch <= 0 || iters < 0) throw std::invalid_argument("bad warm start sizes");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    UdfNetwork::Tape tape;
    const int F = model.udf.config().feature_dim;
    const Eigen::MatrixXd fbar = Eigen::MatrixXd::Zero(F, batch);
    for (int it = 0; it < iters; ++it) {
        model.udf.refresh(model.store);
        Eigen::Matrix3Xd pts(3, batch);
        int got = 0;
        while (got < batch) {
            Vec3 p(unit(rng), unit(rng), unit(rng));
            if (p.squaredNorm() <= 1.0) pts.col(got++) = domain * p;
        }
        model.store.zero_grads();
        model.udf.forward(pts, tape);
        Eigen::VectorXd dbar(batch);
        Eigen::Matrix3Xd gbar(3, batch);
        for (int i = 0; i < batch; ++i) {
            const Vec3 p = pts.col(i);
            const double pn = p.norm();
            const double dstar = std::abs(pn - radius);
            Vec3 gstar = Vec3::Zero();
            if (pn > 1e-9) gstar = ((pn >= radius) ? 1.0 : -1.0) * p / pn;
            dbar(i) = 2.0 * (tape.dist(i) - dstar) / batch;
            gbar.col(i) = 0.2 * (tape.grad.col(i) - gstar) / batch;
        }
        model.udf.backward(tape, dbar, gbar, fbar, model.store);
        adam.step(model.store.values(), model.store.grads(), lr);
    }
    model.refresh();
}

BatchLossStats train_step(TrainState& st, const std::vector<RayBatchEntry>& rays,
                          const SamplerConfig& sampler_cfg, const LossWeights& lw,
                          const NormalRegConfig& nc, double lr, uint64_t seed,
                          const Vec3& background, int eik_global, double eik_radius) {
    st.model.refresh();
    std::vector<std::vector<double>> ts(rays.size());
    for (size_t i = 0; i < rays.size(); ++i) {
        auto eval = [&](const std::vector<double>& tq, std::vector<double>& out) {
            Eigen::Matrix3Xd p(3, Eigen::Index(tq.size()));
            for (size_t k = 0; k < tq.size(); ++k) p.col(Eigen::Index(k)) = rays[i].ray.at(tq[k]);
            Eigen::VectorXd d;
            st.model.udf.forward_dist(p, d);
            out.assign(d.data(), d.data() + d.size());
        };
        SampleSet ss = hierarchical_sample(rays[i].ray, rays[i].t0, rays[i].t1, sampler_cfg, eval,
                                           derive_seed(seed, i));
        ts[i] = std::move(ss.t);
    }
    Eigen::Matrix3Xd epts;
    if (eik_global > 0) {
        std::mt19937_64 erng(derive_seed(seed, 0xE14AF));
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        epts.resize(3, eik_global);
        int got = 0;
        while (got < eik_global) {
            Vec3 p(unit(erng), unit(erng), unit(erng));
            if (p.squaredNorm() <= 1.0) epts.col(got++) = eik_radius * p;
        }
    }
    st.model.store.zero_grads();
    BatchLossStats stats = compute_batch_loss(st.model, rays, ts, lw, nc, background,
                                              eik_global > 0 ? &epts : nullptr);
    st.adam.step(st.model.store.values(), st.model.store.grads(), lr);
    ++st.iter;
    return stats;
}

}  // namespace udfvol
