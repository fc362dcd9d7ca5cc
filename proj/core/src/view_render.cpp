#include "udfvol/view_render.hpp"

#include <algorithm>
#include <cmath>

#include "udfvol/evaluation.hpp"
#include "udfvol/parallel.hpp"

namespace udfvol {

namespace {

uint8_t quantize(double v) {
    return uint8_t(std::clamp(std::lround(v * 255.0), 0L, 255L));
}

// Forward-only counterpart of the training-time normal construction.
void trailing_normals(const Eigen::Matrix3Xd& pts, const Eigen::Matrix3Xd& grads,
                      const NormalRegConfig& nc, Eigen::Matrix3Xd& nhat) {
    const Eigen::Index n = pts.cols();
    nhat.resize(3, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int K = std::min<Eigen::Index>(nc.neighbors, i);
        Vec3 acc = Vec3::Zero();
        double wsum = 0.0;
        for (int k = 1; k <= K; ++k) {
            const double sq = (pts.col(i) - pts.col(i - k)).squaredNorm();
            const double wgt = nc.inverse_weights ? 1.0 / std::max(sq, 1e-12) : sq;
            wsum += wgt;
            acc += wgt * grads.col(i - k);
        }
        Vec3 raw = (K == 0 || !(wsum > 0.0)) ? Vec3(grads.col(i)) : Vec3(acc / wsum);
        const double nn = raw.norm();
        nhat.col(i) = nn >= 1e-12 ? Vec3(raw / nn) : raw;
    }
}

}  // namespace

Image render_model_view(SceneModel& model, const Camera& cam, const VolumeRenderOptions& opts) {
    model.refresh();
    Image img(cam.width, cam.height, 4);
    const DensityFamily fam = model.family();

    struct PixelRay {
        int x, y;
        Ray ray;
        std::vector<double> t;
    };

    auto flush = [&](std::vector<PixelRay>& batch) {
        if (batch.empty()) return;
        Eigen::Index total = 0;
        for (const PixelRay& p : batch) total += Eigen::Index(p.t.size());

        Eigen::Matrix3Xd pts(3, total), views(3, total);
        Eigen::Index off = 0;
        for (const PixelRay& p : batch) {
            for (double tv : p.t) {
                pts.col(off) = p.ray.at(tv);
                views.col(off) = p.ray.dir;
                ++off;
            }
        }
        UdfNetwork::Tape tape;
        model.udf.forward(pts, tape);
        Eigen::Matrix3Xd nhat;
        ColorNetwork::Tape ctape;

        off = 0;
        std::vector<double> psi;
        for (const PixelRay& p : batch) {
            const Eigen::Index n = Eigen::Index(p.t.size());
            Eigen::Matrix3Xd ray_pts = pts.middleCols(off, n);
            Eigen::Matrix3Xd ray_grads = tape.grad.middleCols(off, n);
            trailing_normals(ray_pts, ray_grads, opts.normals, nhat);
            model.color.forward(ray_pts, views.middleCols(off, n), nhat,
                                tape.feat.middleCols(off, n), ctape);
            psi.assign(tape.dist.data() + off, tape.dist.data() + off + n);
            WeightProfile prof = alpha_compose(p.t, psi, fam);
            Vec3 c = composite_color(prof, ctape.rgb, RenderOptions{opts.background, false});
            for (int ch = 0; ch < 3; ++ch) img.at(p.x, p.y, ch) = quantize(c[ch]);
            img.at(p.x, p.y, 3) = quantize(prof.acc);
            off += n;
        }
        batch.clear();
    };

    std::vector<PixelRay> batch;
    Eigen::Index pending = 0;
    const Eigen::Index kFlushAt = 1536;
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            Ray ray = cam.pixel_to_ray(x + 0.5, y + 0.5);
            auto clip = sphere_clip(ray, opts.scene_radius);
            if (!clip) {
                for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = quantize(opts.background[ch]);
                img.at(x, y, 3) = 0;
                continue;
            }
            auto eval = [&](const std::vector<double>& tq, std::vector<double>& out) {
                Eigen::Matrix3Xd p(3, Eigen::Index(tq.size()));
                for (size_t k = 0; k < tq.size(); ++k)
                    p.col(Eigen::Index(k)) = ray.at(tq[k]);
                Eigen::VectorXd d;
                model.udf.forward_dist(p, d);
                out.assign(d.data(), d.data() + d.size());
            };
            SampleSet ss =
                hierarchical_sample(ray, clip->first, clip->second, opts.sampler, eval,
                                    derive_seed(opts.seed, uint64_t(y) * cam.width + x));
            pending += Eigen::Index(ss.t.size());
            batch.push_back(PixelRay{x, y, ray, std::move(ss.t)});
            if (pending >= kFlushAt) {
                flush(batch);
                pending = 0;
            }
        }
    }
    flush(batch);
    return img;
}

Image render_analytic_volume_view(const AnalyticScene& scene, const Camera& cam,
                                  const VolumeRenderOptions& opts) {
    Image img(cam.width, cam.height, 4);
    const DensityFamily fam{opts.analytic_kind, opts.analytic_r};
    const Vec3 l = opts.shading.light.normalized();

    parallel_chunks(cam.height, 8, [&](int64_t y0, int64_t y1) {
        std::vector<Vec3> pts;
        std::vector<double> psi;
        for (int y = int(y0); y < int(y1); ++y) {
            for (int x = 0; x < cam.width; ++x) {
                Ray ray = cam.pixel_to_ray(x + 0.5, y + 0.5);
                auto clip = sphere_clip(ray, opts.scene_radius);
                if (!clip) {
                    for (int ch = 0; ch < 3; ++ch)
                        img.at(x, y, ch) = quantize(opts.background[ch]);
                    img.at(x, y, 3) = 0;
                    continue;
                }
                auto hits = scene.intersections(ray, clip->first, clip->second);
                std::vector<double> anchors;
                for (const RayHit& h : hits) anchors.push_back(h.t);
                std::vector<double> grid =
                    snapped_grid(clip->first, clip->second, opts.analytic_samples, anchors);
                pts.resize(grid.size());
                for (size_t i = 0; i < grid.size(); ++i) pts[i] = ray.at(grid[i]);
                scene.eval_dist(pts, psi);
                WeightProfile prof = alpha_compose(grid, psi, fam);

                Vec3 shade = Vec3::Zero();
                if (!hits.empty()) {
                    const RayHit& h = hits.front();
                    shade = scene.primitives[size_t(h.primitive)].albedo *
                            (opts.shading.ambient +
                             opts.shading.lambert * std::abs(h.normal.dot(l)));
                }
                Eigen::Matrix3Xd colors(3, Eigen::Index(grid.size()));
                colors.colwise() = shade;
                Vec3 c = composite_color(prof, colors, RenderOptions{opts.background, false});
                for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = quantize(c[ch]);
                img.at(x, y, 3) = quantize(prof.acc);
            }
        }
    });
    return img;
}

}  // namespace udfvol
