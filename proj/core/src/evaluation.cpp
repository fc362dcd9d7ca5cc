#include "udfvol/evaluation.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace udfvol {

std::vector<double> snapped_grid(double t0, double t1, int n,
                                 const std::vector<double>& anchors) {
    if (!(t1 > t0)) throw std::invalid_argument("snapped_grid: empty interval");
    if (n < 2) throw std::invalid_argument("snapped_grid: need at least two samples");
    std::vector<double> t(size_t(n), 0.0);
    const double h = (t1 - t0) / (n - 1);
    for (int i = 0; i < n; ++i) t[size_t(i)] = t0 + h * i;
    t.back() = t1;
    for (double a : anchors) {
        if (a < t0 || a > t1) continue;
        const auto it = std::min_element(t.begin(), t.end(), [a](double x, double y) {
            return std::abs(x - a) < std::abs(y - a);
        });
        *it = a;
    }
    std::sort(t.begin(), t.end());
    return t;
}

double telescoping_error(const WeightProfile& p, size_t i0, size_t i1) {
    if (i1 <= i0 || i1 >= p.t.size())
        throw std::invalid_argument("telescoping_error: bad index range");
    if (!(p.sigma[i0] > 0.0))
        throw std::invalid_argument("telescoping_error: zero density at segment start");
    double prod = 1.0;
    for (size_t i = i0; i < i1; ++i) prod *= 1.0 - p.alpha[i];
    const double closed = p.sigma[i1] / p.sigma[i0];
    const double scale = std::max(std::abs(closed), 1e-300);
    return std::abs(prod - closed) / scale;
}

std::vector<Vec3> extract_zero_set(const DistanceField& field, const ExtractionConfig& cfg) {
    if (cfg.grid < 2) throw std::invalid_argument("extraction grid too small");
    const double h = 2.0 * cfg.domain / cfg.grid;

    std::vector<Vec3> centers;
    centers.reserve(size_t(cfg.grid) * cfg.grid * cfg.grid / 2);
    const double keep_radius = cfg.domain + h;
    for (int i = 0; i < cfg.grid; ++i) {
        for (int j = 0; j < cfg.grid; ++j) {
            for (int k = 0; k < cfg.grid; ++k) {
                Vec3 c(-cfg.domain + (i + 0.5) * h, -cfg.domain + (j + 0.5) * h,
                       -cfg.domain + (k + 0.5) * h);
                if (c.norm() <= keep_radius) centers.push_back(c);
            }
        }
    }
    std::vector<double> d;
    field.eval_dist(centers, d);

    std::vector<Vec3> pts;
    const double capture = 0.87 * h;  // half the cell diagonal
    for (size_t i = 0; i < centers.size(); ++i)
        if (d[i] <= capture) pts.push_back(centers[i]);
    if (pts.empty())
        throw std::runtime_error("extraction: no grid cells near the zero level set");

    // Batched gradient-descent projection x <- x - d * grad.
    std::vector<FieldSample> samples;
    std::vector<uint8_t> active(pts.size(), 1);
    for (int it = 0; it < cfg.max_iters; ++it) {
        field.eval_batch(pts, samples);
        bool moved = false;
        for (size_t i = 0; i < pts.size(); ++i) {
            if (!active[i]) continue;
            if (samples[i].dist <= 0.1 * cfg.eps || samples[i].cusp) {
                active[i] = 0;
                continue;
            }
            pts[i] -= samples[i].dist * samples[i].gradient;
            moved = true;
        }
        if (!moved) break;
    }
    field.eval_batch(pts, samples);

    std::vector<Vec3> out;
    out.reserve(pts.size());
    for (size_t i = 0; i < pts.size(); ++i)
        if (samples[i].dist <= cfg.eps && pts[i].norm() <= cfg.domain + h) out.push_back(pts[i]);
    if (out.size() * 100 < pts.size())
        throw std::runtime_error("extraction: only " + std::to_string(out.size()) + " of " +
                                 std::to_string(pts.size()) +
                                 " seed points converged below the residual threshold");
    return out;
}

namespace {

// Uniform cell grid for exact nearest-neighbor queries.
class PointGrid {
public:
    explicit PointGrid(const std::vector<Vec3>& pts) : pts_(pts) {
        lo_ = hi_ = pts[0];
        for (const Vec3& p : pts) {
            lo_ = lo_.cwiseMin(p);
            hi_ = hi_.cwiseMax(p);
        }
        const double extent = (hi_ - lo_).maxCoeff();
        const int target = std::max(1, int(std::cbrt(double(pts.size()))));
        cell_ = extent > 0.0 ? extent / target : 1.0;
        for (int a = 0; a < 3; ++a)
            dims_[a] = std::max<int64_t>(1, int64_t((hi_[a] - lo_[a]) / cell_) + 1);
        cells_.assign(size_t(dims_[0] * dims_[1] * dims_[2]), {});
        for (size_t i = 0; i < pts.size(); ++i) cells_[cell_index(coord(pts[i]))].push_back(int(i));
    }

    double nn_sq(const Vec3& q) const {
        const std::array<int64_t, 3> c = coord(q);
        int64_t kmax = 0;
        for (int a = 0; a < 3; ++a) kmax = std::max({kmax, c[a], dims_[a] - 1 - c[a]});
        double best = std::numeric_limits<double>::infinity();
        for (int64_t k = 0; k <= kmax; ++k) {
            visit_ring(c, k, [&](size_t idx) {
                for (int i : cells_[idx]) best = std::min(best, (pts_[size_t(i)] - q).squaredNorm());
            });
            // Every unvisited cell is at least k * cell_ away from q.
            const double bound = double(k) * cell_;
            if (best <= bound * bound) break;
        }
        return best;
    }

private:
    std::array<int64_t, 3> coord(const Vec3& p) const {
        std::array<int64_t, 3> c;
        for (int a = 0; a < 3; ++a)
            c[size_t(a)] = std::clamp(int64_t((p[a] - lo_[a]) / cell_), int64_t(0), dims_[a] - 1);
        return c;
    }
    size_t cell_index(const std::array<int64_t, 3>& c) const {
        return size_t((c[0] * dims_[1] + c[1]) * dims_[2] + c[2]);
    }

    template <typename F>
    void visit_ring(const std::array<int64_t, 3>& c, int64_t k, F&& f) const {
        for (int64_t dx = -k; dx <= k; ++dx) {
            const int64_t x = c[0] + dx;
            if (x < 0 || x >= dims_[0]) continue;
            const bool face_x = std::abs(dx) == k;
            for (int64_t dy = -k; dy <= k; ++dy) {
                const int64_t y = c[1] + dy;
                if (y < 0 || y >= dims_[1]) continue;
                if (face_x || std::abs(dy) == k) {
                    for (int64_t dz = -k; dz <= k; ++dz) {
                        const int64_t z = c[2] + dz;
                        if (z < 0 || z >= dims_[2]) continue;
                        f(cell_index({x, y, z}));
                    }
                } else {
                    for (int64_t dz : {-k, k}) {
                        const int64_t z = c[2] + dz;
                        if (z < 0 || z >= dims_[2]) continue;
                        f(cell_index({x, y, z}));
                    }
                }
            }
        }
    }

    const std::vector<Vec3>& pts_;
    Vec3 lo_, hi_;
    double cell_ = 1.0;
    std::array<int64_t, 3> dims_{1, 1, 1};
    std::vector<std::vector<int>> cells_;
};

double directed_mean_nn_sq(const std::vector<Vec3>& from, const PointGrid& grid) {
    double sum = 0.0;
    for (const Vec3& p : from) sum += grid.nn_sq(p);
    return sum / double(from.size());
}

}  // namespace

double chamfer_sq(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("chamfer of an empty point cloud");
    PointGrid ga(a), gb(b);
    return directed_mean_nn_sq(a, gb) + directed_mean_nn_sq(b, ga);
}

double chamfer_sq_brute(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("chamfer of an empty point cloud");
    auto directed = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
        double sum = 0.0;
        for (const Vec3& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const Vec3& q : to) best = std::min(best, (p - q).squaredNorm());
            sum += best;
        }
        return sum / double(from.size());
    };
    return directed(a, b) + directed(b, a);
}

std::vector<Vec3> sample_surface(const AnalyticScene& scene, int count, uint64_t seed) {
    if (scene.primitives.empty()) throw std::invalid_argument("empty scene");
    if (count <= 0) throw std::invalid_argument("need a positive sample count");

    std::vector<double> area(scene.primitives.size());
    for (size_t i = 0; i < scene.primitives.size(); ++i) {
        const Primitive& p = scene.primitives[i];
        switch (p.type) {
            case Primitive::Type::Sphere:
                area[i] = 4.0 * std::numbers::pi * p.radius * p.radius;
                break;
            case Primitive::Type::Disk:
                area[i] = std::numbers::pi * p.radius * p.radius;
                break;
            case Primitive::Type::PlaneSegment:
                area[i] = 4.0 * p.half_extents.x() * p.half_extents.y();
                break;
        }
    }
    std::vector<double> cum(area.size());
    std::partial_sum(area.begin(), area.end(), cum.begin());
    const double total = cum.back();
    if (!(total > 0.0)) throw std::invalid_argument("scene has zero surface area");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<Vec3> out;
    out.reserve(size_t(count));
    for (int s = 0; s < count; ++s) {
        const double pick = uni(rng) * total;
        const size_t i =
            size_t(std::lower_bound(cum.begin(), cum.end(), pick) - cum.begin());
        const Primitive& p = scene.primitives[std::min(i, scene.primitives.size() - 1)];
        switch (p.type) {
            case Primitive::Type::Sphere: {
                Vec3 dir(gauss(rng), gauss(rng), gauss(rng));
                while (dir.norm() < 1e-9) dir = Vec3(gauss(rng), gauss(rng), gauss(rng));
                out.push_back(p.center + p.radius * dir.normalized());
                break;
            }
            case Primitive::Type::Disk: {
                const Vec3 nrm = p.normal.normalized();
                const Vec3 e = std::abs(nrm.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
                const Vec3 u = nrm.cross(e).normalized();
                const Vec3 v = nrm.cross(u);
                const double rho = p.radius * std::sqrt(uni(rng));
                const double ang = 2.0 * std::numbers::pi * uni(rng);
                out.push_back(p.center + rho * (std::cos(ang) * u + std::sin(ang) * v));
                break;
            }
            case Primitive::Type::PlaneSegment: {
                const Vec3 nrm = p.normal.normalized();
                const Vec3 tu = (p.tangent - p.tangent.dot(nrm) * nrm).normalized();
                const Vec3 tv = nrm.cross(tu);
                const double u = (2.0 * uni(rng) - 1.0) * p.half_extents.x();
                const double v = (2.0 * uni(rng) - 1.0) * p.half_extents.y();
                out.push_back(p.center + u * tu + v * tv);
                break;
            }
        }
    }
    return out;
}

void normalize_points_unit(std::vector<Vec3>& pts) {
    if (pts.empty()) return;
    Vec3 centroid = Vec3::Zero();
    for (const Vec3& p : pts) centroid += p;
    centroid /= double(pts.size());
    double max_norm = 0.0;
    for (Vec3& p : pts) {
        p -= centroid;
        max_norm = std::max(max_norm, p.norm());
    }
    if (max_norm > 0.0)
        for (Vec3& p : pts) p /= max_norm;
}

void save_ply(const std::string& path, const std::vector<Vec3>& pts) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write PLY: " + path);
    out << "ply\nformat ascii 1.0\nelement vertex " << pts.size()
        << "\nproperty double x\nproperty double y\nproperty double z\nend_header\n";
    out.precision(17);
    for (const Vec3& p : pts) out << p.x() << " " << p.y() << " " << p.z() << "\n";
    if (!out) throw std::runtime_error("PLY write failed: " + path);
}

std::vector<Vec3> load_ply(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open PLY: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "ply")
        throw std::runtime_error("not a PLY file: " + path);
    size_t count = 0;
    bool ascii = false, in_vertex = false;
    int props = 0;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "comment") continue;
        if (word == "format") {
            std::string fmt;
            ls >> fmt;
            ascii = (fmt == "ascii");
        } else if (word == "element") {
            std::string which;
            ls >> which >> count;
            if (which != "vertex")
                throw std::runtime_error("PLY: unsupported element '" + which + "'");
            in_vertex = true;
        } else if (word == "property") {
            if (!in_vertex) throw std::runtime_error("PLY: property outside vertex element");
            std::string type, name;
            ls >> type >> name;
            static const char* expect[3] = {"x", "y", "z"};
            if (props >= 3 || name != expect[props])
                throw std::runtime_error("PLY: expected exactly x, y, z vertex properties");
            ++props;
        } else if (word == "end_header") {
            break;
        } else {
            throw std::runtime_error("PLY: unsupported header line '" + line + "'");
        }
    }
    if (!ascii) throw std::runtime_error("PLY: only ascii 1.0 is supported");
    if (props != 3) throw std::runtime_error("PLY: expected exactly x, y, z vertex properties");
    std::vector<Vec3> pts(count);
    for (size_t i = 0; i < count; ++i) {
        if (!(in >> pts[i].x() >> pts[i].y() >> pts[i].z()))
            throw std::runtime_error("PLY: truncated vertex data");
    }
    return pts;
}

BiasStudy run_bias_study(const AnalyticScene& scene, const Ray& ray, double t0, double t1, int n,
                         const std::vector<double>& rs, DensityKind kind, double naive_s,
                         double delta) {
    auto hits = scene.intersections(ray, t0, t1);
    if (hits.size() < 2)
        throw std::invalid_argument("bias study needs a ray with two surface crossings");

    BiasStudy study;
    study.samples = n;
    study.t_first = hits[0].t;
    study.t_second = hits[1].t;
    study.delta = delta;

    const std::vector<double> grid = snapped_grid(t0, t1, n, {hits[0].t, hits[1].t});
    std::vector<Vec3> pts(grid.size());
    for (size_t i = 0; i < grid.size(); ++i) pts[i] = ray.at(grid[i]);
    std::vector<double> psi;
    scene.eval_dist(pts, psi);

    auto near_mass = [&](const WeightProfile& p) {
        double m = 0.0;
        for (size_t i = 0; i < p.w.size(); ++i) {
            const double te = p.t[i + 1];
            if (te >= study.t_first - delta && te <= study.t_first + delta) m += p.w[i];
        }
        return m;
    };

    for (double r : rs) {
        WeightProfile p = alpha_compose(grid, psi, DensityFamily{kind, r});
        BiasRow row;
        row.r = r;
        row.mass_first = p.mass_through(study.t_first);
        row.mass_between = p.mass_through(study.t_second) - row.mass_first;
        row.residual = 1.0 - row.mass_first - row.mass_between;
        const int am = p.argmax_sample();
        row.argmax_t = p.t[size_t(am)];
        row.mass_near_first = near_mass(p);
        study.rows.push_back(row);
    }

    study.naive_s = naive_s;
    WeightProfile np = naive_neus_compose(grid, psi, naive_s);
    study.naive_mass_first = np.mass_through(study.t_first);
    study.naive_mass_between = np.mass_through(study.t_second) - study.naive_mass_first;
    study.naive_residual = 1.0 - study.naive_mass_first - study.naive_mass_between;
    study.naive_mass_early = np.mass_through(study.t_first - 4.0 / naive_s);
    return study;
}

std::string bias_study_text(const BiasStudy& s) {
    std::ostringstream os;
    os.precision(6);
    os << "two-surface ray study: " << s.samples << " samples, hits at t=" << s.t_first
       << " and t=" << s.t_second << "\n";
    os << "unsigned compositor (per sharpness r):\n";
    os << "        r   mass<=t1   between   residual   argmax_t   mass(+-" << s.delta << ")\n";
    for (const BiasRow& r : s.rows) {
        os.width(9);
        os << r.r << "   ";
        os.width(8);
        os << r.mass_first << "   ";
        os.width(7);
        os << r.mass_between << "   ";
        os.width(8);
        os << r.residual << "   ";
        os.width(8);
        os << r.argmax_t << "   ";
        os.width(8);
        os << r.mass_near_first << "\n";
    }
    os << "sign-aware comparator (s=" << s.naive_s << "): mass<=t1=" << s.naive_mass_first
       << " between=" << s.naive_mass_between << " residual=" << s.naive_residual
       << " early=" << s.naive_mass_early << "\n";
    return os.str();
}

std::string bias_study_json(const BiasStudy& s) {
    nlohmann::json rows = nlohmann::json::array();
    for (const BiasRow& r : s.rows) {
        rows.push_back({{"r", r.r},
                        {"mass_first", r.mass_first},
                        {"mass_between", r.mass_between},
                        {"residual", r.residual},
                        {"argmax_t", r.argmax_t},
                        {"mass_near_first", r.mass_near_first}});
    }
    nlohmann::json j{{"samples", s.samples},
                     {"t_first", s.t_first},
                     {"t_second", s.t_second},
                     {"delta", s.delta},
                     {"rows", std::move(rows)},
                     {"naive",
                      {{"s", s.naive_s},
                       {"mass_first", s.naive_mass_first},
                       {"mass_between", s.naive_mass_between},
                       {"residual", s.naive_residual},
                       {"mass_early", s.naive_mass_early}}}};
    return j.dump(2);
}

}  // namespace udfvol
