#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "udfvol/checkpoint.hpp"
#include "udfvol/config.hpp"
#include "udfvol/dataset.hpp"
#include "udfvol/evaluation.hpp"
#include "udfvol/parallel.hpp"
#include "udfvol/synth.hpp"
#include "udfvol/view_render.hpp"

namespace fs = std::filesystem;
using namespace udfvol;

namespace {

// Everything a subcommand wrote; removed again when it fails so a nonzero
// exit never leaves partial outputs behind.
std::vector<fs::path> g_created;

void track(const fs::path& p) { g_created.push_back(p); }

void remove_created() {
    for (const fs::path& p : g_created) {
        std::error_code ec;
        fs::remove(p, ec);
    }
}

void write_text_file(const fs::path& path, const std::string& text) {
    fs::path tmp = path;
    tmp += ".tmp";
    track(tmp);
    {
        std::ofstream out(tmp);
        if (!out) throw std::runtime_error("cannot write " + path.string());
        out << text;
        if (!out) throw std::runtime_error("failed writing " + path.string());
    }
    fs::rename(tmp, path);
    track(path);
}

void save_png_tracked(const fs::path& path, const Image& img) {
    fs::path tmp = path;
    tmp += ".tmp";
    track(tmp);
    save_png(tmp.string(), img);
    fs::rename(tmp, path);
    track(path);
}

void save_ply_tracked(const fs::path& path, const std::vector<Vec3>& pts) {
    fs::path tmp = path;
    tmp += ".tmp";
    track(tmp);
    save_ply(tmp.string(), pts);
    fs::rename(tmp, path);
    track(path);
}

void save_checkpoint_tracked(const fs::path& path, const Checkpoint& ck) {
    fs::path tmp = path;
    tmp += ".tmp";
    track(tmp);
    save_checkpoint(tmp.string(), ck);
    fs::rename(tmp, path);
    track(path);
}

AnalyticScene load_scene_arg(const std::string& name) {
    if (name.find('/') != std::string::npos || name.ends_with(".json"))
        return AnalyticScene::load_json(name);
    return AnalyticScene::builtin(name);
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        size_t used = 0;
        double v = std::stod(item, &used);
        if (used != item.size()) throw std::runtime_error("bad number '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw std::runtime_error("empty number list");
    return out;
}

struct LoadedModel {
    RunConfig cfg;
    SceneModel model;
};

LoadedModel model_from_checkpoint(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    LoadedModel lm;
    lm.cfg = config_from_json_text(ck.config_text);
    lm.model.density_kind = density_kind_from_string(lm.cfg.model.density);
    lm.model.build(lm.cfg.model.udf, lm.cfg.model.color, lm.cfg.model.r_init,
                   lm.cfg.model.r_rate, lm.cfg.seed);
    if (lm.model.store.size() != ck.params.size())
        throw std::runtime_error("checkpoint holds " + std::to_string(ck.params.size()) +
                                 " parameters but the embedded config builds " +
                                 std::to_string(lm.model.store.size()));
    lm.model.store.values() = ck.params;
    lm.model.refresh();
    return lm;
}

Camera orbit_camera(int res) {
    SynthConfig sc;
    sc.width = sc.height = res;
    sc.focal_px = 1.1 * res;
    sc.views = 1;
    return make_orbit_cameras(sc).cameras.at(0);
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    std::string config_path;
    std::string out_dir;
    std::string dataset_dir;  // overrides config when set
    int64_t seed = -1;        // overrides config when >= 0
    int iterations = -1;      // overrides config when >= 0
};

void run_train(const TrainArgs& args) {
    RunConfig cfg;
    if (!args.config_path.empty()) cfg = load_config(args.config_path);
    if (!args.dataset_dir.empty()) cfg.data.dataset_dir = args.dataset_dir;
    if (args.seed >= 0) cfg.seed = uint64_t(args.seed);
    if (args.iterations >= 0) cfg.train.iterations = args.iterations;
    if (cfg.data.dataset_dir.empty())
        throw std::runtime_error("train needs data.dataset_dir (or --dataset-dir)");

    Dataset ds = load_dataset(cfg.data.dataset_dir);
    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);
    const std::string cfg_text = config_to_json_text(cfg);
    write_text_file(out / "config.json", cfg_text + "\n");

    TrainState st;
    st.model.density_kind = density_kind_from_string(cfg.model.density);
    st.model.build(cfg.model.udf, cfg.model.color, cfg.model.r_init, cfg.model.r_rate, cfg.seed);
    st.adam = Adam(st.model.store.size());

    const auto wall0 = std::chrono::steady_clock::now();
    if (cfg.train.warm_start_iters > 0) {
        Adam warm(st.model.store.size());
        warm_start_sphere(st.model, warm, cfg.train.warm_start_radius, cfg.data.scene_radius,
                          cfg.train.warm_start_iters, cfg.train.warm_start_batch,
                          cfg.train.warm_start_lr, derive_seed(cfg.seed, 0x5EED0));
        st.adam = Adam(st.model.store.size());  // optimizer state restarts with rendering
    }

    std::vector<std::array<int, 3>> pool;  // view, x, y
    for (int v = 0; v < ds.count(); ++v) {
        const Camera& cam = ds.cams.cameras[size_t(v)];
        for (int y = 0; y < cam.height; ++y)
            for (int x = 0; x < cam.width; ++x) pool.push_back({v, x, y});
    }
    std::mt19937_64 pick(derive_seed(cfg.seed, 0xBA7C4));
    std::uniform_int_distribution<size_t> pix(0, pool.size() - 1);

    const fs::path metrics_path = out / "metrics.ndjson";
    track(metrics_path);
    std::ofstream metrics(metrics_path);
    if (!metrics) throw std::runtime_error("cannot write " + metrics_path.string());

    const int total = cfg.train.iterations;
    // metrics lines report means since the previous line; single batches of a
    // few rays are too noisy to read a trend from
    double sum_total = 0, sum_color = 0, sum_eik = 0, sum_mask = 0, sum_acc = 0;
    int win = 0;
    for (int it = 0; it < total; ++it) {
        std::vector<RayBatchEntry> rays;
        rays.reserve(size_t(cfg.train.rays_per_batch));
        int guard = 0;
        while (int(rays.size()) < cfg.train.rays_per_batch &&
               guard++ < 64 * cfg.train.rays_per_batch) {
            const auto& pr = pool[pix(pick)];
            auto entry = make_ray_entry(ds, pr[0], pr[1], pr[2], cfg.data.scene_radius);
            if (entry) rays.push_back(*entry);
        }
        if (rays.empty()) throw std::runtime_error("no rays intersect the scene sphere");

        const double lr = lr_schedule(st.iter, total, cfg.train.warmup_iters, cfg.train.lr_peak,
                                      cfg.train.lr_final, cfg.train.lr_floor);
        SamplerConfig sampler = cfg.sampler;
        sampler.s0 = annealed_s0(cfg.sampler, cfg.train, st.iter);
        BatchLossStats stats = train_step(st, rays, sampler, cfg.train.loss,
                                          cfg.train.normals, lr,
                                          derive_seed(cfg.seed, 0x517E9 + uint64_t(it)),
                                          cfg.data.background, cfg.train.eik_global,
                                          cfg.data.scene_radius);
        sum_total += stats.total;
        sum_color += stats.color;
        sum_eik += stats.eikonal;
        sum_mask += stats.mask;
        sum_acc += stats.acc_mean;
        ++win;

        if ((cfg.train.log_every > 0 && st.iter % cfg.train.log_every == 0) ||
            st.iter == total) {
            nlohmann::json line{{"iter", st.iter},         {"loss", sum_total / win},
                                {"color", sum_color / win}, {"eikonal", sum_eik / win},
                                {"mask", sum_mask / win},   {"acc", sum_acc / win},
                                {"r", st.model.family().r}, {"s", sampler.s0}, {"lr", lr}};
            metrics << line.dump() << "\n";
            metrics.flush();
            sum_total = sum_color = sum_eik = sum_mask = sum_acc = 0;
            win = 0;
        }
        if (cfg.train.checkpoint_every > 0 && st.iter % cfg.train.checkpoint_every == 0 &&
            st.iter < total) {
            char name[32];
            std::snprintf(name, sizeof(name), "ckpt_%06lld.bin", (long long)st.iter);
            Checkpoint ck{cfg_text, st.iter, st.adam.steps(), st.model.store.values(),
                          st.adam.m(), st.adam.v()};
            save_checkpoint_tracked(out / name, ck);
        }
    }
    Checkpoint ck{cfg_text, st.iter, st.adam.steps(), st.model.store.values(), st.adam.m(),
                  st.adam.v()};
    save_checkpoint_tracked(out / "final.bin", ck);

    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    nlohmann::json summary{{"iterations", st.iter},
                           {"elapsed_s", secs},
                           {"final_r", st.model.family().r}};
    write_text_file(out / "summary.json", summary.dump(2) + "\n");
    std::cout << "trained " << st.iter << " iterations in " << secs << " s\n";
}

// ---------------------------------------------------------------- render

struct RenderArgs {
    std::string checkpoint;
    std::string scene;
    std::string cameras;
    std::string out_path;
    int view = 0;
    int res = 100;
    int analytic_samples = 256;
    double analytic_r = 1e4;
    std::string family = "rational";
    int64_t seed = 0;
};

void run_render(const RenderArgs& args) {
    if (args.checkpoint.empty() == args.scene.empty())
        throw std::runtime_error("render needs exactly one of --checkpoint or --scene");

    Camera cam = orbit_camera(args.res);
    if (!args.cameras.empty()) {
        CameraSet set = load_cameras_json(args.cameras);
        if (args.view < 0 || size_t(args.view) >= set.cameras.size())
            throw std::runtime_error("--view out of range, file has " +
                                     std::to_string(set.cameras.size()) + " cameras");
        cam = set.cameras[size_t(args.view)];
    }

    VolumeRenderOptions opts;
    opts.seed = uint64_t(args.seed);
    opts.analytic_samples = args.analytic_samples;
    opts.analytic_r = args.analytic_r;
    opts.analytic_kind = density_kind_from_string(args.family);

    Image img;
    if (!args.checkpoint.empty()) {
        LoadedModel lm = model_from_checkpoint(args.checkpoint);
        opts.sampler = lm.cfg.sampler;
        opts.sampler.s0 = annealed_s0(lm.cfg.sampler, lm.cfg.train, lm.cfg.train.iterations);
        opts.normals = lm.cfg.train.normals;
        opts.scene_radius = lm.cfg.data.scene_radius;
        opts.background = lm.cfg.data.background;
        img = render_model_view(lm.model, cam, opts);
    } else {
        AnalyticScene scene = load_scene_arg(args.scene);
        img = render_analytic_volume_view(scene, cam, opts);
    }
    save_png_tracked(args.out_path, img);
    std::cout << "wrote " << args.out_path << "\n";
}

// ---------------------------------------------------------------- verify-bias

struct BiasArgs {
    std::string scene = "two-disks";
    double s = 1e4;
    int samples = 16384;
    std::string rs = "10,100,1000,10000";
    double delta = 0.01;
    std::string family = "rational";
    std::string json_path;
};

void run_verify_bias(const BiasArgs& args) {
    AnalyticScene scene = load_scene_arg(args.scene);
    Ray ray{Vec3(0, 0, -0.8), Vec3(0, 0, 1)};
    BiasStudy study = run_bias_study(scene, ray, 0.0, 2.0, args.samples,
                                     parse_double_list(args.rs),
                                     density_kind_from_string(args.family), args.s, args.delta);
    std::cout << bias_study_text(study);
    if (!args.json_path.empty()) write_text_file(args.json_path, bias_study_json(study) + "\n");
}

// ---------------------------------------------------------------- extract

struct ExtractArgs {
    std::string checkpoint;
    std::string scene;
    std::string out_path;
    int grid = 96;
    double eps = 1e-3;
    double domain = 1.0;
};

void run_extract(const ExtractArgs& args) {
    if (args.checkpoint.empty() == args.scene.empty())
        throw std::runtime_error("extract needs exactly one of --checkpoint or --scene");
    ExtractionConfig cfg;
    cfg.grid = args.grid;
    cfg.eps = args.eps;
    cfg.domain = args.domain;

    std::vector<Vec3> pts;
    if (!args.checkpoint.empty()) {
        LoadedModel lm = model_from_checkpoint(args.checkpoint);
        NeuralDistanceField field(lm.model.udf);
        pts = extract_zero_set(field, cfg);
    } else {
        AnalyticScene scene = load_scene_arg(args.scene);
        pts = extract_zero_set(scene, cfg);
    }
    save_ply_tracked(args.out_path, pts);
    std::cout << "wrote " << pts.size() << " points to " << args.out_path << "\n";
}

// ---------------------------------------------------------------- chamfer

struct ChamferArgs {
    std::string a;
    std::string b;
    std::string scene;
    int samples = 100000;
    int64_t seed = 1;
    bool normalize = false;
};

void run_chamfer(const ChamferArgs& args) {
    if (args.b.empty() == args.scene.empty())
        throw std::runtime_error("chamfer needs a second cloud: B.ply or --scene");
    std::vector<Vec3> a = load_ply(args.a);
    std::vector<Vec3> b = args.b.empty()
                              ? sample_surface(load_scene_arg(args.scene), args.samples,
                                               uint64_t(args.seed))
                              : load_ply(args.b);
    if (args.normalize) {
        normalize_points_unit(a);
        normalize_points_unit(b);
    }
    std::ostringstream os;
    os.precision(9);
    os << chamfer_sq(a, b);
    std::cout << os.str() << "\n";
}

// ---------------------------------------------------------------- synth-views

struct SynthArgs {
    std::string scene = "disk";
    std::string out_dir;
    int views = 20;
    int res = 64;
    double orbit_radius = 2.0;
    double orbit_height = 0.9;
};

void run_synth_views(const SynthArgs& args) {
    AnalyticScene scene = load_scene_arg(args.scene);
    SynthConfig sc;
    sc.views = args.views;
    sc.width = sc.height = args.res;
    sc.focal_px = 1.1 * args.res;
    sc.orbit_radius = args.orbit_radius;
    sc.orbit_height = args.orbit_height;

    const fs::path dir(args.out_dir);
    track(dir / "cameras.json");
    for (int i = 0; i < args.views; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "view_%03d.png", i);
        track(dir / name);
    }
    write_synth_dataset(scene, sc, args.out_dir);
    std::cout << "wrote " << args.views << " views to " << args.out_dir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"unsigned-distance volume rendering toolkit"};
    app.require_subcommand(1);

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "optimize a model on a posed image set");
    train->add_option("--config", train_args.config_path, "run configuration JSON");
    train->add_option("--out", train_args.out_dir, "output directory")->required();
    train->add_option("--dataset-dir", train_args.dataset_dir, "override data.dataset_dir");
    train->add_option("--seed", train_args.seed, "override the run seed");
    train->add_option("--iterations", train_args.iterations, "override train.iterations");
    train->callback([&] { run_train(train_args); });

    RenderArgs render_args;
    CLI::App* render = app.add_subcommand("render", "volume-render a checkpoint or analytic scene");
    render->add_option("--checkpoint", render_args.checkpoint, "trained model checkpoint");
    render->add_option("--scene", render_args.scene, "built-in scene name or scene JSON");
    render->add_option("--cameras", render_args.cameras, "cameras JSON file");
    render->add_option("--view", render_args.view, "camera index in --cameras");
    render->add_option("--res", render_args.res, "image size for the default orbit camera");
    render->add_option("--out", render_args.out_path, "output PNG")->required();
    render->add_option("--samples", render_args.analytic_samples, "samples per ray (analytic)");
    render->add_option("--r", render_args.analytic_r, "density sharpness (analytic)");
    render->add_option("--family", render_args.family, "density family (analytic)");
    render->add_option("--seed", render_args.seed, "sampling seed");
    render->callback([&] { run_render(render_args); });

    BiasArgs bias_args;
    CLI::App* bias = app.add_subcommand("verify-bias", "two-surface weight-mass study");
    bias->add_option("--scene", bias_args.scene, "built-in scene name or scene JSON");
    bias->add_option("--s", bias_args.s, "comparator sharpness");
    bias->add_option("--samples", bias_args.samples, "samples along the ray");
    bias->add_option("--rs", bias_args.rs, "comma-separated sharpness sweep");
    bias->add_option("--delta", bias_args.delta, "half-width of the near-surface window");
    bias->add_option("--family", bias_args.family, "density family");
    bias->add_option("--json", bias_args.json_path, "also write the report as JSON");
    bias->callback([&] { run_verify_bias(bias_args); });

    ExtractArgs extract_args;
    CLI::App* extract = app.add_subcommand("extract", "export zero-level-set points as PLY");
    extract->add_option("--checkpoint", extract_args.checkpoint, "trained model checkpoint");
    extract->add_option("--scene", extract_args.scene, "built-in scene name or scene JSON");
    extract->add_option("--out", extract_args.out_path, "output PLY")->required();
    extract->add_option("--grid", extract_args.grid, "seed grid resolution");
    extract->add_option("--eps", extract_args.eps, "residual threshold");
    extract->add_option("--domain", extract_args.domain, "half-extent of the seed grid");
    extract->callback([&] { run_extract(extract_args); });

    ChamferArgs chamfer_args;
    CLI::App* chamfer = app.add_subcommand("chamfer", "symmetric mean squared nearest-neighbor distance");
    chamfer->add_option("a", chamfer_args.a, "first point cloud (PLY)")->required();
    chamfer->add_option("b", chamfer_args.b, "second point cloud (PLY)");
    chamfer->add_option("--scene", chamfer_args.scene, "compare against surface samples of a scene");
    chamfer->add_option("--samples", chamfer_args.samples, "surface sample count for --scene");
    chamfer->add_option("--seed", chamfer_args.seed, "surface sampling seed");
    chamfer->add_flag("--normalize", chamfer_args.normalize, "center and scale each cloud to the unit sphere");
    chamfer->callback([&] { run_chamfer(chamfer_args); });

    SynthArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth-views", "render reference views of an analytic scene");
    synth->add_option("--scene", synth_args.scene, "built-in scene name or scene JSON");
    synth->add_option("--out", synth_args.out_dir, "output directory")->required();
    synth->add_option("--views", synth_args.views, "camera count on the orbit");
    synth->add_option("--res", synth_args.res, "square image size");
    synth->add_option("--orbit-radius", synth_args.orbit_radius, "camera distance from the z axis");
    synth->add_option("--orbit-height", synth_args.orbit_height, "camera height");
    synth->callback([&] { run_synth_views(synth_args); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        remove_created();
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
