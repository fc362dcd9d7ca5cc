#include "udfvol/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "json_util.hpp"

namespace udfvol {

namespace {

using nlohmann::json;

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void parse_data(const json& j, DataConfig& d) {
    detail::require_object(j, "data");
    detail::require_keys(j, "data", {"scene", "dataset_dir", "scene_radius", "background"});
    maybe(j, "scene", d.scene);
    maybe(j, "dataset_dir", d.dataset_dir);
    maybe(j, "scene_radius", d.scene_radius);
    if (j.contains("background")) d.background = detail::parse_vec3(j.at("background"), "data.background");
}

void parse_udf(const json& j, UdfNetConfig& u) {
    detail::require_object(j, "model.udf");
    detail::require_keys(j, "model.udf",
                         {"hidden_layers", "width", "enc_levels", "feature_dim", "beta",
                          "skip_layer"});
    maybe(j, "hidden_layers", u.hidden_layers);
    maybe(j, "width", u.width);
    maybe(j, "enc_levels", u.enc_levels);
    maybe(j, "feature_dim", u.feature_dim);
    maybe(j, "beta", u.beta);
    maybe(j, "skip_layer", u.skip_layer);
}

void parse_color(const json& j, ColorNetConfig& c) {
    detail::require_object(j, "model.color");
    detail::require_keys(j, "model.color",
                         {"hidden_layers", "width", "view_levels", "feature_dim", "beta"});
    maybe(j, "hidden_layers", c.hidden_layers);
    maybe(j, "width", c.width);
    maybe(j, "view_levels", c.view_levels);
    maybe(j, "feature_dim", c.feature_dim);
    maybe(j, "beta", c.beta);
}

void parse_model(const json& j, ModelConfig& m) {
    detail::require_object(j, "model");
    detail::require_keys(j, "model", {"udf", "color", "density", "r_init", "r_rate"});
    if (j.contains("udf")) parse_udf(j.at("udf"), m.udf);
    if (j.contains("color")) parse_color(j.at("color"), m.color);
    maybe(j, "density", m.density);
    maybe(j, "r_init", m.r_init);
    maybe(j, "r_rate", m.r_rate);
    density_kind_from_string(m.density);  // validates the name
}

void parse_sampler(const json& j, SamplerConfig& s) {
    detail::require_object(j, "sampler");
    detail::require_keys(j, "sampler",
                         {"coarse", "rounds", "per_round", "s0", "round_rate", "jitter_coarse"});
    maybe(j, "coarse", s.coarse);
    maybe(j, "rounds", s.rounds);
    maybe(j, "per_round", s.per_round);
    maybe(j, "s0", s.s0);
    maybe(j, "round_rate", s.round_rate);
    maybe(j, "jitter_coarse", s.jitter_coarse);
}

void parse_loss(const json& j, LossWeights& w) {
    detail::require_object(j, "train.loss");
    detail::require_keys(j, "train.loss", {"color", "eikonal", "mask"});
    maybe(j, "color", w.color);
    maybe(j, "eikonal", w.eikonal);
    maybe(j, "mask", w.mask);
}

void parse_normals(const json& j, NormalRegConfig& n) {
    detail::require_object(j, "train.normals");
    detail::require_keys(j, "train.normals", {"neighbors", "inverse_weights"});
    maybe(j, "neighbors", n.neighbors);
    maybe(j, "inverse_weights", n.inverse_weights);
}

void parse_train(const json& j, TrainConfig& t) {
    detail::require_object(j, "train");
    detail::require_keys(j, "train",
                         {"iterations", "rays_per_batch", "warmup_iters", "lr_peak", "lr_final",
                          "lr_floor", "warm_start_iters", "warm_start_batch",
                          "warm_start_radius", "warm_start_lr", "log_every", "checkpoint_every",
                          "s0_double_every", "s0_cap", "eik_global", "loss", "normals"});
    maybe(j, "iterations", t.iterations);
    maybe(j, "rays_per_batch", t.rays_per_batch);
    maybe(j, "warmup_iters", t.warmup_iters);
    maybe(j, "lr_peak", t.lr_peak);
    maybe(j, "lr_final", t.lr_final);
    maybe(j, "lr_floor", t.lr_floor);
    maybe(j, "warm_start_iters", t.warm_start_iters);
    maybe(j, "warm_start_batch", t.warm_start_batch);
    maybe(j, "warm_start_radius", t.warm_start_radius);
    maybe(j, "warm_start_lr", t.warm_start_lr);
    maybe(j, "log_every", t.log_every);
    maybe(j, "checkpoint_every", t.checkpoint_every);
    maybe(j, "s0_double_every", t.s0_double_every);
    maybe(j, "s0_cap", t.s0_cap);
    maybe(j, "eik_global", t.eik_global);
    if (j.contains("loss")) parse_loss(j.at("loss"), t.loss);
    if (j.contains("normals")) parse_normals(j.at("normals"), t.normals);
}

}  // namespace

double annealed_s0(const SamplerConfig& sampler, const TrainConfig& train, int64_t iter) {
    if (train.s0_double_every <= 0.0) return sampler.s0;
    double s = sampler.s0 * std::pow(2.0, double(iter) / train.s0_double_every);
    return std::min(s, train.s0_cap);
}

RunConfig config_from_json_text(const std::string& text) {
    json j = json::parse(text);
    detail::require_object(j, "config");
    detail::require_keys(j, "config", {"seed", "data", "model", "sampler", "train"});
    RunConfig cfg;
    maybe(j, "seed", cfg.seed);
    if (j.contains("data")) parse_data(j.at("data"), cfg.data);
    if (j.contains("model")) parse_model(j.at("model"), cfg.model);
    if (j.contains("sampler")) parse_sampler(j.at("sampler"), cfg.sampler);
    if (j.contains("train")) parse_train(j.at("train"), cfg.train);
    return cfg;
}

std::string config_to_json_text(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["data"] = {{"scene", cfg.data.scene},
                 {"dataset_dir", cfg.data.dataset_dir},
                 {"scene_radius", cfg.data.scene_radius},
                 {"background",
                  {cfg.data.background.x(), cfg.data.background.y(), cfg.data.background.z()}}};
    j["model"] = {{"udf",
                   {{"hidden_layers", cfg.model.udf.hidden_layers},
                    {"width", cfg.model.udf.width},
                    {"enc_levels", cfg.model.udf.enc_levels},
                    {"feature_dim", cfg.model.udf.feature_dim},
                    {"beta", cfg.model.udf.beta},
                    {"skip_layer", cfg.model.udf.skip_layer}}},
                  {"color",
                   {{"hidden_layers", cfg.model.color.hidden_layers},
                    {"width", cfg.model.color.width},
                    {"view_levels", cfg.model.color.view_levels},
                    {"feature_dim", cfg.model.color.feature_dim},
                    {"beta", cfg.model.color.beta}}},
                  {"density", cfg.model.density},
                  {"r_init", cfg.model.r_init},
                  {"r_rate", cfg.model.r_rate}};
    j["sampler"] = {{"coarse", cfg.sampler.coarse},
                    {"rounds", cfg.sampler.rounds},
                    {"per_round", cfg.sampler.per_round},
                    {"s0", cfg.sampler.s0},
                    {"round_rate", cfg.sampler.round_rate},
                    {"jitter_coarse", cfg.sampler.jitter_coarse}};
    j["train"] = {{"iterations", cfg.train.iterations},
                  {"rays_per_batch", cfg.train.rays_per_batch},
                  {"warmup_iters", cfg.train.warmup_iters},
                  {"lr_peak", cfg.train.lr_peak},
                  {"lr_final", cfg.train.lr_final},
                  {"lr_floor", cfg.train.lr_floor},
                  {"warm_start_iters", cfg.train.warm_start_iters},
                  {"warm_start_batch", cfg.train.warm_start_batch},
                  {"warm_start_radius", cfg.train.warm_start_radius},
                  {"warm_start_lr", cfg.train.warm_start_lr},
                  {"log_every", cfg.train.log_every},
                  {"checkpoint_every", cfg.train.checkpoint_every},
                  {"s0_double_every", cfg.train.s0_double_every},
                  {"s0_cap", cfg.train.s0_cap},
                  {"eik_global", cfg.train.eik_global},
                  {"loss",
                   {{"color", cfg.train.loss.color},
                    {"eikonal", cfg.train.loss.eikonal},
                    {"mask", cfg.train.loss.mask}}},
                  {"normals",
                   {{"neighbors", cfg.train.normals.neighbors},
                    {"inverse_weights", cfg.train.normals.inverse_weights}}}};
    return j.dump(2);
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json_text(ss.str());
}

void save_config(const std::string& path, const RunConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write config: " + path);
    out << config_to_json_text(cfg) << "\n";
}

}  // namespace udfvol
