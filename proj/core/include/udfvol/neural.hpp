#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "udfvol/fields.hpp"

namespace udfvol {

// Frequency encoding [x, sin(2^l pi x), cos(2^l pi x)], l = 0..levels-1,
// applied per axis; output dimension 3 + 6 * levels.
int encoding_dim(int levels);
void positional_encode(const Vec3& x, int levels, double* out);

// Flat parameter/gradient storage shared by all trainable tensors.
class ParamStore {
public:
    struct Block {
        std::string name;
        Eigen::Index rows = 0, cols = 0, offset = 0;
    };

    int add(const std::string& name, Eigen::Index rows, Eigen::Index cols);
    void finalize();

    Eigen::Map<Eigen::MatrixXd> value(int block);
    Eigen::Map<const Eigen::MatrixXd> value(int block) const;
    Eigen::Map<Eigen::MatrixXd> grad(int block);

    Eigen::VectorXd& values() { return values_; }
    const Eigen::VectorXd& values() const { return values_; }
    Eigen::VectorXd& grads() { return grads_; }
    const Eigen::VectorXd& grads() const { return grads_; }
    void zero_grads() { grads_.setZero(); }

    const std::vector<Block>& blocks() const { return blocks_; }
    Eigen::Index size() const { return total_; }
    bool finalized() const { return finalized_; }

private:
    std::vector<Block> blocks_;
    Eigen::Index total_ = 0;
    bool finalized_ = false;
    Eigen::VectorXd values_, grads_;
};

// Weight-normalized linear layer: W_i = g_i * V_i / |V_i| per output row.
struct WnLinear {
    int v_blk = -1, g_blk = -1, b_blk = -1;
    int in = 0, out = 0;

    void init(ParamStore& store, const std::string& name, int in_dim, int out_dim);
    void init_params(ParamStore& store, std::mt19937_64& rng) const;
    // Materialize W and b from the store (call after every parameter update).
    void refresh(const ParamStore& store, Eigen::MatrixXd& W, Eigen::VectorXd& b) const;
    // Convert accumulated dL/dW, dL/db into gradients of (V, g, b).
    void scatter_grads(ParamStore& store, const Eigen::MatrixXd& dW,
                       const Eigen::VectorXd& db) const;
};

struct UdfNetConfig {
    int hidden_layers = 4;
    int width = 64;
    int enc_levels = 6;
    int feature_dim = 64;
    double beta = 100.0;  // softplus sharpness, hidden and distance head
    int skip_layer = -2;  // hidden layer fed the encoding again; -2 = hidden_layers/2, -1 = none

    int resolved_skip() const { return skip_layer == -2 ? hidden_layers / 2 : skip_layer; }
};

// Distance network. The forward pass carries first-order jets (value plus the
// three spatial tangents), so spatial gradients come out of the same pass and
// the backward pass yields exact parameter gradients of any loss that uses
// them (Eikonal terms, normal inputs to the color head).
class UdfNetwork {
public:
    struct Tape {
        Eigen::Index n = 0;
        Eigen::MatrixXd enc_v;
        std::array<Eigen::MatrixXd, 3> enc_t;
        std::vector<Eigen::MatrixXd> in_v;   // per stage, input activations
        std::vector<std::array<Eigen::MatrixXd, 3>> in_t;
        std::vector<Eigen::MatrixXd> z_v;    // per stage, pre-activations
        std::vector<std::array<Eigen::MatrixXd, 3>> z_t;
        Eigen::VectorXd dist;                // n
        Eigen::Matrix3Xd grad;               // 3 x n spatial gradient of dist
        Eigen::MatrixXd feat;                // feature_dim x n
    };

    UdfNetwork() = default;
    UdfNetwork(const UdfNetConfig& cfg, ParamStore& store);

    void init_params(ParamStore& store, std::mt19937_64& rng) const;
    void refresh(const ParamStore& store);

    void forward(const Eigen::Matrix3Xd& pts, Tape& tape) const;
    void forward_dist(const Eigen::Matrix3Xd& pts, Eigen::VectorXd& dist) const;

    // Adjoints: dbar (n), gbar (3 x n), fbar (feature_dim x n).
    void backward(const Tape& tape, const Eigen::VectorXd& dbar, const Eigen::Matrix3Xd& gbar,
                  const Eigen::MatrixXd& fbar, ParamStore& store) const;

    const UdfNetConfig& config() const { return cfg_; }

private:
    UdfNetConfig cfg_;
    std::vector<WnLinear> layers_;  // hidden stages then head (1+feature_dim outputs)
    std::vector<Eigen::MatrixXd> W_;
    std::vector<Eigen::VectorXd> b_;
    int skip_ = -1;
};

struct ColorNetConfig {
    int hidden_layers = 4;
    int width = 64;
    int view_levels = 4;
    int feature_dim = 64;  // must match UdfNetConfig::feature_dim
    double beta = 100.0;
};

// Radiance head: inputs (x, encoded view, normal, feature), sigmoid output.
class ColorNetwork {
public:
    struct Tape {
        Eigen::Index n = 0;
        std::vector<Eigen::MatrixXd> in;  // per stage inputs
        std::vector<Eigen::MatrixXd> z;   // per stage pre-activations
        Eigen::Matrix3Xd rgb;             // 3 x n, after sigmoid
    };

    ColorNetwork() = default;
    ColorNetwork(const ColorNetConfig& cfg, ParamStore& store);

    void init_params(ParamStore& store, std::mt19937_64& rng) const;
    void refresh(const ParamStore& store);

    void forward(const Eigen::Matrix3Xd& pts, const Eigen::Matrix3Xd& views,
                 const Eigen::Matrix3Xd& normals, const Eigen::MatrixXd& feats, Tape& tape) const;

    // cbar: 3 x n adjoint of rgb. Returns adjoints of the normal and feature
    // inputs (position and view inputs are detached constants).
    void backward(const Tape& tape, const Eigen::Matrix3Xd& cbar, Eigen::Matrix3Xd& nbar,
                  Eigen::MatrixXd& fbar, ParamStore& store) const;

    const ColorNetConfig& config() const { return cfg_; }

private:
    ColorNetConfig cfg_;
    std::vector<WnLinear> layers_;
    std::vector<Eigen::MatrixXd> W_;
    std::vector<Eigen::VectorXd> b_;
};

struct AdamConfig {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

class Adam {
public:
    Adam() = default;
    explicit Adam(Eigen::Index n, const AdamConfig& cfg = {});

    // Returns false (and leaves parameters untouched) on non-finite gradients.
    bool step(Eigen::VectorXd& values, const Eigen::VectorXd& grads, double lr);

    int64_t steps() const { return t_; }
    Eigen::VectorXd& m() { return m_; }
    Eigen::VectorXd& v() { return v_; }
    void set_steps(int64_t t) { t_ = t; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    Eigen::VectorXd m_, v_;
    int64_t t_ = 0;
};

// Strictly positive learnable sharpness r = exp(rate * rho).
struct DensityParamHandle {
    int rho_blk = -1;
    double rate = 10.0;

    void init(ParamStore& store, double rate_in);
    // Call after ParamStore::finalize(); writes rho = ln(r) / rate.
    void set_r(ParamStore& store, double r_value) const;
    double r(const ParamStore& store) const;
    void accumulate_r_grad(ParamStore& store, double rbar) const;
};

// DistanceField view over a trained network (single-point queries).
class NeuralDistanceField : public DistanceField {
public:
    NeuralDistanceField(const UdfNetwork& net) : net_(net) {}
    FieldSample eval(const Vec3& p) const override;
    void eval_dist(const std::vector<Vec3>& pts, std::vector<double>& out) const override;
    void eval_batch(const std::vector<Vec3>& pts, std::vector<FieldSample>& out) const override;

private:
    const UdfNetwork& net_;
};

double softplus(double x, double beta);
double softplus_derivative(double x, double beta);  // = sigmoid(beta * x)

}  // namespace udfvol
