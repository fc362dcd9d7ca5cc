#include "udfvol/neural.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace udfvol {

namespace {

const double kPi = 3.14159265358979323846;

// softplus_beta(x) = log(1 + exp(beta x)) / beta, branch-free stable form
inline Eigen::MatrixXd softplus_mat(const Eigen::MatrixXd& z, double beta) {
    return z.cwiseMax(0.0) + ((-beta * z.array().abs()).exp().log1p() / beta).matrix();
}

inline Eigen::MatrixXd sigmoid_mat(const Eigen::MatrixXd& z, double beta) {
    return (0.5 * ((0.5 * beta * z.array()).tanh() + 1.0)).matrix();
}

}  // namespace

double softplus(double x, double beta) {
    double bx = beta * x;
    if (bx > 0.0) return x + std::log1p(std::exp(-bx)) / beta;
    return std::log1p(std::exp(bx)) / beta;
}

double softplus_derivative(double x, double beta) {
    return 0.5 * (std::tanh(0.5 * beta * x) + 1.0);
}

int encoding_dim(int levels) { return 3 + 6 * levels; }

void positional_encode(const Vec3& x, int levels, double* out) {
    out[0] = x.x();
    out[1] = x.y();
    out[2] = x.z();
    for (int l = 0; l < levels; ++l) {
        double freq = std::ldexp(kPi, l);  // 2^l * pi
        for (int a = 0; a < 3; ++a) {
            out[3 + 6 * l + a] = std::sin(freq * x[a]);
            out[3 + 6 * l + 3 + a] = std::cos(freq * x[a]);
        }
    }
}

int ParamStore::add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    if (finalized_) throw std::logic_error("ParamStore: add after finalize");
    Block b;
    b.name = name;
    b.rows = rows;
    b.cols = cols;
    b.offset = total_;
    total_ += rows * cols;
    blocks_.push_back(b);
    return int(blocks_.size()) - 1;
}

void ParamStore::finalize() {
    values_ = Eigen::VectorXd::Zero(total_);
    grads_ = Eigen::VectorXd::Zero(total_);
    finalized_ = true;
}

Eigen::Map<Eigen::MatrixXd> ParamStore::value(int block) {
    const Block& b = blocks_.at(block);
    return {values_.data() + b.offset, b.rows, b.cols};
}

Eigen::Map<const Eigen::MatrixXd> ParamStore::value(int block) const {
    const Block& b = blocks_.at(block);
    return {values_.data() + b.offset, b.rows, b.cols};
}

Eigen::Map<Eigen::MatrixXd> ParamStore::grad(int block) {
    const Block& b = blocks_.at(block);
    return {grads_.data() + b.offset, b.rows, b.cols};
}

void WnLinear::init(ParamStore& store, const std::string& name, int in_dim, int out_dim) {
    in = in_dim;
    out = out_dim;
    v_blk = store.add(name + ".V", out, in);
    g_blk = store.add(name + ".g", out, 1);
    b_blk = store.add(name + ".b", out, 1);
}

void WnLinear::init_params(ParamStore& store, std::mt19937_64& rng) const {
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(double(in)));
    auto V = store.value(v_blk);
    for (Eigen::Index c = 0; c < V.cols(); ++c)
        for (Eigen::Index r = 0; r < V.rows(); ++r) V(r, c) = dist(rng);
    store.value(g_blk).col(0) = V.rowwise().norm();  // W == V at initialization
    store.value(b_blk).setZero();
}

void WnLinear::refresh(const ParamStore& store, Eigen::MatrixXd& W, Eigen::VectorXd& b) const {
    auto V = store.value(v_blk);
    Eigen::VectorXd g = store.value(g_blk).col(0);
    Eigen::VectorXd inv_norm = V.rowwise().norm().cwiseInverse();
    W = (V.array().colwise() * (g.array() * inv_norm.array())).matrix();
    b = store.value(b_blk).col(0);
}

void WnLinear::scatter_grads(ParamStore& store, const Eigen::MatrixXd& dW,
                             const Eigen::VectorXd& db) const {
    auto V = store.value(v_blk);
    Eigen::ArrayXd g = store.value(g_blk).col(0).array();
    Eigen::ArrayXd inv_norm = V.rowwise().norm().cwiseInverse().array();
    // s_i = dW_i . V_i / |V_i| is both dL/dg_i and the radial component of dW_i
    Eigen::ArrayXd s = (dW.array() * V.array()).rowwise().sum() * inv_norm;
    store.grad(g_blk).col(0) += s.matrix();
    Eigen::ArrayXd scale = g * inv_norm;
    store.grad(v_blk) += (dW.array().colwise() * scale -
                          V.array().colwise() * (scale * s * inv_norm))
                             .matrix();
    store.grad(b_blk).col(0) += db;
}

UdfNetwork::UdfNetwork(const UdfNetConfig& cfg, ParamStore& store) : cfg_(cfg) {
    int H = cfg_.hidden_layers;
    if (H < 1) throw std::invalid_argument("UdfNetwork: need at least one hidden layer");
    skip_ = cfg_.resolved_skip();
    if (skip_ == 0 || skip_ >= H) skip_ = -1;
    int E = encoding_dim(cfg_.enc_levels);
    layers_.resize(H + 1);
    for (int s = 0; s < H; ++s) {
        int in_dim = (s == 0) ? E : cfg_.width;
        if (s == skip_) in_dim = cfg_.width + E;
        layers_[s].init(store, "udf.l" + std::to_string(s), in_dim, cfg_.width);
    }
    layers_[H].init(store, "udf.head", cfg_.width, 1 + cfg_.feature_dim);
    W_.resize(H + 1);
    b_.resize(H + 1);
}

void UdfNetwork::init_params(ParamStore& store, std::mt19937_64& rng) const {
    for (const WnLinear& l : layers_) l.init_params(store, rng);
    // Start the distance row of the head with a gentle slope and a positive
    // offset. A zero-mean init leaves half the domain in the flat tail of the
    // sharp softplus, where the output is pinned at zero and no gradient can
    // ever pull it back; a field that starts alive everywhere can be shaped.
    const WnLinear& head = layers_.back();
    store.value(head.g_blk)(0, 0) *= 0.1;
    store.value(head.b_blk)(0, 0) = 0.3;
}

void UdfNetwork::refresh(const ParamStore& store) {
    for (size_t s = 0; s < layers_.size(); ++s) layers_[s].refresh(store, W_[s], b_[s]);
}

void UdfNetwork::forward(const Eigen::Matrix3Xd& pts, Tape& t) const {
    Eigen::Index n = pts.cols();
    int H = cfg_.hidden_layers;
    int E = encoding_dim(cfg_.enc_levels);
    t.n = n;
    t.enc_v.resize(E, n);
    for (int k = 0; k < 3; ++k) t.enc_t[k].setZero(E, n);
    for (int a = 0; a < 3; ++a) {
        t.enc_v.row(a) = pts.row(a);
        t.enc_t[a].row(a).setOnes();
        for (int l = 0; l < cfg_.enc_levels; ++l) {
            double freq = std::ldexp(kPi, l);
            Eigen::ArrayXd arg = freq * pts.row(a).transpose().array();
            t.enc_v.row(3 + 6 * l + a) = arg.sin().matrix().transpose();
            t.enc_v.row(3 + 6 * l + 3 + a) = arg.cos().matrix().transpose();
            t.enc_t[a].row(3 + 6 * l + a) = (freq * arg.cos()).matrix().transpose();
            t.enc_t[a].row(3 + 6 * l + 3 + a) = (-freq * arg.sin()).matrix().transpose();
        }
    }

    t.in_v.assign(H + 1, {});
    t.in_t.assign(H + 1, {});
    t.z_v.assign(H + 1, {});
    t.z_t.assign(H + 1, {});

    for (int s = 0; s <= H; ++s) {
        if (s == 0) {
            t.in_v[s] = t.enc_v;
            for (int k = 0; k < 3; ++k) t.in_t[s][k] = t.enc_t[k];
        } else {
            const Eigen::MatrixXd& zp = t.z_v[s - 1];
            Eigen::MatrixXd act = softplus_mat(zp, cfg_.beta);
            Eigen::MatrixXd sig = sigmoid_mat(zp, cfg_.beta);
            if (s == skip_) {
                t.in_v[s].resize(cfg_.width + E, n);
                t.in_v[s].topRows(cfg_.width) = act;
                t.in_v[s].bottomRows(E) = t.enc_v;
                for (int k = 0; k < 3; ++k) {
                    t.in_t[s][k].resize(cfg_.width + E, n);
                    t.in_t[s][k].topRows(cfg_.width) = sig.cwiseProduct(t.z_t[s - 1][k]);
                    t.in_t[s][k].bottomRows(E) = t.enc_t[k];
                }
            } else {
                t.in_v[s] = act;
                for (int k = 0; k < 3; ++k) t.in_t[s][k] = sig.cwiseProduct(t.z_t[s - 1][k]);
            }
        }
        t.z_v[s].noalias() = W_[s] * t.in_v[s];
        t.z_v[s].colwise() += b_[s];
        for (int k = 0; k < 3; ++k) t.z_t[s][k].noalias() = W_[s] * t.in_t[s][k];
    }

    const Eigen::MatrixXd& zh = t.z_v[H];
    t.dist = softplus_mat(zh.topRows(1), cfg_.beta).row(0).transpose();
    Eigen::ArrayXXd sig0 = sigmoid_mat(zh.topRows(1), cfg_.beta).array();
    t.grad.resize(3, n);
    for (int k = 0; k < 3; ++k)
        t.grad.row(k) = (sig0 * t.z_t[H][k].topRows(1).array()).matrix();
    t.feat = zh.bottomRows(cfg_.feature_dim);
}

void UdfNetwork::forward_dist(const Eigen::Matrix3Xd& pts, Eigen::VectorXd& dist) const {
    Eigen::Index n = pts.cols();
    int H = cfg_.hidden_layers;
    int E = encoding_dim(cfg_.enc_levels);
    Eigen::MatrixXd enc(E, n);
    for (int a = 0; a < 3; ++a) {
        enc.row(a) = pts.row(a);
        for (int l = 0; l < cfg_.enc_levels; ++l) {
            double freq = std::ldexp(kPi, l);
            Eigen::ArrayXd arg = freq * pts.row(a).transpose().array();
            enc.row(3 + 6 * l + a) = arg.sin().matrix().transpose();
            enc.row(3 + 6 * l + 3 + a) = arg.cos().matrix().transpose();
        }
    }
    Eigen::MatrixXd act = enc, z;
    for (int s = 0; s < H; ++s) {
        if (s == skip_ && s != 0) {
            Eigen::MatrixXd cat(cfg_.width + E, n);
            cat.topRows(cfg_.width) = act;
            cat.bottomRows(E) = enc;
            z.noalias() = W_[s] * cat;
        } else {
            z.noalias() = W_[s] * act;
        }
        z.colwise() += b_[s];
        act = softplus_mat(z, cfg_.beta);
    }
    Eigen::RowVectorXd zd = W_[H].row(0) * act;
    zd.array() += b_[H](0);
    dist = softplus_mat(zd, cfg_.beta).row(0).transpose();
}

void UdfNetwork::backward(const Tape& t, const Eigen::VectorXd& dbar,
                          const Eigen::Matrix3Xd& gbar, const Eigen::MatrixXd& fbar,
                          ParamStore& store) const {
    int H = cfg_.hidden_layers;
    Eigen::Index n = t.n;
    double beta = cfg_.beta;

    // Head: distance row passes through softplus; its tangent rows carry the
    // spatial gradient, so gbar feeds both the value and tangent adjoints.
    Eigen::MatrixXd zbar(1 + cfg_.feature_dim, n);
    std::array<Eigen::MatrixXd, 3> zbar_t;
    Eigen::ArrayXXd sig0 = sigmoid_mat(t.z_v[H].topRows(1), beta).array();
    Eigen::ArrayXXd dsig0 = beta * sig0 * (1.0 - sig0);
    Eigen::ArrayXXd acc = dbar.transpose().array() * sig0;
    for (int k = 0; k < 3; ++k)
        acc += gbar.row(k).array() * dsig0 * t.z_t[H][k].topRows(1).array();
    zbar.topRows(1) = acc.matrix();
    zbar.bottomRows(cfg_.feature_dim) = fbar;
    for (int k = 0; k < 3; ++k) {
        zbar_t[k].setZero(1 + cfg_.feature_dim, n);
        zbar_t[k].topRows(1) = (gbar.row(k).array() * sig0).matrix();
    }

    for (int s = H; s >= 0; --s) {
        Eigen::MatrixXd dW = zbar * t.in_v[s].transpose();
        for (int k = 0; k < 3; ++k) dW.noalias() += zbar_t[k] * t.in_t[s][k].transpose();
        layers_[s].scatter_grads(store, dW, zbar.rowwise().sum());
        if (s == 0) break;

        Eigen::MatrixXd abar = W_[s].transpose() * zbar;
        std::array<Eigen::MatrixXd, 3> abar_t;
        for (int k = 0; k < 3; ++k) abar_t[k] = W_[s].transpose() * zbar_t[k];
        if (s == skip_) {
            abar.conservativeResize(cfg_.width, n);
            for (int k = 0; k < 3; ++k) abar_t[k].conservativeResize(cfg_.width, n);
        }

        const Eigen::MatrixXd& zp = t.z_v[s - 1];
        Eigen::ArrayXXd sig = sigmoid_mat(zp, beta).array();
        Eigen::ArrayXXd dsig = beta * sig * (1.0 - sig);
        Eigen::ArrayXXd zb = abar.array() * sig;
        for (int k = 0; k < 3; ++k)
            zb += abar_t[k].array() * dsig * t.z_t[s - 1][k].array();
        zbar = zb.matrix();
        for (int k = 0; k < 3; ++k) zbar_t[k] = (abar_t[k].array() * sig).matrix();
    }
}

ColorNetwork::ColorNetwork(const ColorNetConfig& cfg, ParamStore& store) : cfg_(cfg) {
    int in_dim = 3 + encoding_dim(cfg_.view_levels) + 3 + cfg_.feature_dim;
    layers_.resize(cfg_.hidden_layers + 1);
    for (int s = 0; s < cfg_.hidden_layers; ++s) {
        layers_[s].init(store, "color.l" + std::to_string(s), s == 0 ? in_dim : cfg_.width,
                        cfg_.width);
    }
    layers_[cfg_.hidden_layers].init(store, "color.head", cfg_.width, 3);
    W_.resize(layers_.size());
    b_.resize(layers_.size());
}

void ColorNetwork::init_params(ParamStore& store, std::mt19937_64& rng) const {
    for (const WnLinear& l : layers_) l.init_params(store, rng);
}

void ColorNetwork::refresh(const ParamStore& store) {
    for (size_t s = 0; s < layers_.size(); ++s) layers_[s].refresh(store, W_[s], b_[s]);
}

void ColorNetwork::forward(const Eigen::Matrix3Xd& pts, const Eigen::Matrix3Xd& views,
                           const Eigen::Matrix3Xd& normals, const Eigen::MatrixXd& feats,
                           Tape& t) const {
    Eigen::Index n = pts.cols();
    int H = cfg_.hidden_layers;
    int EV = encoding_dim(cfg_.view_levels);
    t.n = n;
    t.in.assign(H + 1, {});
    t.z.assign(H + 1, {});

    Eigen::MatrixXd input(3 + EV + 3 + cfg_.feature_dim, n);
    input.topRows(3) = pts;
    std::vector<double> buf(EV);
    for (Eigen::Index i = 0; i < n; ++i) {
        positional_encode(views.col(i), cfg_.view_levels, buf.data());
        for (int r = 0; r < EV; ++r) input(3 + r, i) = buf[r];
    }
    input.middleRows(3 + EV, 3) = normals;
    input.bottomRows(cfg_.feature_dim) = feats;

    for (int s = 0; s <= H; ++s) {
        t.in[s] = (s == 0) ? input : softplus_mat(t.z[s - 1], cfg_.beta);
        t.z[s].noalias() = W_[s] * t.in[s];
        t.z[s].colwise() += b_[s];
    }
    t.rgb = sigmoid_mat(t.z[H], 1.0);
}

void ColorNetwork::backward(const Tape& t, const Eigen::Matrix3Xd& cbar, Eigen::Matrix3Xd& nbar,
                            Eigen::MatrixXd& fbar, ParamStore& store) const {
    int H = cfg_.hidden_layers;
    int EV = encoding_dim(cfg_.view_levels);
    Eigen::MatrixXd zbar =
        (cbar.array() * t.rgb.array() * (1.0 - t.rgb.array())).matrix();
    for (int s = H; s >= 0; --s) {
        layers_[s].scatter_grads(store, zbar * t.in[s].transpose(), zbar.rowwise().sum());
        Eigen::MatrixXd abar = W_[s].transpose() * zbar;
        if (s == 0) {
            nbar = abar.middleRows(3 + EV, 3);
            fbar = abar.bottomRows(cfg_.feature_dim);
            break;
        }
        Eigen::ArrayXXd sig = sigmoid_mat(t.z[s - 1], cfg_.beta).array();
        zbar = (abar.array() * sig).matrix();
    }
}

Adam::Adam(Eigen::Index n, const AdamConfig& cfg) : cfg_(cfg) {
    m_ = Eigen::VectorXd::Zero(n);
    v_ = Eigen::VectorXd::Zero(n);
}

bool Adam::step(Eigen::VectorXd& values, const Eigen::VectorXd& grads, double lr) {
    if (!grads.allFinite()) return false;
    ++t_;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grads;
    v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grads.cwiseProduct(grads);
    double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    values.array() -=
        lr * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + cfg_.eps);
    return true;
}

void DensityParamHandle::init(ParamStore& store, double rate_in) {
    rate = rate_in;
    rho_blk = store.add("density.rho", 1, 1);
}

void DensityParamHandle::set_r(ParamStore& store, double r_value) const {
    if (!(r_value > 0.0)) throw std::invalid_argument("density sharpness must be positive");
    store.value(rho_blk)(0, 0) = std::log(r_value) / rate;
}

double DensityParamHandle::r(const ParamStore& store) const {
    return std::exp(rate * store.value(rho_blk)(0, 0));
}

void DensityParamHandle::accumulate_r_grad(ParamStore& store, double rbar) const {
    store.grad(rho_blk)(0, 0) += rbar * r(store) * rate;
}

FieldSample NeuralDistanceField::eval(const Vec3& p) const {
    Eigen::Matrix3Xd pts(3, 1);
    pts.col(0) = p;
    UdfNetwork::Tape tape;
    net_.forward(pts, tape);
    FieldSample s;
    s.dist = tape.dist(0);
    s.gradient = tape.grad.col(0);
    return s;
}

void NeuralDistanceField::eval_dist(const std::vector<Vec3>& pts, std::vector<double>& out) const {
    out.resize(pts.size());
    constexpr size_t kChunk = 4096;
    for (size_t off = 0; off < pts.size(); off += kChunk) {
        size_t m = std::min(kChunk, pts.size() - off);
        Eigen::Matrix3Xd block(3, m);
        for (size_t i = 0; i < m; ++i) block.col(i) = pts[off + i];
        Eigen::VectorXd d;
        net_.forward_dist(block, d);
        for (size_t i = 0; i < m; ++i) out[off + i] = d(i);
    }
}

void NeuralDistanceField::eval_batch(const std::vector<Vec3>& pts,
                                     std::vector<FieldSample>& out) const {
    out.resize(pts.size());
    constexpr size_t kChunk = 2048;
    UdfNetwork::Tape tape;
    for (size_t off = 0; off < pts.size(); off += kChunk) {
        size_t m = std::min(kChunk, pts.size() - off);
        Eigen::Matrix3Xd block(3, m);
        for (size_t i = 0; i < m; ++i) block.col(i) = pts[off + i];
        net_.forward(block, tape);
        for (size_t i = 0; i < m; ++i) {
            out[off + i].dist = tape.dist(Eigen::Index(i));
            out[off + i].gradient = tape.grad.col(Eigen::Index(i));
            out[off + i].cusp = false;
        }
    }
}

}  // namespace udfvol
