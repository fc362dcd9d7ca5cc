#include "udfvol/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace udfvol {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little endian host");

namespace {

constexpr char kMagic[4] = {'U', 'D', 'F', 'V'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
}

void write_vector(std::ofstream& out, const Eigen::VectorXd& v) {
    write_pod(out, uint64_t(v.size()));
    out.write(reinterpret_cast<const char*>(v.data()),
              std::streamsize(sizeof(double)) * v.size());
}

Eigen::VectorXd read_vector(std::ifstream& in) {
    uint64_t n = 0;
    read_pod(in, n);
    if (n > (1ULL << 32)) throw std::runtime_error("checkpoint: implausible tensor size");
    Eigen::VectorXd v;
    v.resize(Eigen::Index(n));
    in.read(reinterpret_cast<char*>(v.data()), std::streamsize(sizeof(double) * n));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out.write(kMagic, 4);
    write_pod(out, kVersion);
    write_pod(out, uint64_t(ck.config_text.size()));
    out.write(ck.config_text.data(), std::streamsize(ck.config_text.size()));
    write_pod(out, ck.iter);
    write_pod(out, ck.adam_steps);
    write_vector(out, ck.params);
    write_vector(out, ck.adam_m);
    write_vector(out, ck.adam_v);
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    uint32_t version = 0;
    read_pod(in, version);
    if (version != kVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    uint64_t cfg_len = 0;
    read_pod(in, cfg_len);
    if (cfg_len > (1ULL << 24)) throw std::runtime_error("checkpoint: implausible config size");
    ck.config_text.resize(cfg_len);
    in.read(ck.config_text.data(), std::streamsize(cfg_len));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    read_pod(in, ck.iter);
    read_pod(in, ck.adam_steps);
    ck.params = read_vector(in);
    ck.adam_m = read_vector(in);
    ck.adam_v = read_vector(in);
    return ck;
}

}  // namespace udfvol
