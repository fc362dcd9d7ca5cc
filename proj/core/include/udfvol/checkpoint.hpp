#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>

namespace udfvol {

// Training snapshot. The embedded config text pins the architecture; loading
// code must rebuild the model from it and may reject mismatched sizes.
struct Checkpoint {
    std::string config_text;
    int64_t iter = 0;
    int64_t adam_steps = 0;
    Eigen::VectorXd params;
    Eigen::VectorXd adam_m;
    Eigen::VectorXd adam_v;
};

// Binary format, little endian: magic "UDFV", u32 version, u64 config
// length + bytes, i64 iter, i64 adam steps, then three f64 arrays each
// prefixed with a u64 length.
void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace udfvol
