#pragma once

#include <json.hpp>
#include <stdexcept>
#include <string>

#include "udfvol/fields.hpp"

namespace udfvol::detail {

inline void require_object(const nlohmann::json& j, const std::string& ctx) {
    if (!j.is_object()) throw std::runtime_error(ctx + ": expected an object");
}

inline void require_keys(const nlohmann::json& obj, const std::string& ctx,
                         std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known) throw std::runtime_error(ctx + ": unknown key '" + it.key() + "'");
    }
}

inline Vec3 parse_vec3(const nlohmann::json& j, const std::string& ctx) {
    if (!j.is_array() || j.size() != 3)
        throw std::runtime_error(ctx + ": expected an array of 3 numbers");
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

}  // namespace udfvol::detail
