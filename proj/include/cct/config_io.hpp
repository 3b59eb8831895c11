#ifndef CCT_CONFIG_IO_HPP_
#define CCT_CONFIG_IO_HPP_

// JSON conversions for the configuration structs (nlohmann ADL hooks).

#include <json.hpp>

#include "cct/backbone.hpp"
#include "cct/noise_model.hpp"

namespace cct {

void to_json(nlohmann::json& j, const BackboneConfig& c);
void from_json(const nlohmann::json& j, BackboneConfig& c);

void to_json(nlohmann::json& j, const NoiseSpec& s);
void from_json(const nlohmann::json& j, NoiseSpec& s);

} // namespace cct

#endif // CCT_CONFIG_IO_HPP_
