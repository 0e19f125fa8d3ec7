#pragma once

#include <json.hpp>

#include "voxatlas/bias_field.hpp"
#include "voxatlas/diffusion.hpp"
#include "voxatlas/registration.hpp"

namespace voxatlas {

nlohmann::json to_json(const N4Settings& s);
N4Settings n4_settings_from_json(const nlohmann::json& j);

nlohmann::json to_json(const DiffusionSettings& s);
DiffusionSettings diffusion_settings_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RegistrationSettings& s);
RegistrationSettings registration_settings_from_json(const nlohmann::json& j);

}  // namespace voxatlas
