#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "vrprl/instances.hpp"
#include "vrprl/policy.hpp"
#include "vrprl/svrp.hpp"
#include "vrprl/training.hpp"

namespace vrprl {

// JSON readers for the configuration types. Keys mirror the struct fields;
// missing keys keep their defaults and unknown keys raise ConfigError.
GeneratorConfig generator_config_from_json(const nlohmann::json& j);
SvrpConfig svrp_config_from_json(const nlohmann::json& j);
ActorConfig actor_config_from_json(const nlohmann::json& j, ActorConfig base);
CriticConfig critic_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);
A3cConfig a3c_config_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::filesystem::path& path);

// Throws ConfigError naming the first key of `j` not in `allowed`.
void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const char* what);

}  // namespace vrprl
