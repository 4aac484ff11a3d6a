#pragma once

#include <filesystem>
#include <string>
#include <variant>

#include <json.hpp>

#include "counterclr/baselines.hpp"
#include "counterclr/caunet.hpp"
#include "counterclr/data.hpp"
#include "counterclr/training.hpp"

namespace counterclr {

inline constexpr int kCheckpointVersion = 1;

nlohmann::json config_to_json(const TrainConfig& config);
// Missing keys keep the values of `base`; unknown keys are an ArgumentError.
TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {});
TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {});

// A trained predictor plus everything needed to evaluate it on raw-id data.
struct Checkpoint {
  std::string method;
  std::variant<CauNet, MfModel> model;
  RatingScale scale;
  IdMap users;
  IdMap items;
  TrainConfig config;
  std::size_t best_epoch = 0;
  double best_val_mse = 0.0;
  std::size_t steps = 0;

  double predict(UserIndex u, ItemIndex i) const;
  const ParamSet& params() const;
};

nlohmann::json checkpoint_to_json(const Checkpoint& ckpt);
// Throws ParseError naming both versions on a format mismatch.
Checkpoint checkpoint_from_json(const nlohmann::json& j);

std::string serialize_checkpoint(const Checkpoint& ckpt);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace counterclr
