#include "counterclr/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "counterclr/error.hpp"

namespace counterclr {

using nlohmann::json;

json config_to_json(const TrainConfig& c) {
  json encoder = {{"mode", to_string(c.encoder.mode)},
                  {"hidden_dims", c.encoder.hidden_dims},
                  {"z_dim", c.encoder.z_dim}};
  return {{"alpha", c.alpha},
          {"beta", c.beta},
          {"temperature", c.temperature},
          {"tau", c.tau},
          {"momentum", c.momentum},
          {"K", c.K},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"contrastive_users_per_batch", c.contrastive_users_per_batch},
          {"contrastive_items", c.contrastive_items},
          {"propensity_clip", c.propensity_clip},
          {"stop_gradient_propensity", c.stop_gradient_propensity},
          {"patience", c.patience},
          {"selection", to_string(c.selection)},
          {"propensity_epochs", c.propensity_epochs},
          {"encoder", encoder}};
}

TrainConfig config_from_json(const json& j, TrainConfig c) {
  if (!j.is_object()) throw ArgumentError("config must be a JSON object");
  static const std::set<std::string> known{
      "alpha", "beta", "temperature", "tau", "momentum", "K", "learning_rate",
      "weight_decay", "batch_size", "epochs", "seed",
      "contrastive_users_per_batch", "contrastive_items", "propensity_clip",
      "stop_gradient_propensity", "patience", "selection", "propensity_epochs",
      "encoder"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ArgumentError("unknown config key '" + key + "'");
  }
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("alpha", c.alpha);
    get("beta", c.beta);
    get("temperature", c.temperature);
    get("tau", c.tau);
    get("momentum", c.momentum);
    get("K", c.K);
    get("learning_rate", c.learning_rate);
    get("weight_decay", c.weight_decay);
    get("batch_size", c.batch_size);
    get("epochs", c.epochs);
    get("seed", c.seed);
    get("contrastive_users_per_batch", c.contrastive_users_per_batch);
    get("contrastive_items", c.contrastive_items);
    get("propensity_clip", c.propensity_clip);
    get("stop_gradient_propensity", c.stop_gradient_propensity);
    get("patience", c.patience);
    if (j.contains("selection")) {
      c.selection = parse_model_selection(j.at("selection").get<std::string>());
    }
    get("propensity_epochs", c.propensity_epochs);
    if (j.contains("encoder")) {
      const auto& e = j.at("encoder");
      if (e.contains("mode")) c.encoder.mode = parse_encoder_mode(e.at("mode").get<std::string>());
      if (e.contains("hidden_dims")) {
        c.encoder.hidden_dims = e.at("hidden_dims").get<std::vector<std::size_t>>();
      }
      if (e.contains("z_dim")) c.encoder.z_dim = e.at("z_dim").get<std::size_t>();
    }
  } catch (const json::exception& e) {
    throw ArgumentError(std::string("bad config value: ") + e.what());
  }
  return c;
}

TrainConfig load_config(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ArgumentError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j, std::move(base));
}

double Checkpoint::predict(UserIndex u, ItemIndex i) const {
  return std::visit([&](const auto& m) { return m.predict(u, i); }, model);
}

const ParamSet& Checkpoint::params() const {
  return std::visit([](const auto& m) -> const ParamSet& { return m.params(); }, model);
}

namespace {

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json checkpoint_to_json(const Checkpoint& ckpt) {
  const auto& params = ckpt.params();
  const Backbone& backbone = std::visit(
      [](const auto& m) -> const Backbone& { return m.backbone(); }, ckpt.model);
  json blocks = json::array();
  for (const auto& b : params) {
    blocks.push_back({{"name", b.name},
                      {"shape", b.shape},
                      {"trainable", b.trainable},
                      {"values", b.values}});
  }
  json j = {
      {"format_version", kCheckpointVersion},
      {"method", ckpt.method},
      {"backbone",
       {{"mode", to_string(backbone.encoder_config().mode)},
        {"K", backbone.dim()},
        {"hidden_dims", backbone.encoder_config().hidden_dims},
        {"z_dim", backbone.z_dim()},
        {"n_users", backbone.n_users()},
        {"n_items", backbone.n_items()}}},
      {"scale", {{"r_min", ckpt.scale.r_min}, {"r_max", ckpt.scale.r_max}}},
      {"users", ckpt.users.raw_ids()},
      {"items", ckpt.items.raw_ids()},
      {"blocks", blocks},
      {"training",
       {{"best_epoch", ckpt.best_epoch},
        {"best_val_mse", finite_or_null(ckpt.best_val_mse)},
        {"steps", ckpt.steps}}},
      {"config", config_to_json(ckpt.config)}};
  if (const auto* net = std::get_if<CauNet>(&ckpt.model)) {
    j["caunet"] = {{"momentum", net->options().momentum},
                   {"propensity_clip", net->options().propensity_clip}};
  }
  return j;
}

Checkpoint checkpoint_from_json(const json& j) {
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kCheckpointVersion) {
      throw ParseError("checkpoint format version " + std::to_string(version) +
                       " does not match supported version " +
                       std::to_string(kCheckpointVersion));
    }
    Checkpoint ckpt{j.at("method").get<std::string>(), MfModel{}, {}, {}, {}, {}, 0, 0.0, 0};
    const auto& bb = j.at("backbone");
    const auto n_users = bb.at("n_users").get<std::size_t>();
    const auto n_items = bb.at("n_items").get<std::size_t>();
    const auto dim = bb.at("K").get<std::size_t>();
    EncoderConfig enc;
    enc.mode = parse_encoder_mode(bb.at("mode").get<std::string>());
    enc.hidden_dims = bb.at("hidden_dims").get<std::vector<std::size_t>>();
    enc.z_dim = enc.mode == EncoderMode::kNcf ? bb.at("z_dim").get<std::size_t>() : 0;
    ckpt.scale = RatingScale(j.at("scale").at("r_min").get<double>(),
                             j.at("scale").at("r_max").get<double>());
    ckpt.users = IdMap::from_raw(j.at("users").get<std::vector<std::string>>());
    ckpt.items = IdMap::from_raw(j.at("items").get<std::vector<std::string>>());
    if (ckpt.users.size() != n_users || ckpt.items.size() != n_items) {
      throw ParseError("checkpoint id tables do not match backbone dimensions");
    }
    ckpt.config = config_from_json(j.at("config"));
    const auto& tr = j.at("training");
    ckpt.best_epoch = tr.at("best_epoch").get<std::size_t>();
    ckpt.best_val_mse = tr.at("best_val_mse").is_null()
                            ? std::numeric_limits<double>::infinity()
                            : tr.at("best_val_mse").get<double>();
    ckpt.steps = tr.at("steps").get<std::size_t>();

    if (ckpt.method == "counterclr" || ckpt.method == "exposure-mse") {
      const auto& opts = j.at("caunet");
      ckpt.model = CauNet(n_users, n_items, dim, enc,
                          {opts.at("momentum").get<double>(),
                           opts.at("propensity_clip").get<double>()});
    } else {
      ckpt.model = MfModel(n_users, n_items, dim);
    }
    ParamSet& params = std::visit(
        [](auto& m) -> ParamSet& { return m.params(); }, ckpt.model);
    const auto& blocks = j.at("blocks");
    if (blocks.size() != params.size()) {
      throw ParseError("checkpoint block count does not match the model");
    }
    for (std::size_t k = 0; k < params.size(); ++k) {
      const auto& b = blocks[k];
      auto& block = params[k];
      if (b.at("name").get<std::string>() != block.name ||
          b.at("shape").get<std::vector<std::size_t>>() != block.shape ||
          b.at("trainable").get<bool>() != block.trainable) {
        throw ParseError("checkpoint block " + block.name + " does not match the model layout");
      }
      auto values = b.at("values").get<std::vector<double>>();
      if (values.size() != block.size()) {
        throw ParseError("checkpoint block " + block.name + " has the wrong size");
      }
      block.values = std::move(values);
    }
    return ckpt;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what());
  }
}

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  return checkpoint_to_json(ckpt).dump(1) + "\n";
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << serialize_checkpoint(ckpt);
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace counterclr
