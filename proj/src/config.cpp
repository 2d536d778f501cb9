#include "stsc/config.hpp"

#include <cstdlib>
#include <fstream>

#include "stsc/common.hpp"
#include "stsc/privacy.hpp"

namespace stsc {

using nlohmann::json;

nlohmann::json default_config_json() {
  return json{
      {"seed", 1},
      {"codec",
       {{"h", 32}, {"w", 32}, {"c", 32}, {"window", 4}, {"heads", 4}, {"depth", 1},
        {"mlp_ratio", 4}}},
      {"channel",
       {{"kind", "awgn"}, {"snr_db", 12.0}, {"rician_k", 10.0}, {"csi", "perfect"},
        {"strict_power", false}}},
      {"train",
       {{"lr", 1e-3}, {"batch_size", 32}, {"epochs", 1}, {"optimizer", "adam"},
        {"clip_norm", 1.0}, {"snr_policy", "fixed"}, {"snr_min", 0.0}, {"snr_max", 18.0}}},
      {"federation",
       {{"n_clients", 3}, {"rounds", 60}, {"participants_per_round", 3}, {"eval_every", 10},
        {"checkpoint_every", 0}, {"partition", {{"kind", "iid"}, {"alpha", 0.1}}}}},
      {"local", {{"client_id", 0}, {"epochs", 60}}},
      {"data", {{"root", "data/cifar10"}, {"train_subset", 0}, {"test_subset", 0}}},
      {"eval",
       {{"checkpoint", ""}, {"snr_grid", {0, 3, 6, 9, 12, 15, 18}},
        {"channels", json::array()}, {"batch_size", 32}, {"dump_images", 0}}},
      {"attack",
       {{"kind", "dlg"}, {"checkpoint", ""}, {"iterations", 300}, {"batch_size", 1},
        {"images", 8}, {"optimizer", "lbfgs"}, {"adam_lr", 0.1},
        {"capture", "single_batch"}, {"known_pairs", 500}, {"net_epochs", 40}}},
      {"io", {{"out_dir", "out"}, {"experiment_id", "stsc"}}},
      {"plot", {{"figure", ""}, {"dir", ""}}},
  };
}

namespace {

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;  // int literals may stand in for floats
  if (a.is_array() && b.is_array()) return true;
  return a.type() == b.type();
}

void merge_checked(json& base, const json& patch, const std::string& path) {
  require(patch.is_object(), path.empty() ? std::string("config root must be an object")
                                          : "config key '" + path + "' must be an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string full = path.empty() ? key : path + "." + key;
    require(base.contains(key), "unknown config key '" + full + "'");
    json& slot = base[key];
    if (slot.is_object()) {
      merge_checked(slot, value, full);
    } else {
      require(same_kind(slot, value), "config key '" + full + "' has the wrong type");
      slot = value;
    }
  }
}

json coerce(const json& target, const std::string& value, const std::string& path) {
  if (target.is_string()) return value;
  if (target.is_boolean()) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw config_error("override '" + path + "' expects a boolean, got '" + value + "'");
  }
  if (target.is_number_float()) {
    char* end = nullptr;
    double v = std::strtod(value.c_str(), &end);
    require(end && *end == '\0' && !value.empty(),
            "override '" + path + "' expects a number, got '" + value + "'");
    return v;
  }
  if (target.is_number_integer() || target.is_number_unsigned()) {
    char* end = nullptr;
    long long v = std::strtoll(value.c_str(), &end, 10);
    require(end && *end == '\0' && !value.empty(),
            "override '" + path + "' expects an integer, got '" + value + "'");
    return v;
  }
  if (target.is_array()) {
    std::string body = value;
    if (body.empty() || body.front() != '[') body = "[" + body + "]";
    auto parsed = json::parse(body, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_array()) {
      // not json, so treat the value as a comma-separated list of strings
      parsed = json::array();
      std::size_t start = 0;
      while (start <= value.size()) {
        auto comma = value.find(',', start);
        auto len = comma == std::string::npos ? std::string::npos : comma - start;
        parsed.push_back(value.substr(start, len));
        if (comma == std::string::npos) break;
        start = comma + 1;
      }
    }
    require(!value.empty(), "override '" + path + "' expects an array, got ''");
    return parsed;
  }
  throw config_error("override '" + path + "' targets a nested object");
}

}  // namespace

void apply_override(json& tree, const std::string& spec) {
  auto eq = spec.find('=');
  require(eq != std::string::npos && eq > 0,
          "override '" + spec + "' must look like key.path=value");
  const std::string path = spec.substr(0, eq);
  const std::string value = spec.substr(eq + 1);

  json* node = &tree;
  std::size_t start = 0;
  while (true) {
    auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    require(!key.empty(), "override '" + spec + "' has an empty path segment");
    require(node->is_object() && node->contains(key), "unknown config key '" + path + "'");
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  *node = coerce(*node, value, path);
}

nlohmann::json resolve_config(const std::string& config_path,
                              const std::vector<std::string>& overrides) {
  json tree = default_config_json();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    require<io_error>(in.good(), "cannot open config '" + config_path + "'");
    json file = json::parse(in, nullptr, false);
    require(!file.is_discarded(), "config '" + config_path + "' is not valid json");
    merge_checked(tree, file, "");
  }
  for (const auto& spec : overrides) apply_override(tree, spec);
  return tree;
}

ExperimentConfig config_from_json(const nlohmann::json& tree) {
  ExperimentConfig cfg;
  cfg.seed = tree.at("seed").get<std::uint64_t>();

  const auto& c = tree.at("codec");
  cfg.codec.h = c.at("h").get<int>();
  cfg.codec.w = c.at("w").get<int>();
  cfg.codec.c = c.at("c").get<int>();
  cfg.codec.window = c.at("window").get<int>();
  cfg.codec.heads = c.at("heads").get<int>();
  cfg.codec.depth = c.at("depth").get<int>();
  cfg.codec.mlp_ratio = c.at("mlp_ratio").get<int>();

  const auto& ch = tree.at("channel");
  cfg.channel.kind = channel_kind_from(ch.at("kind").get<std::string>());
  cfg.channel.snr_db = ch.at("snr_db").get<double>();
  cfg.channel.rician_k = ch.at("rician_k").get<double>();
  cfg.channel.csi = csi_mode_from(ch.at("csi").get<std::string>());
  cfg.channel.strict_power = ch.at("strict_power").get<bool>();

  const auto& t = tree.at("train");
  cfg.train.lr = t.at("lr").get<double>();
  cfg.train.batch_size = t.at("batch_size").get<int>();
  cfg.train.epochs = t.at("epochs").get<int>();
  cfg.train.optimizer = optimizer_kind_from(t.at("optimizer").get<std::string>());
  cfg.train.clip_norm = t.at("clip_norm").get<double>();
  cfg.train.snr_policy = snr_policy_from(t.at("snr_policy").get<std::string>());
  cfg.train.snr_min = t.at("snr_min").get<double>();
  cfg.train.snr_max = t.at("snr_max").get<double>();

  const auto& f = tree.at("federation");
  cfg.federation.n_clients = f.at("n_clients").get<int>();
  cfg.federation.rounds = f.at("rounds").get<int>();
  cfg.federation.participants_per_round = f.at("participants_per_round").get<int>();
  cfg.federation.eval_every = f.at("eval_every").get<int>();
  cfg.federation.checkpoint_every = f.at("checkpoint_every").get<int>();
  cfg.partition.kind = f.at("partition").at("kind").get<std::string>();
  cfg.partition.alpha = f.at("partition").at("alpha").get<double>();

  const auto& l = tree.at("local");
  cfg.local.client_id = l.at("client_id").get<int>();
  cfg.local.epochs = l.at("epochs").get<int>();

  const auto& d = tree.at("data");
  cfg.data.root = d.at("root").get<std::string>();
  cfg.data.train_subset = d.at("train_subset").get<int>();
  cfg.data.test_subset = d.at("test_subset").get<int>();

  const auto& e = tree.at("eval");
  cfg.eval.checkpoint = e.at("checkpoint").get<std::string>();
  cfg.eval.snr_grid = e.at("snr_grid").get<std::vector<double>>();
  cfg.eval.channels = e.at("channels").get<std::vector<std::string>>();
  cfg.eval.batch_size = e.at("batch_size").get<int>();
  cfg.eval.dump_images = e.at("dump_images").get<int>();

  const auto& a = tree.at("attack");
  cfg.attack.kind = a.at("kind").get<std::string>();
  cfg.attack.checkpoint = a.at("checkpoint").get<std::string>();
  cfg.attack.iterations = a.at("iterations").get<int>();
  cfg.attack.batch_size = a.at("batch_size").get<int>();
  cfg.attack.images = a.at("images").get<int>();
  cfg.attack.optimizer = a.at("optimizer").get<std::string>();
  cfg.attack.adam_lr = a.at("adam_lr").get<double>();
  cfg.attack.capture = a.at("capture").get<std::string>();
  cfg.attack.known_pairs = a.at("known_pairs").get<int>();
  cfg.attack.net_epochs = a.at("net_epochs").get<int>();

  cfg.io.out_dir = tree.at("io").at("out_dir").get<std::string>();
  cfg.io.experiment_id = tree.at("io").at("experiment_id").get<std::string>();
  cfg.plot.figure = tree.at("plot").at("figure").get<std::string>();
  cfg.plot.dir = tree.at("plot").at("dir").get<std::string>();
  if (cfg.plot.dir.empty()) cfg.plot.dir = cfg.io.out_dir;

  cfg.validate();
  return cfg;
}

void ExperimentConfig::validate() const {
  codec.validate();
  channel.validate();
  train.validate();
  federation.validate();
  require(partition.kind == "iid" || partition.kind == "dirichlet",
          "federation.partition.kind must be iid or dirichlet, got '" + partition.kind + "'");
  require(partition.alpha > 0, "federation.partition.alpha must be positive");
  require(local.client_id >= 0 && local.client_id < federation.n_clients,
          "local.client_id must name one of the federation clients");
  require(local.epochs >= 1, "local.epochs must be >= 1");
  require(data.train_subset >= 0 && data.test_subset >= 0, "data subsets cannot be negative");
  require(!eval.snr_grid.empty(), "eval.snr_grid cannot be empty");
  require(eval.batch_size >= 1, "eval.batch_size must be >= 1");
  require(eval.dump_images >= 0, "eval.dump_images cannot be negative");
  for (const auto& kind : eval.channels) channel_kind_from(kind);
  require(attack.kind == "dlg" || attack.kind == "legit" || attack.kind == "invert-net" ||
              attack.kind == "invert-opt",
          "attack.kind must be dlg, legit, invert-net, or invert-opt, got '" + attack.kind +
              "'");
  require(attack.iterations >= 1 && attack.batch_size >= 1 && attack.images >= 1 &&
              attack.known_pairs >= 1 && attack.net_epochs >= 1,
          "attack sizes must be >= 1");
  require(attack.adam_lr > 0, "attack.adam_lr must be positive");
  attack_optimizer_from(attack.optimizer);
  capture_mode_from(attack.capture);
  require(!io.out_dir.empty(), "io.out_dir cannot be empty");
  require(!io.experiment_id.empty(), "io.experiment_id cannot be empty");
  require(io.experiment_id.find('/') == std::string::npos &&
              io.experiment_id.find('\\') == std::string::npos,
          "io.experiment_id is used in file names and cannot contain path separators");
}

std::string config_hash(const nlohmann::json& tree) {
  const std::string dump = tree.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char b : dump) {
    h ^= b;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace stsc
