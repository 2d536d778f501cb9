#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "stsc/channel.hpp"
#include "stsc/codec.hpp"
#include "stsc/federation.hpp"
#include "stsc/trainer.hpp"

namespace stsc {

// Fully resolved experiment settings.  The json tree is the source of truth
// (defaults <- config file <- --set overrides); this struct is the typed view
// the pipelines consume.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  CodecConfig codec;
  ChannelSpec channel;
  TrainConfig train;
  FederationConfig federation;

  struct PartitionCfg {
    std::string kind = "iid";  // iid | dirichlet
    double alpha = 0.1;
  } partition;

  struct LocalCfg {
    int client_id = 0;
    int epochs = 60;
  } local;

  struct DataCfg {
    std::string root = "data/cifar10";
    int train_subset = 0;  // 0 = everything, else the first n images
    int test_subset = 0;
  } data;

  struct EvalCfg {
    std::string checkpoint;
    std::vector<double> snr_grid{0, 3, 6, 9, 12, 15, 18};
    std::vector<std::string> channels;  // empty = the configured channel kind
    int batch_size = 32;
    int dump_images = 0;  // write a reconstruction grid with this many images
  } eval;

  struct AttackCfg {
    std::string kind = "dlg";  // dlg | legit | invert-net | invert-opt
    std::string checkpoint;
    int iterations = 300;
    int batch_size = 1;     // captured batch for dlg
    int images = 8;         // evaluation images for the interception attacks
    std::string optimizer = "lbfgs";
    double adam_lr = 0.1;
    std::string capture = "single_batch";
    int known_pairs = 500;
    int net_epochs = 40;
  } attack;

  struct IoCfg {
    std::string out_dir = "out";
    std::string experiment_id = "stsc";
  } io;

  struct PlotCfg {
    std::string figure;
    std::string dir;  // defaults to io.out_dir
  } plot;

  void validate() const;
};

// the complete default tree; every legal key appears here
nlohmann::json default_config_json();

// defaults <- file (optional) <- overrides, rejecting unknown keys and
// mismatched types with path-qualified messages
nlohmann::json resolve_config(const std::string& config_path,
                              const std::vector<std::string>& overrides);

// one key=value override, e.g. "train.lr=0.01" or "eval.snr_grid=[0,6,18]";
// values are coerced to the type the default tree declares for that path
void apply_override(nlohmann::json& tree, const std::string& spec);

ExperimentConfig config_from_json(const nlohmann::json& tree);

// canonical 16-hex-digit digest of the resolved tree; equal hashes mean
// identical configurations
std::string config_hash(const nlohmann::json& tree);

}  // namespace stsc
