#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "stsc/config.hpp"

using namespace stsc;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string write_temp(const std::string& name, const std::string& body) {
  auto path = (fs::temp_directory_path() / name).string();
  std::ofstream out(path, std::ios::trunc);
  out << body;
  return path;
}

}  // namespace

TEST_CASE("defaults resolve and map to a valid experiment config") {
  auto tree = resolve_config("", {});
  CHECK(tree == default_config_json());

  auto cfg = config_from_json(tree);
  CHECK(cfg.seed == 1);
  CHECK(cfg.codec.c == 32);
  CHECK(cfg.codec.h == 32);
  CHECK(cfg.channel.kind == ChannelKind::awgn);
  CHECK(cfg.channel.snr_db == 12.0);
  CHECK(cfg.train.batch_size == 32);
  CHECK(cfg.train.lr == 1e-3);
  CHECK(cfg.federation.n_clients == 3);
  CHECK(cfg.federation.rounds == 60);
  CHECK(cfg.partition.kind == "iid");
  CHECK(cfg.eval.snr_grid == std::vector<double>{0, 3, 6, 9, 12, 15, 18});
  CHECK(cfg.eval.channels.empty());
  CHECK(cfg.io.out_dir == "out");
  CHECK(cfg.io.experiment_id == "stsc");
  CHECK(cfg.plot.dir == "out");  // empty plot.dir falls back to the out dir
}

TEST_CASE("config files merge over defaults with full key checking") {
  SUBCASE("partial file overrides only what it names") {
    auto path = write_temp("stsc_cfg_ok.json",
                           R"({"seed": 9, "codec": {"c": 16}, "io": {"experiment_id": "x"}})");
    auto tree = resolve_config(path, {});
    auto cfg = config_from_json(tree);
    CHECK(cfg.seed == 9);
    CHECK(cfg.codec.c == 16);
    CHECK(cfg.codec.h == 32);
    CHECK(cfg.io.experiment_id == "x");
    CHECK(cfg.train.batch_size == 32);
  }
  SUBCASE("unknown top-level key is rejected with its path") {
    auto path = write_temp("stsc_cfg_bad1.json", R"({"codc": {}})");
    CHECK_THROWS_WITH_AS(resolve_config(path, {}), doctest::Contains("codc"), config_error);
  }
  SUBCASE("unknown nested key is rejected with its full path") {
    auto path = write_temp("stsc_cfg_bad2.json", R"({"codec": {"cc": 8}})");
    CHECK_THROWS_WITH_AS(resolve_config(path, {}), doctest::Contains("codec.cc"), config_error);
  }
  SUBCASE("type mismatches are rejected") {
    auto path = write_temp("stsc_cfg_bad3.json", R"({"seed": "abc"})");
    CHECK_THROWS_WITH_AS(resolve_config(path, {}), doctest::Contains("wrong type"),
                         config_error);
  }
  SUBCASE("int literals may stand in for float fields") {
    auto path = write_temp("stsc_cfg_int.json", R"({"channel": {"snr_db": 6}})");
    CHECK(config_from_json(resolve_config(path, {})).channel.snr_db == 6.0);
  }
  SUBCASE("invalid json is a config error, missing file an io error") {
    auto path = write_temp("stsc_cfg_bad4.json", "{nope");
    CHECK_THROWS_AS(resolve_config(path, {}), config_error);
    CHECK_THROWS_AS(resolve_config("/nonexistent/cfg.json", {}), io_error);
  }
}

TEST_CASE("overrides coerce strings against the target type") {
  auto tree = default_config_json();

  SUBCASE("integers") {
    apply_override(tree, "train.batch_size=64");
    CHECK(tree["train"]["batch_size"] == 64);
    CHECK_THROWS_WITH_AS(apply_override(tree, "train.batch_size=big"),
                         doctest::Contains("integer"), config_error);
    CHECK_THROWS_AS(apply_override(tree, "train.batch_size=12x"), config_error);
  }
  SUBCASE("floats parse fully or fail") {
    apply_override(tree, "train.lr=0.01");
    CHECK(tree["train"]["lr"] == 0.01);
    apply_override(tree, "channel.snr_db=-3");
    CHECK(tree["channel"]["snr_db"] == -3.0);
    CHECK_THROWS_WITH_AS(apply_override(tree, "train.lr=0.01q"), doctest::Contains("number"),
                         config_error);
  }
  SUBCASE("booleans accept true/false/1/0") {
    apply_override(tree, "channel.strict_power=true");
    CHECK(tree["channel"]["strict_power"] == true);
    apply_override(tree, "channel.strict_power=0");
    CHECK(tree["channel"]["strict_power"] == false);
    CHECK_THROWS_WITH_AS(apply_override(tree, "channel.strict_power=yes"),
                         doctest::Contains("boolean"), config_error);
  }
  SUBCASE("strings pass through verbatim") {
    apply_override(tree, "io.experiment_id=run=1");  // value may itself contain '='
    CHECK(tree["io"]["experiment_id"] == "run=1");
  }
  SUBCASE("number arrays accept bare comma lists and json") {
    apply_override(tree, "eval.snr_grid=1,2.5,3");
    CHECK(tree["eval"]["snr_grid"] == json::parse("[1,2.5,3]"));
    apply_override(tree, "eval.snr_grid=[4,5]");
    CHECK(tree["eval"]["snr_grid"] == json::parse("[4,5]"));
  }
  SUBCASE("string arrays split on commas") {
    apply_override(tree, "eval.channels=awgn,rician");
    CHECK(tree["eval"]["channels"] == json::parse(R"(["awgn","rician"])"));
    apply_override(tree, "eval.channels=rayleigh");
    CHECK(tree["eval"]["channels"] == json::parse(R"(["rayleigh"])"));
    CHECK_THROWS_AS(apply_override(tree, "eval.channels="), config_error);
  }
  SUBCASE("unknown or malformed paths are rejected") {
    CHECK_THROWS_WITH_AS(apply_override(tree, "nope=1"), doctest::Contains("unknown config key"),
                         config_error);
    CHECK_THROWS_WITH_AS(apply_override(tree, "codec.nope=1"), doctest::Contains("codec.nope"),
                         config_error);
    CHECK_THROWS_AS(apply_override(tree, "no_equals"), config_error);
    CHECK_THROWS_AS(apply_override(tree, "=5"), config_error);
    CHECK_THROWS_WITH_AS(apply_override(tree, "codec=5"), doctest::Contains("nested object"),
                         config_error);
  }
}

TEST_CASE("config hash is stable and value-sensitive") {
  auto a = resolve_config("", {});
  auto b = resolve_config("", {});
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);

  apply_override(b, "seed=2");
  CHECK(config_hash(a) != config_hash(b));

  // an override that restores the original value restores the hash
  apply_override(b, "seed=1");
  CHECK(config_hash(a) == config_hash(b));
}

TEST_CASE("validation rejects inconsistent experiment configs") {
  auto reject = [](const std::string& override_spec, const char* needle) {
    auto tree = resolve_config("", {override_spec});
    CHECK_THROWS_WITH_AS(config_from_json(tree), doctest::Contains(needle), config_error);
  };
  reject("federation.partition.kind=zipf", "iid or dirichlet");
  reject("federation.partition.alpha=0", "alpha");
  reject("local.client_id=3", "client_id");
  reject("local.epochs=0", "local.epochs");
  reject("data.train_subset=-1", "negative");
  reject("eval.snr_grid=[]", "snr_grid");
  reject("eval.batch_size=0", "batch_size");
  reject("eval.channels=awgn,fading", "channel");
  reject("attack.kind=oracle", "attack.kind");
  reject("attack.iterations=0", "attack sizes");
  reject("attack.adam_lr=0", "adam_lr");
  reject("attack.optimizer=sgd", "optimizer");
  reject("attack.capture=gradient", "capture");
  reject("io.experiment_id=", "experiment_id");
  reject("io.experiment_id=a/b", "experiment_id");
  reject("io.out_dir=", "out_dir");
}
