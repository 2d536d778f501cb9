#include "stsc/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stsc/channel.hpp"
#include "stsc/checkpoint.hpp"
#include "stsc/codec.hpp"
#include "stsc/common.hpp"
#include "stsc/config.hpp"
#include "stsc/dataset.hpp"
#include "stsc/federation.hpp"
#include "stsc/image_io.hpp"
#include "stsc/metrics_io.hpp"
#include "stsc/partition.hpp"
#include "stsc/privacy.hpp"
#include "stsc/trainer.hpp"

namespace stsc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Ctx {
  ExperimentConfig cfg;
  json tree;
  std::string hash;
  fs::path out;

  fs::path artifact(const std::string& name) const { return out / name; }
  std::string id() const { return cfg.io.experiment_id; }
};

std::string snr_tag(double snr) {
  std::string s = format_g(snr);
  std::replace(s.begin(), s.end(), '.', 'p');
  return s;
}

std::vector<int> subset_indices(const Dataset& ds, int subset) {
  int n = static_cast<int>(ds.labels.size());
  if (subset > 0) n = std::min(n, subset);
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

Partition build_partition(const Ctx& ctx, const Dataset& train, const std::vector<int>& subset) {
  std::vector<std::uint8_t> labels(subset.size());
  for (std::size_t i = 0; i < subset.size(); ++i) labels[i] = train.labels[subset[i]];
  const auto seed = derive_seed(ctx.cfg.seed, "partition");
  Partition part = ctx.cfg.partition.kind == "iid"
                       ? partition_iid(labels, ctx.cfg.federation.n_clients, seed)
                       : partition_dirichlet(labels, ctx.cfg.federation.n_clients,
                                             ctx.cfg.partition.alpha, seed);
  for (auto& client : part.client_indices) {
    for (auto& pos : client) pos = subset[pos];
    std::sort(client.begin(), client.end());
  }
  return part;
}

json checkpoint_header(const Ctx& ctx, const char* kind, int round) {
  return json{{"experiment_id", ctx.id()},
              {"config_hash", ctx.hash},
              {"kind", kind},
              {"round", round},
              {"seed", ctx.cfg.seed},
              {"codec", ctx.tree.at("codec")},
              {"config", ctx.tree}};
}

MetricsRow base_row(const Ctx& ctx, const ChannelSpec& chan, int round,
                    const EvalResult& ev) {
  MetricsRow row;
  row.experiment_id = ctx.id();
  row.channel = to_string(chan.kind);
  row.snr_db = chan.snr_db;
  row.round = round;
  row.mse = ev.mse;
  row.psnr_db = ev.psnr_db;
  row.ssim = ev.ssim;
  row.extras["config_hash"] = ctx.hash;
  row.extras["n_images"] = ev.n_images;
  return row;
}

void dump_reconstructions(const Ctx& ctx, const Codec<float>& codec,
                          const ParamPack<float>& params, const Dataset& test,
                          const std::vector<int>& subset, const ChannelSpec& chan) {
  const int n = std::min<int>(ctx.cfg.eval.dump_images, static_cast<int>(subset.size()));
  if (n <= 0) return;
  const auto& cc = codec.config();
  const int px = cc.pixels(), nr = cc.n_real();
  std::vector<float> x(static_cast<std::size_t>(n) * px), sym(static_cast<std::size_t>(n) * nr),
      rx(sym.size()), xhat(x.size());
  test.gather(subset.data(), n, x.data());
  Workspace<float> ws;
  Rng rng(derive_seed(ctx.cfg.seed, "dump"));
  codec.encode(x.data(), n, params.data.data(), sym.data(), ws);
  auto draw = draw_channel<float>(chan, n, nr, rng);
  apply_channel(sym.data(), n, nr, chan, draw, rx.data());
  codec.decode(rx.data(), n, params.data.data(), xhat.data(), ws);
  std::vector<double> grid(xhat.begin(), xhat.end());
  const int cols = std::min(8, n);
  const auto path = ctx.artifact(ctx.id() + "-recon-" + to_string(chan.kind) + "-" +
                                 snr_tag(chan.snr_db) + ".ppm");
  write_image_grid_ppm(path.string(), grid.data(), n, cc.h, cc.w, cols);
  std::printf("wrote %s\n", path.string().c_str());
}

int cmd_train_local(const Ctx& ctx) {
  const auto& cfg = ctx.cfg;
  Dataset train = load_dataset(cfg.data.root, true);
  Dataset test = load_dataset(cfg.data.root, false);
  auto train_subset = subset_indices(train, cfg.data.train_subset);
  auto test_subset = subset_indices(test, cfg.data.test_subset);
  Partition part = build_partition(ctx, train, train_subset);
  const auto& shard = part.client_indices[cfg.local.client_id];

  Codec<float> codec(cfg.codec);
  auto params = codec.make_params();
  codec.init_params(params, derive_seed(cfg.seed, "init"));
  OptState<float> opt;
  opt.reset(params.data.size());

  TrainConfig tc = cfg.train;
  tc.epochs = cfg.local.epochs;
  auto stats = local_train(codec, params, opt, train, shard, tc, cfg.channel,
                           derive_seed(cfg.seed, "solo", cfg.local.client_id));
  auto ev = evaluate(codec, params, test, test_subset, cfg.channel, cfg.eval.batch_size,
                     derive_seed(cfg.seed, "eval"));

  const auto ckpt = ctx.artifact(ctx.id() + ".ckpt");
  save_checkpoint(ckpt.string(), params, checkpoint_header(ctx, "local", cfg.local.epochs));

  MetricsWriter metrics(ctx.artifact("metrics.tsv").string(), true);
  auto row = base_row(ctx, cfg.channel, cfg.local.epochs, ev);
  row.extras["model"] = "local";
  row.extras["client_id"] = cfg.local.client_id;
  row.extras["mean_loss"] = stats.mean_loss;
  row.extras["final_loss"] = stats.final_loss;
  metrics.write(row);
  dump_reconstructions(ctx, codec, params, test, test_subset, cfg.channel);

  std::printf(
      "train-local id=%s client=%d epochs=%d shard=%zu mean_loss=%s psnr=%s ssim=%s -> %s\n",
      ctx.id().c_str(), cfg.local.client_id, cfg.local.epochs, shard.size(),
      format_g(stats.mean_loss).c_str(), format_g(ev.psnr_db).c_str(),
      format_g(ev.ssim).c_str(), ckpt.string().c_str());
  return 0;
}

int cmd_train_fed(const Ctx& ctx) {
  const auto& cfg = ctx.cfg;
  Dataset train = load_dataset(cfg.data.root, true);
  Dataset test = load_dataset(cfg.data.root, false);
  auto train_subset = subset_indices(train, cfg.data.train_subset);
  auto test_subset = subset_indices(test, cfg.data.test_subset);
  Partition part = build_partition(ctx, train, train_subset);

  Codec<float> codec(cfg.codec);
  auto global = codec.make_params();
  codec.init_params(global, derive_seed(cfg.seed, "init"));

  const auto rounds_path = ctx.artifact(ctx.id() + ".rounds.jsonl");
  {
    std::ofstream meta(rounds_path, std::ios::trunc);
    require<io_error>(meta.good(), "cannot open " + rounds_path.string());
    meta << json{{"experiment_id", ctx.id()},
                 {"config_hash", ctx.hash},
                 {"channel", to_string(cfg.channel.kind)},
                 {"snr_db", cfg.channel.snr_db}}
                .dump()
         << "\n";
  }
  RoundsWriter rounds(rounds_path.string(), true);

  FedEvalSpec eval_spec;
  eval_spec.data = &test;
  eval_spec.indices = test_subset;
  eval_spec.chan = cfg.channel;
  eval_spec.batch_size = cfg.eval.batch_size;
  eval_spec.seed = derive_seed(cfg.seed, "eval");

  auto on_round = [&](const RoundLog& log) {
    rounds.write(log);
    if (log.psnr_eval)
      std::printf("round %d loss=%s psnr=%s\n", log.t, format_g(log.loss_global).c_str(),
                  format_g(*log.psnr_eval).c_str());
    else
      std::printf("round %d loss=%s\n", log.t, format_g(log.loss_global).c_str());
    std::fflush(stdout);
  };
  auto on_checkpoint = [&](int t, const ParamPack<float>& p) {
    save_checkpoint(ctx.artifact(ctx.id() + "-r" + std::to_string(t) + ".ckpt").string(), p,
                    checkpoint_header(ctx, "federated", t));
  };

  std::function<void(int, const ParamPack<float>&)> ckpt_cb;
  if (cfg.federation.checkpoint_every > 0) ckpt_cb = on_checkpoint;
  auto run = run_federated_training(codec, global, train, part, cfg.train, cfg.channel,
                                    cfg.federation, cfg.seed, on_round,
                                    cfg.federation.eval_every > 0 ? &eval_spec : nullptr,
                                    ckpt_cb);

  const auto ckpt = ctx.artifact(ctx.id() + ".ckpt");
  save_checkpoint(ckpt.string(), global, checkpoint_header(ctx, "federated", cfg.federation.rounds));

  auto ev = evaluate(codec, global, test, test_subset, cfg.channel, cfg.eval.batch_size,
                     derive_seed(cfg.seed, "eval"));
  MetricsWriter metrics(ctx.artifact("metrics.tsv").string(), true);
  auto row = base_row(ctx, cfg.channel, cfg.federation.rounds, ev);
  row.extras["model"] = "federated";
  row.extras["final_round_loss"] = run.rounds.back().loss_global;
  metrics.write(row);
  dump_reconstructions(ctx, codec, global, test, test_subset, cfg.channel);

  std::printf("train-fed id=%s rounds=%d final_loss=%s psnr=%s ssim=%s -> %s\n",
              ctx.id().c_str(), cfg.federation.rounds,
              format_g(run.rounds.back().loss_global).c_str(), format_g(ev.psnr_db).c_str(),
              format_g(ev.ssim).c_str(), ckpt.string().c_str());
  return 0;
}

fs::path checkpoint_or_default(const Ctx& ctx, const std::string& explicit_path) {
  if (!explicit_path.empty()) return explicit_path;
  return ctx.artifact(ctx.id() + ".ckpt");
}

int cmd_evaluate(const Ctx& ctx) {
  const auto& cfg = ctx.cfg;
  Dataset test = load_dataset(cfg.data.root, false);
  auto test_subset = subset_indices(test, cfg.data.test_subset);

  Codec<float> codec(cfg.codec);
  const auto ckpt = checkpoint_or_default(ctx, cfg.eval.checkpoint);
  json header;
  auto params = load_checkpoint<float>(ckpt.string(), codec.layout(), &header);
  const int round = header.value("round", 0);

  std::vector<std::string> kinds = cfg.eval.channels;
  if (kinds.empty()) kinds.push_back(to_string(cfg.channel.kind));

  MetricsWriter metrics(ctx.artifact("metrics.tsv").string(), true);
  for (const auto& kind : kinds) {
    ChannelSpec chan = cfg.channel;
    chan.kind = channel_kind_from(kind);
    for (double snr : cfg.eval.snr_grid) {
      chan.snr_db = snr;
      auto ev = evaluate(codec, params, test, test_subset, chan, cfg.eval.batch_size,
                         derive_seed(cfg.seed, "eval"));
      auto row = base_row(ctx, chan, round, ev);
      row.extras["checkpoint"] = ckpt.string();
      metrics.write(row);
      dump_reconstructions(ctx, codec, params, test, test_subset, chan);
      std::printf("evaluate id=%s channel=%s snr_db=%s psnr=%s ssim=%s\n", ctx.id().c_str(),
                  kind.c_str(), format_g(snr).c_str(), format_g(ev.psnr_db).c_str(),
                  format_g(ev.ssim).c_str());
      std::fflush(stdout);
    }
  }
  return 0;
}

void write_attack_grids(const Ctx& ctx, const std::string& kind, const std::vector<double>& rec,
                        const std::vector<double>& truth, int n) {
  const int h = ctx.cfg.codec.h, w = ctx.cfg.codec.w;
  const int cols = std::min(8, n);
  write_image_grid_ppm(ctx.artifact(ctx.id() + "-" + kind + "-recovered.ppm").string(),
                       rec.data(), n, h, w, cols);
  write_image_grid_ppm(ctx.artifact(ctx.id() + "-" + kind + "-truth.ppm").string(), truth.data(),
                       n, h, w, cols);
}

int cmd_attack(const Ctx& ctx) {
  const auto& cfg = ctx.cfg;
  Dataset train = load_dataset(cfg.data.root, true);
  Dataset test = load_dataset(cfg.data.root, false);
  auto train_subset = subset_indices(train, cfg.data.train_subset);
  auto test_subset = subset_indices(test, cfg.data.test_subset);

  Codec<double> codec(cfg.codec);
  const auto ckpt = checkpoint_or_default(ctx, cfg.attack.checkpoint);
  json header;
  auto victim = convert_pack<double>(load_checkpoint<float>(ckpt.string(), nullptr, &header));
  require<shape_error>(victim.layout->total() == codec.layout()->total(),
                       "checkpoint does not match the configured codec");

  MetricsWriter metrics(ctx.artifact("metrics.tsv").string(), true);
  AttackRow row;

  if (cfg.attack.kind == "dlg") {
    require(static_cast<int>(train_subset.size()) >= cfg.attack.batch_size,
            "attack.batch_size exceeds the training subset");
    std::vector<int> batch(train_subset.begin(), train_subset.begin() + cfg.attack.batch_size);
    auto cap = capture_update(codec, victim, train, batch, cfg.train, cfg.channel,
                              capture_mode_from(cfg.attack.capture),
                              derive_seed(cfg.seed, "attack"));
    DlgOptions opt;
    opt.iterations = cfg.attack.iterations;
    opt.optimizer = attack_optimizer_from(cfg.attack.optimizer);
    opt.adam_lr = cfg.attack.adam_lr;
    opt.seed = derive_seed(cfg.seed, "attack");
    auto res = dlg_attack(codec, victim, cap, opt);
    row = attack_row("dlg", res.recovered.data(), cap.images.data(), cap.n_images, cfg.codec.h,
                     cfg.codec.w);
    write_attack_grids(ctx, "dlg", res.recovered, cap.images, cap.n_images);
    auto mrow = base_row(ctx, cfg.channel, header.value("round", 0),
                         EvalResult{row.mse, row.psnr_db, row.ssim, cap.n_images, 0});
    mrow.extras["attack"] = "dlg";
    mrow.extras["capture"] = cfg.attack.capture;
    mrow.extras["batch"] = cap.n_images;
    mrow.extras["mean_psnr_db"] = row.mean_psnr_db;
    mrow.extras["objective"] = res.objective;
    mrow.extras["fallbacks"] = res.fallbacks;
    metrics.write(mrow);
  } else {
    require(static_cast<int>(test_subset.size()) >= cfg.attack.images,
            "attack.images exceeds the test subset");
    std::vector<int> idx(test_subset.begin(), test_subset.begin() + cfg.attack.images);
    auto ic = record_intercepts(codec, victim, test, idx, cfg.channel,
                                std::min(32, cfg.attack.images),
                                derive_seed(cfg.seed, "intercepts"));
    std::vector<double> rec;
    json extra = json::object();
    if (cfg.attack.kind == "legit") {
      rec = legitimate_decode(codec, victim, ic);
    } else if (cfg.attack.kind == "invert-net") {
      InversionNetOptions opt;
      opt.pairs = cfg.attack.known_pairs;
      opt.epochs = cfg.attack.net_epochs;
      opt.seed = derive_seed(cfg.seed, "invert-net");
      auto net = train_inversion_net(codec, victim, train, train_subset, cfg.channel, opt);
      rec = invert_with_net(codec, net, ic.y, ic.n);
      extra["net_final_loss"] = net.final_loss;
    } else {  // invert-opt
      InvertOptOptions opt;
      opt.iterations = cfg.attack.iterations;
      opt.optimizer = attack_optimizer_from(cfg.attack.optimizer);
      opt.adam_lr = cfg.attack.adam_lr;
      opt.seed = derive_seed(cfg.seed, "invert-opt");
      auto res = invert_features_optimization(codec, victim, ic.y, ic.n, opt);
      rec = std::move(res.recovered);
      extra["mean_objective"] =
          std::accumulate(res.objectives.begin(), res.objectives.end(), 0.0) / ic.n;
      extra["fallbacks"] = res.fallbacks;
    }
    row = attack_row(cfg.attack.kind, rec.data(), ic.images.data(), ic.n, cfg.codec.h,
                     cfg.codec.w);
    write_attack_grids(ctx, cfg.attack.kind, rec, ic.images, ic.n);
    auto mrow = base_row(ctx, cfg.channel, header.value("round", 0),
                         EvalResult{row.mse, row.psnr_db, row.ssim, ic.n, 0});
    mrow.extras["attack"] = cfg.attack.kind;
    mrow.extras["mean_psnr_db"] = row.mean_psnr_db;
    mrow.extras.update(extra);
    metrics.write(mrow);
  }

  std::printf("attack id=%s kind=%s images=%zu psnr=%s mean_psnr=%s ssim=%s\n", ctx.id().c_str(),
              cfg.attack.kind.c_str(), row.psnr_per_image.size(), format_g(row.psnr_db).c_str(),
              format_g(row.mean_psnr_db).c_str(), format_g(row.ssim).c_str());
  return 0;
}

int cmd_partition_stats(const Ctx& ctx) {
  const auto& cfg = ctx.cfg;
  Dataset train = load_dataset(cfg.data.root, true);
  auto train_subset = subset_indices(train, cfg.data.train_subset);
  Partition part = build_partition(ctx, train, train_subset);

  const auto manifest = ctx.artifact(ctx.id() + ".partition.jsonl");
  write_partition_manifest(manifest.string(), part, train.labels);

  json stats;
  stats["experiment_id"] = ctx.id();
  stats["config_hash"] = ctx.hash;
  stats["kind"] = cfg.partition.kind;
  if (cfg.partition.kind == "dirichlet") stats["alpha"] = cfg.partition.alpha;
  std::size_t smin = part.client_indices[0].size(), smax = smin;
  json sizes = json::array(), entropies = json::array();
  for (const auto& client : part.client_indices) {
    smin = std::min(smin, client.size());
    smax = std::max(smax, client.size());
    sizes.push_back(client.size());
    std::array<double, 10> hist{};
    for (int i : client) hist[train.labels[i]] += 1.0;
    double ent = 0;
    for (double c : hist)
      if (c > 0) {
        double p = c / client.size();
        ent -= p * std::log(p);
      }
    entropies.push_back(ent);
  }
  stats["sizes"] = sizes;
  stats["size_ratio"] = static_cast<double>(smax) / static_cast<double>(smin);
  stats["label_entropy"] = entropies;

  const auto stats_path = ctx.artifact(ctx.id() + ".partition-stats.json");
  std::ofstream out(stats_path);
  require<io_error>(out.good(), "cannot open " + stats_path.string());
  out << stats.dump(2) << "\n";
  require<io_error>(out.good(), "write failure on " + stats_path.string());

  std::printf("partition-stats id=%s kind=%s clients=%d size_ratio=%s -> %s\n", ctx.id().c_str(),
              cfg.partition.kind.c_str(), cfg.federation.n_clients,
              format_g(stats["size_ratio"].get<double>()).c_str(), manifest.string().c_str());
  return 0;
}

PlotSeries snr_psnr_series(const std::string& name, const std::vector<MetricsRow>& rows) {
  std::map<double, double> by_snr;  // append order: later rows win
  for (const auto& r : rows) by_snr[r.snr_db] = r.psnr_db;
  PlotSeries s{name, {}, {}};
  for (const auto& [x, y] : by_snr) {
    s.x.push_back(x);
    s.y.push_back(y);
  }
  return s;
}

PlotSeries loss_series(const std::string& name, const std::vector<RoundLog>& logs) {
  PlotSeries s{name, {}, {}};
  for (const auto& log : logs) {
    s.x.push_back(log.t);
    s.y.push_back(log.loss_global);
  }
  return s;
}

int cmd_plot_data(const Ctx& ctx) {
  const auto& cfg = ctx.cfg;
  require(!cfg.plot.figure.empty(),
          "plot.figure must be set (fig4-<channel>, fig6-<id>, fig7-<channel>, fig8, "
          "fig9-<channel>)");
  const std::string& figure = cfg.plot.figure;
  const fs::path dir = cfg.plot.dir;
  const auto metrics_path = dir / "metrics.tsv";

  auto rows_for_kind = [&](const std::string& kind) {
    require(fs::exists(metrics_path),
            "figure " + figure + ": no metrics at " + metrics_path.string() +
                "; run evaluate first");
    channel_kind_from(kind);  // validates the qualifier
    std::map<std::string, std::vector<MetricsRow>> by_id;
    for (auto& row : read_metrics_tsv(metrics_path.string()))
      if (row.channel == kind && !row.extras.contains("attack")) by_id[row.experiment_id].push_back(row);
    return by_id;
  };

  std::vector<PlotSeries> series;
  if (figure.rfind("fig4-", 0) == 0 || figure.rfind("fig9-", 0) == 0) {
    const std::string kind = figure.substr(5);
    auto by_id = rows_for_kind(kind);
    for (const auto& [id, rows] : by_id) series.push_back(snr_psnr_series(id, rows));
    const std::size_t need = figure.rfind("fig9-", 0) == 0 ? 2 : 1;
    require(series.size() >= need, "figure " + figure + " missing series: needs at least " +
                                       std::to_string(need) + " evaluated model(s) on channel '" +
                                       kind + "', found " + std::to_string(series.size()));
  } else if (figure.rfind("fig7-", 0) == 0) {
    const std::string kind = figure.substr(5);
    auto by_id = rows_for_kind(kind);
    std::string missing;
    for (const char* want : {"global", "client0", "client1", "client2"}) {
      auto it = by_id.find(want);
      if (it == by_id.end()) {
        missing += missing.empty() ? want : std::string(", ") + want;
        continue;
      }
      series.push_back(snr_psnr_series(want, it->second));
    }
    require(missing.empty(), "figure " + figure + " missing series: " + missing +
                                 " (run evaluate with io.experiment_id set to each name)");
  } else if (figure.rfind("fig6-", 0) == 0) {
    const std::string id = figure.substr(5);
    const auto path = dir / (id + ".rounds.jsonl");
    require(fs::exists(path),
            "figure " + figure + " missing series '" + id + "': no " + path.string());
    auto logs = read_rounds_jsonl(path.string());
    require(!logs.empty(), "figure " + figure + " missing series '" + id + "': " +
                               path.string() + " has no rounds");
    series.push_back(loss_series(id, logs));
  } else if (figure == "fig8") {
    std::vector<std::string> found;
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto name = entry.path().filename().string();
      const std::string suffix = ".rounds.jsonl";
      if (name.size() > suffix.size() &&
          name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
        const std::string id = name.substr(0, name.size() - suffix.size());
        auto logs = read_rounds_jsonl(entry.path().string());
        if (!logs.empty()) {
          series.push_back(loss_series(id, logs));
          found.push_back(id);
        }
      }
    }
    std::sort(series.begin(), series.end(),
              [](const auto& a, const auto& b) { return a.name < b.name; });
    require(series.size() >= 2, "figure fig8 missing series: needs at least two runs with "
                                "rounds files in " +
                                    dir.string() + ", found " + std::to_string(series.size()));
  } else {
    throw config_error("unknown figure '" + figure +
                       "' (expected fig4-<channel>, fig6-<id>, fig7-<channel>, fig8, "
                       "fig9-<channel>)");
  }

  const auto out_path = dir / ("plotdata-" + figure + ".tsv");
  write_plot_series(out_path.string(), series, "figure " + figure + " cfg " + ctx.hash);
  std::printf("plot-data figure=%s series=%zu -> %s\n", figure.c_str(), series.size(),
              out_path.string().c_str());
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"swin transformer semantic communication lab"};
  app.require_subcommand(1);

  struct Common {
    std::string config, out, alpha, snr_grid, figure;
    std::vector<std::string> sets;
    std::uint64_t seed = 0;
    CLI::App* sub = nullptr;
  };
  std::vector<Common> commands(6);
  const char* names[6] = {"train-local", "train-fed",       "evaluate",
                          "attack",      "partition-stats", "plot-data"};
  const char* descs[6] = {"train one client's model on its own shard",
                          "run federated rounds and save the global model",
                          "sweep a checkpoint over an snr grid",
                          "run a privacy attack against a checkpoint",
                          "partition the training set and report shard statistics",
                          "assemble plot-ready series from run artifacts"};
  for (int i = 0; i < 6; ++i) {
    auto& c = commands[i];
    c.sub = app.add_subcommand(names[i], descs[i]);
    c.sub->add_option("--config", c.config, "json config file");
    c.sub->add_option("--set", c.sets, "override, key.path=value")->take_all();
    c.sub->add_option("--seed", c.seed, "top-level seed override");
    c.sub->add_option("--out", c.out, "output directory override");
  }
  commands[0].sub->add_option("--alpha", commands[0].alpha, "dirichlet alpha shorthand");
  commands[1].sub->add_option("--alpha", commands[1].alpha, "dirichlet alpha shorthand");
  commands[4].sub->add_option("--alpha", commands[4].alpha, "dirichlet alpha shorthand");
  commands[2].sub->add_option("--snr-grid", commands[2].snr_grid, "comma-separated snr grid");
  commands[5].sub->add_option("--figure", commands[5].figure, "figure id shorthand");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    int which = -1;
    for (int i = 0; i < 6; ++i)
      if (commands[i].sub->parsed()) which = i;
    auto& c = commands[which];

    auto sets = c.sets;
    if (!c.alpha.empty()) {
      sets.push_back("federation.partition.kind=dirichlet");
      sets.push_back("federation.partition.alpha=" + c.alpha);
    }
    if (!c.snr_grid.empty()) sets.push_back("eval.snr_grid=" + c.snr_grid);
    if (!c.figure.empty()) sets.push_back("plot.figure=" + c.figure);

    Ctx ctx;
    ctx.tree = resolve_config(c.config, sets);
    if (c.sub->count("--seed") > 0)
      apply_override(ctx.tree, "seed=" + std::to_string(c.seed));
    const char* env_out = std::getenv("STSC_OUT_DIR");
    if (!c.out.empty())
      apply_override(ctx.tree, "io.out_dir=" + c.out);
    else if (env_out && *env_out)
      apply_override(ctx.tree, "io.out_dir=" + std::string(env_out));
    ctx.hash = config_hash(ctx.tree);
    ctx.cfg = config_from_json(ctx.tree);
    ctx.out = ctx.cfg.io.out_dir;
    fs::create_directories(ctx.out);

    std::printf("%s cfg=%s out=%s\n", names[which], ctx.hash.c_str(), ctx.out.string().c_str());
    switch (which) {
      case 0: return cmd_train_local(ctx);
      case 1: return cmd_train_fed(ctx);
      case 2: return cmd_evaluate(ctx);
      case 3: return cmd_attack(ctx);
      case 4: return cmd_partition_stats(ctx);
      default: return cmd_plot_data(ctx);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace stsc
