#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace stsc {

struct MetricsRow {
  std::string experiment_id;
  std::string channel;
  double snr_db = 0.0;
  int round = 0;
  double mse = 0.0;
  double psnr_db = 0.0;
  double ssim = 0.0;
  nlohmann::json extras = nlohmann::json::object();
};

// tab-separated metrics log with a fixed column order; every row is flushed
// so partial runs stay readable
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path, bool append = false);
  void write(const MetricsRow& row);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
};

std::vector<MetricsRow> read_metrics_tsv(const std::string& path);

struct RoundLog {
  int t = 0;
  std::vector<int> client_ids;
  std::vector<double> loss_k;
  double loss_global = 0.0;
  std::optional<double> psnr_eval;
};

// one json object per line
class RoundsWriter {
 public:
  explicit RoundsWriter(const std::string& path, bool append = false);
  void write(const RoundLog& log);

 private:
  std::ofstream out_;
};

// lines that are valid json objects without a "t" key (run metadata echoes)
// are skipped
std::vector<RoundLog> read_rounds_jsonl(const std::string& path);

struct PlotSeries {
  std::string name;
  std::vector<double> x, y;
};

// tsv with a "series\tx\ty" header; a non-empty comment becomes a leading
// "# ..." line
void write_plot_series(const std::string& path, const std::vector<PlotSeries>& series,
                       const std::string& comment = "");

// %.10g, the formatting used across all text outputs
std::string format_g(double v);

}  // namespace stsc
