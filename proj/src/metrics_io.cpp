#include "stsc/metrics_io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include "stsc/common.hpp"

namespace stsc {

namespace {

constexpr const char* kHeader =
    "experiment_id\tchannel\tsnr_db\tround\tmse\tpsnr_db\tssim\textras_json";

void check_field(const std::string& s, const char* what) {
  require<io_error>(s.find('\t') == std::string::npos && s.find('\n') == std::string::npos,
                    std::string(what) + " may not contain tabs or newlines");
  require<io_error>(!s.empty(), std::string(what) + " may not be empty");
}

void check_finite(double v, const char* what) {
  require<numeric_error>(std::isfinite(v), std::string(what) + " must be finite");
}

bool fresh_file(const std::string& path, bool append) {
  if (!append) return true;
  std::error_code ec;
  auto size = std::filesystem::file_size(path, ec);
  return ec || size == 0;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

double parse_num(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    require<io_error>(used == s.size(), "trailing junk in number");
    return v;
  } catch (const io_error&) {
    throw;
  } catch (const std::exception&) {
    throw io_error("bad number '" + s + "' in " + where);
  }
}

}  // namespace

std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

MetricsWriter::MetricsWriter(const std::string& path, bool append) : path_(path) {
  bool header = fresh_file(path, append);
  out_.open(path, append ? std::ios::app : std::ios::trunc);
  require<io_error>(out_.good(), "cannot open " + path + " for writing");
  if (header) out_ << kHeader << "\n";
}

void MetricsWriter::write(const MetricsRow& row) {
  check_field(row.experiment_id, "experiment_id");
  check_field(row.channel, "channel");
  check_finite(row.snr_db, "snr_db");
  check_finite(row.mse, "mse");
  check_finite(row.psnr_db, "psnr_db");
  check_finite(row.ssim, "ssim");
  require<io_error>(row.extras.is_object(), "extras_json must be a json object");
  out_ << row.experiment_id << '\t' << row.channel << '\t' << format_g(row.snr_db) << '\t'
       << row.round << '\t' << format_g(row.mse) << '\t' << format_g(row.psnr_db) << '\t'
       << format_g(row.ssim) << '\t' << row.extras.dump() << '\n';
  out_.flush();
  require<io_error>(out_.good(), "write failure on " + path_);
}

std::vector<MetricsRow> read_metrics_tsv(const std::string& path) {
  std::ifstream in(path);
  require<io_error>(in.good(), "cannot open " + path);
  std::string line;
  require<io_error>(static_cast<bool>(std::getline(in, line)), "empty metrics file " + path);
  require<io_error>(line == kHeader, "unexpected metrics header in " + path);
  std::vector<MetricsRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = split_tabs(line);
    std::string where = path + ":" + std::to_string(lineno);
    require<io_error>(cells.size() == 8, "wrong column count in " + where);
    MetricsRow row;
    row.experiment_id = cells[0];
    row.channel = cells[1];
    row.snr_db = parse_num(cells[2], where);
    row.round = static_cast<int>(parse_num(cells[3], where));
    row.mse = parse_num(cells[4], where);
    row.psnr_db = parse_num(cells[5], where);
    row.ssim = parse_num(cells[6], where);
    row.extras = nlohmann::json::parse(cells[7], nullptr, false);
    require<io_error>(!row.extras.is_discarded(), "bad extras json in " + where);
    rows.push_back(std::move(row));
  }
  return rows;
}

RoundsWriter::RoundsWriter(const std::string& path, bool append) {
  out_.open(path, append ? std::ios::app : std::ios::trunc);
  require<io_error>(out_.good(), "cannot open " + path + " for writing");
}

void RoundsWriter::write(const RoundLog& log) {
  check_finite(log.loss_global, "loss_global");
  for (double v : log.loss_k) check_finite(v, "loss_k");
  nlohmann::json j{{"t", log.t},
                   {"client_ids", log.client_ids},
                   {"loss_k", log.loss_k},
                   {"loss_global", log.loss_global}};
  if (log.psnr_eval) {
    check_finite(*log.psnr_eval, "psnr_eval");
    j["psnr_eval"] = *log.psnr_eval;
  }
  out_ << j.dump() << '\n';
  out_.flush();
  require<io_error>(out_.good(), "round log write failure");
}

std::vector<RoundLog> read_rounds_jsonl(const std::string& path) {
  std::ifstream in(path);
  require<io_error>(in.good(), "cannot open " + path);
  std::vector<RoundLog> logs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    require<io_error>(!j.is_discarded(),
                      "bad json at " + path + ":" + std::to_string(lineno));
    if (!j.contains("t")) continue;  // meta line (config echo), not a round
    RoundLog log;
    log.t = j.at("t").get<int>();
    log.client_ids = j.at("client_ids").get<std::vector<int>>();
    log.loss_k = j.at("loss_k").get<std::vector<double>>();
    log.loss_global = j.at("loss_global").get<double>();
    if (j.contains("psnr_eval")) log.psnr_eval = j["psnr_eval"].get<double>();
    logs.push_back(std::move(log));
  }
  return logs;
}

void write_plot_series(const std::string& path, const std::vector<PlotSeries>& series,
                       const std::string& comment) {
  require<io_error>(!series.empty(), "refusing to write an empty plot file");
  std::ostringstream buf;
  if (!comment.empty()) {
    require(comment.find('\n') == std::string::npos, "plot comment must be a single line");
    buf << "# " << comment << '\n';
  }
  buf << "series\tx\ty\n";
  for (const auto& s : series) {
    check_field(s.name, "series name");
    require<shape_error>(s.x.size() == s.y.size() && !s.x.empty(),
                         "series " + s.name + " needs matching non-empty x/y");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      check_finite(s.x[i], "plot x");
      check_finite(s.y[i], "plot y");
      buf << s.name << '\t' << format_g(s.x[i]) << '\t' << format_g(s.y[i]) << '\n';
    }
  }
  std::ofstream out(path, std::ios::trunc);
  require<io_error>(out.good(), "cannot open " + path + " for writing");
  out << buf.str();
  require<io_error>(out.good(), "write failure on " + path);
}

}  // namespace stsc
