#include "stsc/partition.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "stsc/common.hpp"

namespace stsc {

namespace {

void check_args(std::size_t n, int n_clients) {
  require(n_clients >= 1, "need at least one client");
  require(n >= static_cast<std::size_t>(n_clients),
          "fewer samples than clients cannot make non-empty shards");
}

void sort_clients(Partition& part) {
  for (auto& v : part.client_indices) std::sort(v.begin(), v.end());
}

}  // namespace

std::vector<int> largest_remainder_counts(const std::vector<double>& p, int total) {
  require(!p.empty() && total >= 0, "bad apportionment arguments");
  const int k = static_cast<int>(p.size());
  std::vector<int> counts(k, 0);
  std::vector<double> frac(k, 0.0);
  int assigned = 0;
  for (int i = 0; i < k; ++i) {
    double target = p[i] * total;
    counts[i] = static_cast<int>(target);
    frac[i] = target - counts[i];
    assigned += counts[i];
  }
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (frac[a] != frac[b]) return frac[a] > frac[b];
    if (p[a] != p[b]) return p[a] > p[b];
    return a < b;
  });
  for (int i = 0; assigned < total; ++i) {
    ++counts[order[i % k]];
    ++assigned;
  }
  return counts;
}

Partition partition_iid(const std::vector<std::uint8_t>& labels, int n_clients,
                        std::uint64_t seed) {
  check_args(labels.size(), n_clients);
  Rng rng(derive_seed(seed, "partition"));
  std::vector<int> idx(labels.size());
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx.begin(), idx.end());

  Partition part;
  part.client_indices.resize(n_clients);
  const int base = static_cast<int>(labels.size()) / n_clients;
  const int extra = static_cast<int>(labels.size()) % n_clients;
  std::size_t at = 0;
  for (int c = 0; c < n_clients; ++c) {
    int take = base + (c < extra ? 1 : 0);
    part.client_indices[c].assign(idx.begin() + at, idx.begin() + at + take);
    at += take;
  }
  sort_clients(part);
  return part;
}

Partition partition_dirichlet(const std::vector<std::uint8_t>& labels, int n_clients,
                              double alpha, std::uint64_t seed) {
  check_args(labels.size(), n_clients);
  require(alpha > 0.0, "dirichlet concentration must be positive");

  std::vector<std::vector<int>> by_class(kNumClasses);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require<shape_error>(labels[i] < kNumClasses, "label out of range");
    by_class[labels[i]].push_back(static_cast<int>(i));
  }

  Rng rng(derive_seed(seed, "partition"));
  std::vector<double> p(n_clients);

  constexpr int kAttempts = 100;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    Partition part;
    part.client_indices.resize(n_clients);
    for (int c = 0; c < kNumClasses; ++c) {
      auto pool = by_class[c];
      if (pool.empty()) continue;
      rng.shuffle(pool.begin(), pool.end());
      rng.dirichlet(alpha, p);
      auto counts = largest_remainder_counts(p, static_cast<int>(pool.size()));
      std::size_t at = 0;
      for (int k = 0; k < n_clients; ++k) {
        part.client_indices[k].insert(part.client_indices[k].end(), pool.begin() + at,
                                      pool.begin() + at + counts[k]);
        at += counts[k];
      }
    }
    bool ok = std::all_of(part.client_indices.begin(), part.client_indices.end(),
                          [](const auto& v) { return !v.empty(); });
    if (ok) {
      sort_clients(part);
      return part;
    }
  }
  throw config_error("dirichlet partition left a client empty after " +
                     std::to_string(kAttempts) +
                     " attempts; raise alpha or lower the client count");
}

void write_partition_manifest(const std::string& path, const Partition& part,
                              const std::vector<std::uint8_t>& labels) {
  std::ofstream out(path, std::ios::trunc);
  require<io_error>(out.good(), "cannot open " + path + " for writing");
  for (std::size_t c = 0; c < part.client_indices.size(); ++c) {
    const auto& idx = part.client_indices[c];
    std::vector<int> hist(kNumClasses, 0);
    for (int i : idx) {
      require<shape_error>(i >= 0 && static_cast<std::size_t>(i) < labels.size(),
                           "manifest index out of range");
      ++hist[labels[i]];
    }
    nlohmann::json j{{"client_id", static_cast<int>(c)},
                     {"size", idx.size()},
                     {"class_histogram", hist},
                     {"indices", idx}};
    out << j.dump() << '\n';
  }
  require<io_error>(out.good(), "write failure on " + path);
}

}  // namespace stsc
