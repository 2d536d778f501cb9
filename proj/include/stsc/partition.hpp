#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stsc/dataset.hpp"
#include "stsc/rng.hpp"

namespace stsc {

struct Partition {
  std::vector<std::vector<int>> client_indices;  // sorted within each client
};

// integer apportionment of `total` by probabilities `p`: floor the targets,
// then hand out the remainder by largest fractional part (ties prefer the
// larger probability, then the lower index)
std::vector<int> largest_remainder_counts(const std::vector<double>& p, int total);

Partition partition_iid(const std::vector<std::uint8_t>& labels, int n_clients,
                        std::uint64_t seed);

// per-class Dirichlet(alpha) split across clients; a draw that leaves any
// client empty is retried a bounded number of times
Partition partition_dirichlet(const std::vector<std::uint8_t>& labels, int n_clients,
                              double alpha, std::uint64_t seed);

void write_partition_manifest(const std::string& path, const Partition& part,
                              const std::vector<std::uint8_t>& labels);

}  // namespace stsc
