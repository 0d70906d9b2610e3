#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <tuple>
#include <utility>
#include <vector>

#include "ebpr/explainability.hpp"
#include "ebpr/propensity.hpp"

namespace weights {

// E matrix with explicit counts at the given eta; cells: (user, item, count).
inline ebpr::ExplainabilityMatrix explicit_e(std::size_t n_users, std::size_t n_items, std::size_t eta,
                                            const std::vector<std::tuple<ebpr::UserIndex, ebpr::ItemIndex,
                                                                         std::uint32_t>>& cells) {
  std::vector<std::vector<ebpr::ExplainabilityMatrix::Entry>> rows(n_users);
  for (auto [u, i, c] : cells) if (c > 0) rows[u].push_back({i, c});
  for (auto& r : rows) std::sort(r.begin(), r.end(), [](auto& a, auto& b) { return a.item < b.item; });
  auto nb = std::make_shared<const ebpr::ItemNeighborhoods>(
      eta, std::vector<std::vector<ebpr::Neighbor>>(n_items));
  return ebpr::ExplainabilityMatrix(n_users, n_items, nb, ebpr::ExplainabilitySource::full, std::move(rows));
}

}  // namespace weights
