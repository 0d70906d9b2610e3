#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "ebpr/common.hpp"
#include "ebpr/dataset.hpp"

namespace ebpr {

struct Neighbor {
  ItemIndex item = 0;
  double similarity = 0.0;
};

// Top-eta item neighborhoods. Each list is sorted by similarity descending,
// ties by ascending item index, never contains the item itself and never
// contains zero-similarity items (so it may be shorter than eta).
class ItemNeighborhoods {
 public:
  ItemNeighborhoods() = default;
  ItemNeighborhoods(std::size_t eta, std::vector<std::vector<Neighbor>> lists);

  std::size_t eta() const { return eta_; }
  std::size_t n_items() const { return lists_.size(); }
  std::span<const Neighbor> of(ItemIndex i) const { return lists_[i]; }
  bool contains(ItemIndex i, ItemIndex j) const;

 private:
  std::size_t eta_ = 0;
  std::vector<std::vector<Neighbor>> lists_;
};

// Cosine of the binary interaction columns of i and j; 0 if either is empty.
double cosine_item_similarity(const InteractionDataset& ds, ItemIndex i, ItemIndex j);

// Exact top-eta selection. Ties are resolved on exact integer cross products,
// not on rounded doubles. Work is split over `threads` workers; the result
// does not depend on the thread count.
ItemNeighborhoods build_neighborhoods(const InteractionDataset& ds, std::size_t eta,
                                      unsigned threads = 1);

enum class ExplainabilitySource { train_only, full };

const char* to_string(ExplainabilitySource source);

// Sparse E. Entries are stored as integer neighbor counts c, with E = c / eta,
// so the counting identity holds exactly; absent entries are zero.
class ExplainabilityMatrix {
 public:
  struct Entry {
    ItemIndex item = 0;
    std::uint32_t count = 0;
  };

  ExplainabilityMatrix() = default;
  ExplainabilityMatrix(std::size_t n_users, std::size_t n_items,
                       std::shared_ptr<const ItemNeighborhoods> neighborhoods,
                       ExplainabilitySource source, std::vector<std::vector<Entry>> rows);

  double value(UserIndex u, ItemIndex i) const;
  std::uint32_t count(UserIndex u, ItemIndex i) const;
  std::span<const Entry> row(UserIndex u) const { return rows_[u]; }

  std::size_t n_users() const { return n_users_; }
  std::size_t n_items() const { return n_items_; }
  std::size_t eta() const { return neighborhoods_ ? neighborhoods_->eta() : 0; }
  std::size_t stored_entries() const;
  ExplainabilitySource source() const { return source_; }
  const ItemNeighborhoods& neighborhoods() const { return *neighborhoods_; }
  const std::shared_ptr<const ItemNeighborhoods>& shared_neighborhoods() const {
    return neighborhoods_;
  }

 private:
  std::size_t n_users_ = 0;
  std::size_t n_items_ = 0;
  std::shared_ptr<const ItemNeighborhoods> neighborhoods_;
  ExplainabilitySource source_ = ExplainabilitySource::full;
  std::vector<std::vector<Entry>> rows_;  // each sorted by item
};

// E_ui = |N_i ∩ I_u^+| / eta. The denominator stays eta for short neighborhoods.
ExplainabilityMatrix build_explainability(const InteractionDataset& ds,
                                          std::shared_ptr<const ItemNeighborhoods> nbrs,
                                          ExplainabilitySource source = ExplainabilitySource::full);

enum class Phase { training, evaluation };

// training: neighborhoods and E from split.train (held-out items hidden).
// evaluation: from split.full.
ExplainabilityMatrix explainability_for_phase(const LooSplit& split, std::size_t eta, Phase phase,
                                              unsigned threads = 1);

// Mean of E over all of U x I, zeros included.
double average_explainability(const ExplainabilityMatrix& e, const InteractionDataset& ds);

struct Explanation {
  UserIndex user = 0;
  ItemIndex item = 0;
  double explainability = 0.0;
  std::vector<Neighbor> liked_neighbors;  // similarity descending
};

Explanation explain_recommendation(UserIndex u, ItemIndex i, const ItemNeighborhoods& nbrs,
                                   const InteractionDataset& ds);

// Text artifacts. Neighborhoods: "# eta=<n>" then one row per item,
//   item_id <TAB> neighbor_id:similarity,...
// Explainability: "# eta=<n> source=<tag> n_users=.. n_items=.." then
//   user_id <TAB> item_id <TAB> count <TAB> E
void write_neighborhoods(const ItemNeighborhoods& nbrs, const InteractionDataset& ds,
                         std::ostream& out);
ItemNeighborhoods read_neighborhoods(std::istream& in, const InteractionDataset& ds);
void write_explainability(const ExplainabilityMatrix& e, const InteractionDataset& ds,
                          std::ostream& out);
ExplainabilityMatrix read_explainability(std::istream& in, const InteractionDataset& ds,
                                         std::shared_ptr<const ItemNeighborhoods> nbrs);

}  // namespace ebpr
