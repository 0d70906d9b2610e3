#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ebpr/common.hpp"

namespace ebpr {

struct RawInteraction {
  std::string user_id;
  std::string item_id;
  double value = 0.0;
  std::int64_t timestamp = 0;
  // 1-based line number in the source file; breaks timestamp ties.
  std::size_t line = 0;
};

// Column layout of a delimiter-separated interaction log. Column indices are
// 0-based; timestamp_column < 0 means "use the line number as timestamp".
struct FormatSpec {
  char delimiter = '\t';
  int user_column = 0;
  int item_column = 1;
  int value_column = 2;
  int timestamp_column = 3;
  bool skip_header = false;

  // Parses "<delim>:<cols>[:header]", e.g. "tab:u,i,r,t" or "comma:u,i,r:header".
  // Column letters: u user, i item, r value, t timestamp, '-' ignored.
  static FormatSpec parse(const std::string& text);
  std::string to_string() const;
};

struct LoadWarning {
  std::size_t line = 0;
  std::string message;
};

struct LoadResult {
  std::vector<RawInteraction> records;
  std::vector<LoadWarning> warnings;
};

// Throws DataError if the file cannot be opened. Malformed lines are skipped
// and reported in LoadResult::warnings.
LoadResult load_interactions(const std::filesystem::path& path,
                             const FormatSpec& format = {});
LoadResult parse_interactions(std::istream& in, const FormatSpec& format = {});

// Raw id <-> dense index bijections. Shared between a dataset and every
// dataset derived from it (train partitions, merged splits).
struct IdMaps {
  std::vector<std::string> users;
  std::vector<std::string> items;
  std::unordered_map<std::string, UserIndex> user_lookup;
  std::unordered_map<std::string, ItemIndex> item_lookup;

  static std::shared_ptr<const IdMaps> make(std::vector<std::string> users,
                                            std::vector<std::string> items);
};

struct Positive {
  ItemIndex item = 0;
  std::int64_t timestamp = 0;
  // Position in the source file; larger means later.
  std::size_t order = 0;
};

// Immutable binarized interaction store. Per-user positives are kept sorted by
// item index; an item -> users inverted index is built on construction.
class InteractionDataset {
 public:
  InteractionDataset();
  // Throws std::invalid_argument on out-of-range items, duplicate (u,i) pairs
  // or a positives table whose size differs from the user count.
  InteractionDataset(std::shared_ptr<const IdMaps> ids,
                     std::vector<std::vector<Positive>> positives);

  std::size_t n_users() const { return positives_.size(); }
  std::size_t n_items() const { return ids_->items.size(); }
  std::size_t interaction_count() const { return interaction_count_; }
  double sparsity() const;

  std::span<const Positive> positives(UserIndex u) const { return positives_[u]; }
  std::span<const UserIndex> item_users(ItemIndex i) const;
  std::size_t item_count(ItemIndex i) const { return item_users(i).size(); }
  bool contains(UserIndex u, ItemIndex i) const;

  const std::string& user_id(UserIndex u) const { return ids_->users[u]; }
  const std::string& item_id(ItemIndex i) const { return ids_->items[i]; }
  std::optional<UserIndex> find_user(const std::string& raw) const;
  std::optional<ItemIndex> find_item(const std::string& raw) const;
  const std::shared_ptr<const IdMaps>& ids() const { return ids_; }

  std::uint64_t fingerprint() const;

 private:
  std::shared_ptr<const IdMaps> ids_;
  std::vector<std::vector<Positive>> positives_;
  std::vector<std::size_t> item_offsets_;
  std::vector<UserIndex> item_user_list_;
  std::size_t interaction_count_ = 0;
};

// Keeps records with value > threshold, assigns dense indices in order of first
// appearance, and collapses duplicate (u,i) pairs keeping the latest record
// (largest timestamp, then latest line).
InteractionDataset binarize_and_index(const std::vector<RawInteraction>& raw,
                                      double threshold = 0.0);

// Single pass over users; items are never removed and keep their indices.
InteractionDataset filter_min_interactions(const InteractionDataset& ds,
                                           std::size_t min_interactions = 10);

// Drops items with fewer than min_count interactions (re-indexing items), then
// drops users left without positives. Used by the sparsity study.
InteractionDataset filter_min_item_interactions(const InteractionDataset& ds,
                                                std::size_t min_count);

struct Holdout {
  ItemIndex item = 0;
  std::vector<ItemIndex> negatives;  // ascending
};

struct LooSplit {
  InteractionDataset full;
  InteractionDataset train;
  std::vector<Holdout> test;        // one per user
  std::vector<Holdout> validation;  // one per user; empty once merged
  std::uint64_t seed = 0;
  std::size_t n_eval_negatives = 0;

  bool merged() const { return validation.empty(); }
};

// Leave-one-out split. The latest interaction (timestamp, then file order) is
// the test item, the latest remaining one the validation item. Evaluation
// negatives are drawn without replacement from the user's non-positives, test
// and validation lists disjoint. Throws DataError naming the offending user.
LooSplit loo_split(const InteractionDataset& ds, std::size_t n_eval_negatives,
                   std::uint64_t seed);

// Train on train + validation items; validation holdouts are dropped.
LooSplit merge_validation(const LooSplit& split);

// Same partition with evaluation negatives redrawn from `seed` (merged state kept).
LooSplit resample_eval_negatives(const LooSplit& split, std::uint64_t seed);

struct Triple {
  UserIndex user = 0;
  ItemIndex positive = 0;
  ItemIndex negative = 0;

  friend bool operator==(const Triple&, const Triple&) = default;
};

// One triple per positive of `train`, users ascending then items ascending.
// Negatives are uniform over items that are not positives of the user in
// `exclude` (normally the full dataset, so held-out items are never negatives).
std::vector<Triple> sample_training_triples(const InteractionDataset& train,
                                            const InteractionDataset& exclude,
                                            std::uint64_t epoch_seed);
std::vector<Triple> sample_training_triples(const LooSplit& split,
                                            std::uint64_t epoch_seed);

// Dataset artifact: users.tsv, items.tsv and interactions.tsv in `dir`.
void save_dataset(const InteractionDataset& ds, const std::filesystem::path& dir);
InteractionDataset load_dataset(const std::filesystem::path& dir);

// Split manifest, one row per user:
//   user_id <TAB> test_item <TAB> validation_item <TAB> test_negs <TAB> val_negs
// with item lists comma-separated raw item ids.
void write_split_manifest(const LooSplit& split, std::ostream& out);
LooSplit read_split_manifest(std::istream& in, const InteractionDataset& full);

}  // namespace ebpr
