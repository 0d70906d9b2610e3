#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <iterator>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ebpr/bias_oracle.hpp"
#include "ebpr/dataset.hpp"
#include "ebpr/evaluation.hpp"
#include "ebpr/propensity.hpp"
#include "ebpr/training.hpp"

namespace ebpr {

std::string version_string();

// Everything a run needs, as flat "key = value" text (to_map lists the keys).
struct RunConfig {
  std::string data_path;  // raw log; empty = $EBPR_DATA_DIR/ml-100k/u.data
  std::string format = "tab:u,i,r,t";
  double threshold = 0.0;
  std::size_t min_user_interactions = 10;
  std::string out_dir = "ebpr-run";

  TrainingConfig training;  // loss, K, batch, l2, eta, lr, epochs, patience
  std::vector<LossKind> losses{std::begin(kAllLossKinds), std::end(kAllLossKinds)};
  std::size_t cutoff = 10;
  std::size_t replicates = 5;
  std::size_t n_eval_negatives = 100;
  std::uint64_t seed = 2021;
  std::size_t search_configs = 15;
  std::size_t search_replicates = 2;
  NeighborhoodVariant variant = NeighborhoodVariant::paper_sum;
  double propensity_floor = kDefaultPropensityFloor;
  unsigned threads = 1;  // neighborhood construction and oracle draws

  std::vector<std::size_t> sweep_etas{5, 10, 20, 50, 100};
  std::vector<std::size_t> sparsity_min_counts{0, 5, 10, 20, 50, 100, 200};

  std::size_t oracle_users = 6;
  std::size_t oracle_items = 12;
  std::size_t oracle_eta = 3;
  std::size_t oracle_draws = 10000;

  // Throws ConfigError on an unknown key or a malformed value.
  void set(const std::string& key, const std::string& value);
  std::map<std::string, std::string> to_map() const;
  std::string to_text() const;  // "key = value" lines, sorted by key

  std::uint64_t split_seed() const { return derive_seed(seed, 1); }
  std::uint64_t search_seed() const { return derive_seed(seed, 2); }
  std::uint64_t train_seed() const { return derive_seed(seed, 3); }
  std::uint64_t oracle_seed() const { return derive_seed(seed, 4); }

  std::filesystem::path resolved_data_path() const;
};

// Reads "key = value" lines; '#' starts a comment.
void apply_config_text(RunConfig& cfg, std::istream& in, const std::string& origin = "config");
void load_config_file(RunConfig& cfg, const std::filesystem::path& path);

// Artifact layout under the output directory.
struct ArtifactPaths {
  std::filesystem::path root;

  explicit ArtifactPaths(std::filesystem::path dir) : root(std::move(dir)) {}
  std::filesystem::path dataset() const { return root / "dataset"; }
  std::filesystem::path ingest_report() const { return root / "ingest_report.txt"; }
  std::filesystem::path split() const { return root / "split.tsv"; }
  // stage: "tune" (train without validation), "retrain" (train + validation), "eval" (all data)
  std::filesystem::path neighborhoods(const std::string& stage) const;
  std::filesystem::path explainability(const std::string& stage) const;
  std::filesystem::path propensities(const std::string& stage) const;
  std::filesystem::path search_report(LossKind k) const;
  std::filesystem::path best_config(LossKind k) const;
  std::filesystem::path checkpoint(LossKind k, std::size_t replicate) const;
  std::filesystem::path training_log(LossKind k) const;
  std::filesystem::path report_table() const { return root / "report.txt"; }
  std::filesystem::path report_rows() const { return root / "report_rows.tsv"; }
  std::filesystem::path sweep_report() const { return root / "sweep_eta.tsv"; }
  std::filesystem::path sparsity_report() const { return root / "sparsity_study.tsv"; }
  std::filesystem::path oracle_report() const { return root / "oracle_report.txt"; }
  std::filesystem::path manifest(const std::string& command) const;
};

// Run manifest: command, version, config, derived seeds, dataset fingerprint
// and command-specific facts. No timestamps, so reruns are byte-identical.
void write_manifest(const ArtifactPaths& paths, const std::string& command, const RunConfig& cfg,
                    const std::vector<std::pair<std::string, std::string>>& facts);

struct IngestStats {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t interactions = 0;
  double sparsity = 0.0;
  std::size_t raw_records = 0;
  std::size_t malformed_lines = 0;
};

void write_ingest_report(const IngestStats& s, std::ostream& out);

// Subcommands. Each reads its prerequisites from the output directory, throws
// DataError naming the producing subcommand when one is missing, writes its
// artifacts plus a manifest, and prints a short summary to `log`.
IngestStats cmd_ingest(const RunConfig& cfg, std::ostream& log);
void cmd_split(const RunConfig& cfg, std::ostream& log);
void cmd_precompute(const RunConfig& cfg, std::ostream& log);
SearchResult cmd_tune(const RunConfig& cfg, LossKind loss, std::ostream& log);
void cmd_train(const RunConfig& cfg, LossKind loss, std::ostream& log);
std::vector<std::pair<std::string, ReplicateSummary>> cmd_evaluate(const RunConfig& cfg, std::ostream& log);
void cmd_sweep_eta(const RunConfig& cfg, std::ostream& log);

struct SparsityRow {
  std::size_t min_item_count = 0;
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t interactions = 0;
  double sparsity = 0.0;
  double average_explainability = 0.0;
};

// Average full-data E at cfg.training.eta after dropping items with fewer
// than each of cfg.sparsity_min_counts interactions.
std::vector<SparsityRow> sparsity_study(const InteractionDataset& ds, std::size_t eta,
                                        const std::vector<std::size_t>& min_counts, unsigned threads = 1);
std::vector<SparsityRow> cmd_sparsity_study(const RunConfig& cfg, std::ostream& log);

// Top-K (or one item) for a raw user id, with E and the liked neighbors.
void cmd_explain(const RunConfig& cfg, const std::string& user, const std::optional<std::string>& item,
                 std::size_t replicate, std::ostream& out);
OracleReport cmd_oracle(const RunConfig& cfg, std::ostream& log);
// ingest, split, precompute, then tune + train for every loss, then evaluate.
void cmd_pipeline(const RunConfig& cfg, bool skip_tune, std::ostream& log);

// Loads the dataset artifact (or throws naming `ingest`).
InteractionDataset load_dataset_artifact(const ArtifactPaths& paths);
LooSplit load_split_artifact(const ArtifactPaths& paths, const InteractionDataset& full);

}  // namespace ebpr
