#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ebpr/dataset.hpp"
#include "ebpr/explainability.hpp"
#include "ebpr/model.hpp"
#include "ebpr/propensity.hpp"
#include "ebpr/training.hpp"

namespace ebpr {

enum class HoldoutSet { test, validation };

// 1-based rank of the held-out item among itself and its negatives, ordered
// by score descending with ties broken by ascending item index.
std::size_t holdout_rank(const FactorModel& m, UserIndex u, const Holdout& h);

struct RankingMetrics {
  double hr = 0.0;
  double ndcg = 0.0;
};

// HR@K = mean [rank <= K]; NDCG@K = mean 1/log2(1 + rank) for rank <= K.
RankingMetrics ranking_from_ranks(std::span<const std::size_t> ranks, std::size_t k_cut);
RankingMetrics evaluate_ranking(const FactorModel& m, const LooSplit& split, std::size_t k_cut = 10,
                                HoldoutSet which = HoldoutSet::test);

// Top-K of every user's holdout candidate set (held-out item + negatives).
std::vector<RankedList> loo_top_k(const FactorModel& m, const LooSplit& split, std::size_t k_cut = 10,
                                  HoldoutSet which = HoldoutSet::test);

struct ExplainabilityMetrics {
  double mep = 0.0;
  double wmep = 0.0;
};

// MEP@K = mean_u |{i in TopK(u): E_ui > 0}| / K;
// WMEP@K = mean_u (sum of E_ui over those items) / K.
ExplainabilityMetrics evaluate_explainability(std::span<const RankedList> lists,
                                              const ExplainabilityMatrix& e_eval, std::size_t k_cut = 10);

struct PopularityMetrics {
  double efd = 0.0;
  double avg_pop = 0.0;
  double div = 0.0;
};

// EFD@K = mean_u (1/K) sum -log2 theta_i; Avg_Pop@K = mean_u (1/K) sum theta_i;
// Div@K = mean_u 1/(K(K-1)) sum_{i<j} cos(i,j). `theta` must already carry the
// propensity floor; a non-positive value reaching the logarithm is a NumericError.
PopularityMetrics evaluate_popularity(std::span<const RankedList> lists, std::span<const double> theta,
                                      const InteractionDataset& ds, std::size_t k_cut = 10);

struct RatedItem {
  ItemIndex item = 0;
  double rating = 0.0;
};

struct RatedUser {
  UserIndex user = 0;
  std::vector<RatedItem> items;
};

struct UnbiasedMetrics {
  double ndcg = 0.0;
  double map = 0.0;
  std::size_t users_evaluated = 0;
  std::size_t users_excluded = 0;  // no relevant item
};

// AP@K with denominator min(K, #relevant); `relevant` is in predicted order.
double average_precision_at_k(std::span<const bool> relevant, std::size_t n_relevant, std::size_t k_cut);
// Binary-gain NDCG@K; ideal DCG from min(K, #relevant) leading hits.
double binary_ndcg_at_k(std::span<const bool> relevant, std::size_t n_relevant, std::size_t k_cut);

// Ranks each user's rated items by model score; relevance = rating >= threshold.
UnbiasedMetrics evaluate_unbiased_testset(const FactorModel& m, std::span<const RatedUser> testset,
                                          std::size_t k_cut = 5, double relevance_threshold = 4.0);

enum class Protocol { loo_101, unbiased_testset };

const char* to_string(Protocol p);

struct EvalReport {
  Protocol protocol = Protocol::loo_101;
  std::size_t cutoff = 10;
  std::uint64_t seed = 0;
  std::map<std::string, double> metrics;
};

inline const std::vector<std::string>& loo_metric_names() {
  static const std::vector<std::string> names{"NDCG", "HR", "MEP", "WMEP", "EFD", "Avg_Pop", "Div"};
  return names;
}

// All seven LOO metrics on the test holdouts.
EvalReport evaluate_loo(const FactorModel& m, const LooSplit& split, const ExplainabilityMatrix& e_eval,
                        std::span<const double> clamped_theta, std::size_t k_cut = 10);

struct MetricSummary {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for one replicate
};

struct ReplicateSummary {
  std::vector<EvalReport> replicates;
  std::map<std::string, MetricSummary> summary;
};

using ReplicateRunner = std::function<EvalReport(std::size_t replicate, std::uint64_t seed)>;

// Replicate r gets seed derive_seed(seed, r); reports are averaged per metric.
ReplicateSummary run_replicates(std::size_t n, std::uint64_t seed, const ReplicateRunner& run);

struct ReplicateOptions {
  std::size_t k_cut = 10;
  bool merged = true;  // retrain on train + validation
  NeighborhoodVariant variant = NeighborhoodVariant::paper_sum;
  double propensity_floor = kDefaultPropensityFloor;
  unsigned threads = 1;  // for neighborhood construction only
};

// Seed of replicate r's evaluation negatives.
inline std::uint64_t replicate_negative_seed(std::uint64_t split_seed, std::size_t r) {
  return derive_seed(split_seed, 1000 + r);
}

// Training partition (merged into train + validation unless options.merged is
// off), train-phase E at cfg.eta and propensities are fixed; replicate r trains
// with seed derive_seed(cfg.seed, r) and is scored with evaluate_loo against
// test negatives redrawn from replicate_negative_seed(split.seed, r).
ReplicateSummary run_replicates(const LooSplit& split, const TrainingConfig& cfg, std::size_t n,
                                const ReplicateOptions& options = {});

// Machine-readable rows "model<TAB>metric<TAB>replicate<TAB>value"; the
// replicate column is "mean" / "std" for summary rows.
void write_report_rows(const std::string& model, const ReplicateSummary& s, std::ostream& out);
// Aligned text table, one row per model, mean over replicates.
void write_report_table(const std::vector<std::pair<std::string, ReplicateSummary>>& rows,
                        std::ostream& out);

}  // namespace ebpr
