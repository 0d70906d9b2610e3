#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ebpr/dataset.hpp"
#include "ebpr/explainability.hpp"
#include "ebpr/model.hpp"
#include "ebpr/propensity.hpp"

namespace ebpr {

enum class LossKind { bpr, ubpr, ebpr, puebpr, uebpr };

inline constexpr LossKind kAllLossKinds[] = {LossKind::bpr, LossKind::ubpr, LossKind::ebpr,
                                             LossKind::puebpr, LossKind::uebpr};

const char* to_string(LossKind kind);
LossKind parse_loss_kind(std::string_view text);  // case-insensitive
bool needs_explainability(LossKind kind);
bool needs_propensity(LossKind kind);
bool needs_neighborhood_propensity(LossKind kind);

struct TrainingConfig {
  LossKind loss = LossKind::bpr;
  std::size_t latent_dim = 20;
  std::size_t batch_size = 100;
  double l2 = 0.0;
  std::size_t eta = 20;
  double learning_rate = 0.05;
  std::size_t max_epochs = 200;
  std::size_t patience = 20;  // 0 disables early stopping
  std::uint64_t seed = 0;
  bool weight_clip = false;
  // 1 = deterministic sequential SGD. More threads switch to lock-free
  // parallel updates, which are not reproducible.
  unsigned threads = 1;
  std::size_t eval_cutoff = 10;

  friend bool operator==(const TrainingConfig&, const TrainingConfig&) = default;
};

// "key=value" lines, one per field, in a fixed order.
std::string describe(const TrainingConfig& cfg);

struct WeightInputs {
  const ExplainabilityMatrix* explainability = nullptr;
  const PropensityModel* propensity = nullptr;
  bool clip = false;
};

// Throws ConfigError if `kind` needs inputs that are missing.
void check_weight_inputs(LossKind kind, const WeightInputs& in);

// Per-triple loss weight for a sampled (positive, negative) pair, where the
// interaction indicators are Y+ = 1 and Y- = 0:
//   BPR 1, UBPR 1/th+, EBPR E+(1-E-), pUEBPR E+(1-E-)/th+,
//   UEBPR (1/th+)(E+/thN+)(1 - E-/thN-); clamped to [0,1] when in.clip is set.
double instance_weight(LossKind kind, const Triple& t, const WeightInputs& in);

// log(1 + e^x) without overflow.
inline double softplus(double x) {
  return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// w * -log sigmoid(f) = w * softplus(-f)
template <typename Real>
double triple_loss(const BasicFactorModel<Real>& m, const Triple& t, double w) {
  if (w == 0.0) return 0.0;
  return w * softplus(-preference(m, t.user, t.positive, t.negative));
}

// triple_loss plus (l2/2)(|P_u|^2 + |Q+|^2 + |Q-|^2), the objective whose
// gradient triple_gradient returns.
template <typename Real>
double regularized_triple_loss(const BasicFactorModel<Real>& m, const Triple& t, double w, double l2) {
  double sq = 0.0;
  for (auto v : m.user(t.user)) sq += static_cast<double>(v) * v;
  for (auto v : m.item(t.positive)) sq += static_cast<double>(v) * v;
  for (auto v : m.item(t.negative)) sq += static_cast<double>(v) * v;
  return triple_loss(m, t, w) + 0.5 * l2 * sq;
}

struct TripleGradient {
  double scale = 0.0;  // -w * sigmoid(-f)
  std::vector<double> user;
  std::vector<double> positive;
  std::vector<double> negative;
};

template <typename Real>
TripleGradient triple_gradient(const BasicFactorModel<Real>& m, const Triple& t, double w,
                               double l2 = 0.0) {
  const auto p = m.user(t.user);
  const auto qp = m.item(t.positive);
  const auto qn = m.item(t.negative);
  const std::size_t k = p.size();
  TripleGradient g;
  g.scale = w == 0.0 ? 0.0 : -w * sigmoid(-preference(m, t.user, t.positive, t.negative));
  g.user.resize(k);
  g.positive.resize(k);
  g.negative.resize(k);
  for (std::size_t d = 0; d < k; ++d) {
    const double pu = p[d], qpd = qp[d], qnd = qn[d];
    g.user[d] = g.scale * (qpd - qnd) + l2 * pu;
    g.positive[d] = g.scale * pu + l2 * qpd;
    g.negative[d] = -g.scale * pu + l2 * qnd;
  }
  return g;
}

struct EpochRecord {
  std::size_t epoch = 0;           // 1-based
  double mean_loss = 0.0;          // mean weighted triple loss
  double validation_ndcg = NAN;    // NaN when the split has no validation set
  double validation_hr = NAN;
};

struct TrainingHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based; 0 = untrained snapshot kept
  bool early_stopped = false;
};

struct TrainingResult {
  FactorModel model;
  TrainingHistory history;
};

// Per epoch: resample one negative per positive, shuffle, mini-batch SGD,
// then score the validation holdouts. Keeps the best-validation snapshot and
// stops on max_epochs or exhausted patience. On merged splits (no validation)
// it runs exactly max_epochs and returns the last model.
// Throws NumericError naming epoch and batch if parameters become non-finite.
TrainingResult train(const LooSplit& split, const TrainingConfig& cfg, const WeightInputs& inputs);

struct HyperGrid {
  std::vector<std::size_t> latent_dims{5, 10, 20, 50, 100};
  std::vector<std::size_t> batch_sizes{50, 100, 500};
  std::vector<double> l2{0.0, 1e-5, 1e-3};

  std::size_t size() const { return latent_dims.size() * batch_sizes.size() * l2.size(); }
};

// Uniform sample without replacement from the grid product. If the grid has
// fewer than n_configs points, every point is returned and a warning added.
std::vector<TrainingConfig> sample_configurations(const TrainingConfig& base, const HyperGrid& grid,
                                                  std::size_t n_configs, std::uint64_t seed,
                                                  std::vector<std::string>* warnings = nullptr);

struct TrialOutcome {
  double validation_ndcg = 0.0;
  std::size_t best_epoch = 0;
};

struct TrialRecord {
  TrainingConfig config;
  std::vector<TrialOutcome> replicates;
  double mean_ndcg = 0.0;
};

struct SearchResult {
  TrainingConfig best;
  std::size_t best_trial = 0;
  std::vector<TrialRecord> trials;
  std::vector<std::string> warnings;
};

// Runs one replicate of one configuration (config seed already set).
using TrialEvaluator = std::function<TrialOutcome(const TrainingConfig&)>;

// Each sampled config is run `replicates` times with derived seeds; the
// config with the largest mean validation NDCG wins (first one on ties).
SearchResult hyperparameter_search(const TrainingConfig& base, const HyperGrid& grid,
                                   std::size_t n_configs, std::size_t replicates, std::uint64_t seed,
                                   const TrialEvaluator& evaluate);

// Same, with real training on `split` using the given E / propensities. A
// replicate that diverges (NumericError) scores 0 and is listed in warnings.
SearchResult hyperparameter_search(const LooSplit& split, const TrainingConfig& base,
                                   const HyperGrid& grid, std::size_t n_configs,
                                   std::size_t replicates, std::uint64_t seed,
                                   const WeightInputs& inputs);

// Config for the merged train+validation retrain: the winning config with
// max_epochs set to the rounded mean best epoch of its replicates and early
// stopping off (there is no validation set left to stop on).
TrainingConfig merged_retrain_config(const SearchResult& result);

void write_search_report(const SearchResult& result, std::ostream& out);

}  // namespace ebpr
