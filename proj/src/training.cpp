#include "ebpr/training.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

#include "ebpr/evaluation.hpp"

namespace ebpr {

const char* to_string(LossKind kind) {
  switch (kind) {
    case LossKind::bpr: return "BPR";
    case LossKind::ubpr: return "UBPR";
    case LossKind::ebpr: return "EBPR";
    case LossKind::puebpr: return "pUEBPR";
    case LossKind::uebpr: return "UEBPR";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (LossKind k : kAllLossKinds) {
    std::string name = to_string(k);
    std::transform(name.begin(), name.end(), name.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (name == lower) return k;
  }
  throw ConfigError("unknown loss '" + std::string(text) + "' (expected BPR, UBPR, EBPR, pUEBPR or UEBPR)");
}

bool needs_explainability(LossKind kind) {
  return kind == LossKind::ebpr || kind == LossKind::puebpr || kind == LossKind::uebpr;
}

bool needs_propensity(LossKind kind) {
  return kind == LossKind::ubpr || kind == LossKind::puebpr || kind == LossKind::uebpr;
}

bool needs_neighborhood_propensity(LossKind kind) { return kind == LossKind::uebpr; }

std::string describe(const TrainingConfig& cfg) {
  std::ostringstream out;
  out << "loss=" << to_string(cfg.loss) << '\n'
      << "latent_dim=" << cfg.latent_dim << '\n'
      << "batch_size=" << cfg.batch_size << '\n'
      << "l2=" << format_real(cfg.l2) << '\n'
      << "eta=" << cfg.eta << '\n'
      << "learning_rate=" << format_real(cfg.learning_rate) << '\n'
      << "max_epochs=" << cfg.max_epochs << '\n'
      << "patience=" << cfg.patience << '\n'
      << "seed=" << cfg.seed << '\n'
      << "weight_clip=" << (cfg.weight_clip ? "true" : "false") << '\n'
      << "threads=" << cfg.threads << '\n'
      << "eval_cutoff=" << cfg.eval_cutoff << '\n';
  return out.str();
}

void check_weight_inputs(LossKind kind, const WeightInputs& in) {
  if (needs_explainability(kind) && in.explainability == nullptr) {
    throw ConfigError(std::string(to_string(kind)) + " needs an explainability matrix");
  }
  if (needs_propensity(kind) && in.propensity == nullptr) {
    throw ConfigError(std::string(to_string(kind)) + " needs propensity estimates");
  }
  if (in.explainability && in.propensity &&
      in.explainability->n_items() != in.propensity->item.size()) {
    throw ConfigError("explainability and propensity item counts differ");
  }
}

double instance_weight(LossKind kind, const Triple& t, const WeightInputs& in) {
  double w = 1.0;
  switch (kind) {
    case LossKind::bpr:
      break;
    case LossKind::ubpr:
      w = 1.0 / in.propensity->item_denominator(t.positive);
      break;
    case LossKind::ebpr: {
      const auto& e = *in.explainability;
      w = e.value(t.user, t.positive) * (1.0 - e.value(t.user, t.negative));
      break;
    }
    case LossKind::puebpr: {
      const auto& e = *in.explainability;
      w = e.value(t.user, t.positive) * (1.0 - e.value(t.user, t.negative)) /
          in.propensity->item_denominator(t.positive);
      break;
    }
    case LossKind::uebpr: {
      const auto& e = *in.explainability;
      const auto& p = *in.propensity;
      w = (1.0 / p.item_denominator(t.positive)) *
          (e.value(t.user, t.positive) / p.neighborhood_denominator(t.positive)) *
          (1.0 - e.value(t.user, t.negative) / p.neighborhood_denominator(t.negative));
      break;
    }
  }
  if (in.clip) w = std::clamp(w, 0.0, 1.0);
  return w;
}

namespace {

void validate(const TrainingConfig& cfg) {
  if (cfg.latent_dim == 0) throw ConfigError("latent dimension K must be >= 1");
  if (cfg.batch_size == 0) throw ConfigError("batch size must be >= 1");
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw ConfigError("learning rate must be a finite number >= 0");
  }
  if (!(cfg.l2 >= 0.0) || !std::isfinite(cfg.l2)) throw ConfigError("l2 must be >= 0");
  if (cfg.threads == 0) throw ConfigError("threads must be >= 1");
  if (cfg.eval_cutoff == 0) throw ConfigError("evaluation cutoff must be >= 1");
}

// Parameter access is plain in the sequential trainer and relaxed-atomic in
// the lock-free one, so concurrent readers and writers are well defined.
template <bool Atomic>
float load(const float& x) {
  if constexpr (Atomic) {
    return std::atomic_ref<float>(const_cast<float&>(x)).load(std::memory_order_relaxed);
  } else {
    return x;
  }
}

template <bool Atomic>
void store(float& x, float v) {
  if constexpr (Atomic) {
    std::atomic_ref<float>(x).store(v, std::memory_order_relaxed);
  } else {
    x = v;
  }
}

// Gradient accumulator for one mini-batch. Rows are dense scratch buffers;
// only the rows a batch touched are applied and cleared.
class BatchGradient {
 public:
  BatchGradient(std::size_t n_users, std::size_t n_items, std::size_t k)
      : k_(k),
        user_(n_users * k, 0.0),
        item_(n_items * k, 0.0),
        user_touched_(n_users, 0),
        item_touched_(n_items, 0) {}

  double* user(UserIndex u) {
    if (!user_touched_[u]) {
      user_touched_[u] = 1;
      users_.push_back(u);
    }
    return user_.data() + static_cast<std::size_t>(u) * k_;
  }

  double* item(ItemIndex i) {
    if (!item_touched_[i]) {
      item_touched_[i] = 1;
      items_.push_back(i);
    }
    return item_.data() + static_cast<std::size_t>(i) * k_;
  }

  // Returns false if an updated parameter is non-finite.
  template <bool Atomic>
  bool apply(FactorModel& m, double lr) {
    bool finite = true;
    for (UserIndex u : users_) finite &= apply_row<Atomic>(m.user(u), user_.data() + std::size_t{u} * k_, lr);
    for (ItemIndex i : items_) finite &= apply_row<Atomic>(m.item(i), item_.data() + std::size_t{i} * k_, lr);
    for (UserIndex u : users_) user_touched_[u] = 0;
    for (ItemIndex i : items_) item_touched_[i] = 0;
    users_.clear();
    items_.clear();
    return finite;
  }

 private:
  template <bool Atomic>
  bool apply_row(std::span<float> row, double* grad, double lr) {
    bool finite = true;
    for (std::size_t d = 0; d < k_; ++d) {
      const float v = static_cast<float>(load<Atomic>(row[d]) - lr * grad[d]);
      finite &= std::isfinite(v);
      store<Atomic>(row[d], v);
      grad[d] = 0.0;
    }
    return finite;
  }

  std::size_t k_;
  std::vector<double> user_, item_;
  std::vector<char> user_touched_, item_touched_;
  std::vector<UserIndex> users_;
  std::vector<ItemIndex> items_;
};

// Accumulates the summed gradient of one batch at the pre-batch parameters
// and returns the summed weighted loss. Zero-weight triples contribute nothing,
// regularization included.
template <bool Atomic>
double accumulate_batch(const FactorModel& m, std::span<const Triple> batch, const TrainingConfig& cfg,
                        const WeightInputs& inputs, BatchGradient& grad, std::vector<float>& scratch) {
  const std::size_t k = cfg.latent_dim;
  double loss = 0.0;
  for (const Triple& t : batch) {
    const double w = instance_weight(cfg.loss, t, inputs);
    if (w == 0.0) continue;
    const auto p = m.user(t.user);
    const auto qp = m.item(t.positive);
    const auto qn = m.item(t.negative);
    float* pu = scratch.data();
    float* qpi = pu + k;
    float* qni = qpi + k;
    double f = 0.0;
    for (std::size_t d = 0; d < k; ++d) {
      pu[d] = load<Atomic>(p[d]);
      qpi[d] = load<Atomic>(qp[d]);
      qni[d] = load<Atomic>(qn[d]);
      f += static_cast<double>(pu[d]) * (static_cast<double>(qpi[d]) - qni[d]);
    }
    loss += w * softplus(-f);
    const double g = -w * sigmoid(-f);
    const double l2 = cfg.l2;
    double* gu = grad.user(t.user);
    double* gp = grad.item(t.positive);
    double* gn = grad.item(t.negative);
    for (std::size_t d = 0; d < k; ++d) {
      gu[d] += g * (static_cast<double>(qpi[d]) - qni[d]) + l2 * pu[d];
      gp[d] += g * pu[d] + l2 * qpi[d];
      gn[d] += -g * pu[d] + l2 * qni[d];
    }
  }
  return loss;
}

[[noreturn]] void throw_non_finite(std::size_t epoch, std::size_t batch) {
  throw NumericError("non-finite parameters after epoch " + std::to_string(epoch) + ", batch " +
                     std::to_string(batch) + "; lower the learning rate or enable weight clipping");
}

double run_epoch_sequential(FactorModel& m, std::span<const Triple> triples, const TrainingConfig& cfg,
                            const WeightInputs& inputs, BatchGradient& grad, std::size_t epoch) {
  std::vector<float> scratch(3 * cfg.latent_dim);
  double loss = 0.0;
  std::size_t batch = 0;
  for (std::size_t start = 0; start < triples.size(); start += cfg.batch_size, ++batch) {
    const auto n = std::min(cfg.batch_size, triples.size() - start);
    loss += accumulate_batch<false>(m, triples.subspan(start, n), cfg, inputs, grad, scratch);
    if (!grad.apply<false>(m, cfg.learning_rate)) throw_non_finite(epoch, batch + 1);
  }
  return loss;
}

double run_epoch_parallel(FactorModel& m, std::span<const Triple> triples, const TrainingConfig& cfg,
                          const WeightInputs& inputs, std::size_t epoch) {
  const std::size_t n_batches = (triples.size() + cfg.batch_size - 1) / cfg.batch_size;
  const unsigned n_threads = cfg.threads;
  std::vector<double> losses(n_threads, 0.0);
  std::atomic<std::size_t> bad_batch{0};
  {
    std::vector<std::jthread> workers;
    for (unsigned w = 0; w < n_threads; ++w) {
      workers.emplace_back([&, w] {
        BatchGradient grad(m.n_users(), m.n_items(), cfg.latent_dim);
        std::vector<float> scratch(3 * cfg.latent_dim);
        for (std::size_t b = w; b < n_batches; b += n_threads) {
          const auto start = b * cfg.batch_size;
          const auto n = std::min(cfg.batch_size, triples.size() - start);
          losses[w] += accumulate_batch<true>(m, triples.subspan(start, n), cfg, inputs, grad, scratch);
          if (!grad.apply<true>(m, cfg.learning_rate)) {
            std::size_t expected = 0;
            bad_batch.compare_exchange_strong(expected, b + 1);
            return;
          }
        }
      });
    }
  }
  if (bad_batch.load() != 0) throw_non_finite(epoch, bad_batch.load());
  double loss = 0.0;
  for (double l : losses) loss += l;
  return loss;
}

}  // namespace

TrainingResult train(const LooSplit& split, const TrainingConfig& cfg, const WeightInputs& inputs) {
  validate(cfg);
  check_weight_inputs(cfg.loss, inputs);
  const auto& tr = split.train;
  if (inputs.explainability &&
      (inputs.explainability->n_users() != tr.n_users() || inputs.explainability->n_items() != tr.n_items())) {
    throw ConfigError("explainability matrix shape does not match the training data");
  }
  if (inputs.propensity && inputs.propensity->item.size() != tr.n_items()) {
    throw ConfigError("propensity estimates do not match the training data");
  }

  TrainingResult result{init_model(tr.n_users(), tr.n_items(), cfg.latent_dim, derive_seed(cfg.seed, 1)), {}};
  FactorModel& model = result.model;
  auto& history = result.history;
  FactorModel best = model;
  double best_ndcg = -std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  const bool validate_epochs = !split.merged();
  const std::uint64_t sample_base = derive_seed(cfg.seed, 2);
  const std::uint64_t shuffle_base = derive_seed(cfg.seed, 3);
  BatchGradient grad(cfg.threads == 1 ? tr.n_users() : 0, cfg.threads == 1 ? tr.n_items() : 0,
                     cfg.latent_dim);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    auto triples = sample_training_triples(split, derive_seed(sample_base, epoch));
    Rng rng(derive_seed(shuffle_base, epoch));
    shuffle(triples, rng);
    const double loss = cfg.threads == 1
                            ? run_epoch_sequential(model, triples, cfg, inputs, grad, epoch)
                            : run_epoch_parallel(model, triples, cfg, inputs, epoch);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = triples.empty() ? 0.0 : loss / static_cast<double>(triples.size());
    if (!std::isfinite(rec.mean_loss)) throw_non_finite(epoch, 0);
    if (validate_epochs) {
      const auto r = evaluate_ranking(model, split, cfg.eval_cutoff, HoldoutSet::validation);
      rec.validation_ndcg = r.ndcg;
      rec.validation_hr = r.hr;
    }
    history.epochs.push_back(rec);
    if (!validate_epochs) {
      history.best_epoch = epoch;
      continue;
    }
    if (rec.validation_ndcg > best_ndcg) {
      best_ndcg = rec.validation_ndcg;
      best = model;
      history.best_epoch = epoch;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      history.early_stopped = true;
      break;
    }
  }
  if (validate_epochs) model = std::move(best);
  return result;
}

std::vector<TrainingConfig> sample_configurations(const TrainingConfig& base, const HyperGrid& grid,
                                                  std::size_t n_configs, std::uint64_t seed,
                                                  std::vector<std::string>* warnings) {
  std::vector<TrainingConfig> all;
  all.reserve(grid.size());
  for (auto k : grid.latent_dims) {
    for (auto b : grid.batch_sizes) {
      for (auto l2 : grid.l2) {
        TrainingConfig c = base;
        c.latent_dim = k;
        c.batch_size = b;
        c.l2 = l2;
        all.push_back(c);
      }
    }
  }
  if (all.empty()) throw ConfigError("hyper-parameter grid is empty");
  if (n_configs > all.size() && warnings) {
    warnings->push_back("grid has only " + std::to_string(all.size()) + " points; " +
                        std::to_string(n_configs) + " were requested, using all of them");
  }
  Rng rng(derive_seed(seed, 5));
  shuffle(all, rng);
  all.resize(std::min(n_configs, all.size()));
  return all;
}

SearchResult hyperparameter_search(const TrainingConfig& base, const HyperGrid& grid, std::size_t n_configs,
                                   std::size_t replicates, std::uint64_t seed, const TrialEvaluator& evaluate) {
  if (replicates == 0) throw ConfigError("need at least one replicate per configuration");
  SearchResult result;
  const auto configs = sample_configurations(base, grid, n_configs, seed, &result.warnings);
  // Every config sees the same replicate seeds, so comparisons are paired.
  const std::uint64_t rep_base = derive_seed(seed, 7);
  double best_mean = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < configs.size(); ++t) {
    TrialRecord rec;
    rec.config = configs[t];
    double sum = 0.0;
    for (std::size_t r = 0; r < replicates; ++r) {
      TrainingConfig c = configs[t];
      c.seed = derive_seed(rep_base, r);
      rec.replicates.push_back(evaluate(c));
      sum += rec.replicates.back().validation_ndcg;
    }
    rec.mean_ndcg = sum / static_cast<double>(replicates);
    if (rec.mean_ndcg > best_mean) {
      best_mean = rec.mean_ndcg;
      result.best_trial = t;
    }
    result.trials.push_back(std::move(rec));
  }
  result.best = result.trials[result.best_trial].config;
  return result;
}

SearchResult hyperparameter_search(const LooSplit& split, const TrainingConfig& base, const HyperGrid& grid,
                                   std::size_t n_configs, std::size_t replicates, std::uint64_t seed,
                                   const WeightInputs& inputs) {
  if (split.merged()) throw ConfigError("hyper-parameter search needs a validation set");
  std::vector<std::string> diverged;
  auto result = hyperparameter_search(base, grid, n_configs, replicates, seed, [&](const TrainingConfig& c) {
    TrialOutcome out;
    TrainingResult res;
    try {
      res = train(split, c, inputs);
    } catch (const NumericError& e) {
      diverged.push_back("K=" + std::to_string(c.latent_dim) + " batch=" + std::to_string(c.batch_size) +
                         " l2=" + format_real(c.l2) + " diverged and scores 0: " + e.what());
      return out;
    }
    const auto& h = res.history;
    out.best_epoch = h.best_epoch;
    out.validation_ndcg = h.best_epoch == 0 ? 0.0 : h.epochs[h.best_epoch - 1].validation_ndcg;
    return out;
  });
  result.warnings.insert(result.warnings.end(), diverged.begin(), diverged.end());
  return result;
}

TrainingConfig merged_retrain_config(const SearchResult& result) {
  if (result.trials.empty()) throw ConfigError("search result has no trials");
  const auto& trial = result.trials[result.best_trial];
  double sum = 0.0;
  for (const auto& r : trial.replicates) sum += static_cast<double>(r.best_epoch);
  TrainingConfig cfg = result.best;
  const double mean = trial.replicates.empty() ? 1.0 : sum / static_cast<double>(trial.replicates.size());
  cfg.max_epochs = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(mean)));
  cfg.patience = 0;
  return cfg;
}

void write_search_report(const SearchResult& result, std::ostream& out) {
  for (const auto& w : result.warnings) out << "# warning: " << w << '\n';
  out << "trial\tloss\tlatent_dim\tbatch_size\tl2\tmean_val_ndcg\tbest_epochs\n";
  for (std::size_t t = 0; t < result.trials.size(); ++t) {
    const auto& tr = result.trials[t];
    out << t << '\t' << to_string(tr.config.loss) << '\t' << tr.config.latent_dim << '\t'
        << tr.config.batch_size << '\t' << format_real(tr.config.l2) << '\t' << format_real(tr.mean_ndcg)
        << '\t';
    for (std::size_t r = 0; r < tr.replicates.size(); ++r) {
      if (r) out << ',';
      out << tr.replicates[r].best_epoch;
    }
    out << '\n';
  }
  out << "# best trial " << result.best_trial << ": latent_dim=" << result.best.latent_dim
      << " batch_size=" << result.best.batch_size << " l2=" << format_real(result.best.l2) << '\n';
}

}  // namespace ebpr
