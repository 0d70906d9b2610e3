#include "ebpr/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>

namespace ebpr {

std::size_t holdout_rank(const FactorModel& m, UserIndex u, const Holdout& h) {
  const double s = score(m, u, h.item);
  std::size_t rank = 1;
  for (ItemIndex n : h.negatives) {
    const double sn = score(m, u, n);
    if (sn > s || (sn == s && n < h.item)) ++rank;
  }
  return rank;
}

RankingMetrics ranking_from_ranks(std::span<const std::size_t> ranks, std::size_t k_cut) {
  RankingMetrics r;
  if (ranks.empty()) return r;
  for (auto rank : ranks) {
    if (rank <= k_cut) {
      r.hr += 1.0;
      r.ndcg += 1.0 / std::log2(1.0 + static_cast<double>(rank));
    }
  }
  r.hr /= static_cast<double>(ranks.size());
  r.ndcg /= static_cast<double>(ranks.size());
  return r;
}

namespace {

const std::vector<Holdout>& holdouts(const LooSplit& split, HoldoutSet which) {
  if (which == HoldoutSet::validation) {
    if (split.merged()) throw ConfigError("split has no validation holdouts");
    return split.validation;
  }
  return split.test;
}

}  // namespace

RankingMetrics evaluate_ranking(const FactorModel& m, const LooSplit& split, std::size_t k_cut,
                                HoldoutSet which) {
  const auto& hs = holdouts(split, which);
  std::vector<std::size_t> ranks(hs.size());
  for (UserIndex u = 0; u < hs.size(); ++u) ranks[u] = holdout_rank(m, u, hs[u]);
  return ranking_from_ranks(ranks, k_cut);
}

std::vector<RankedList> loo_top_k(const FactorModel& m, const LooSplit& split, std::size_t k_cut,
                                  HoldoutSet which) {
  const auto& hs = holdouts(split, which);
  std::vector<RankedList> lists;
  lists.reserve(hs.size());
  std::vector<ItemIndex> candidates;
  for (UserIndex u = 0; u < hs.size(); ++u) {
    candidates.assign(hs[u].negatives.begin(), hs[u].negatives.end());
    candidates.push_back(hs[u].item);
    lists.push_back(top_k(m, u, candidates, k_cut));
  }
  return lists;
}

ExplainabilityMetrics evaluate_explainability(std::span<const RankedList> lists,
                                              const ExplainabilityMatrix& e_eval, std::size_t k_cut) {
  ExplainabilityMetrics out;
  if (lists.empty()) return out;
  const double k = static_cast<double>(k_cut);
  for (const auto& list : lists) {
    std::size_t explainable = 0;
    double weight = 0.0;
    for (std::size_t pos = 0; pos < std::min(k_cut, list.items.size()); ++pos) {
      const double e = e_eval.value(list.user, list.items[pos]);
      if (e > 0.0) {
        ++explainable;
        weight += e;
      }
    }
    out.mep += static_cast<double>(explainable) / k;
    out.wmep += weight / k;
  }
  out.mep /= static_cast<double>(lists.size());
  out.wmep /= static_cast<double>(lists.size());
  return out;
}

PopularityMetrics evaluate_popularity(std::span<const RankedList> lists, std::span<const double> theta,
                                      const InteractionDataset& ds, std::size_t k_cut) {
  PopularityMetrics out;
  if (lists.empty()) return out;
  const double k = static_cast<double>(k_cut);
  for (const auto& list : lists) {
    const std::size_t n = std::min(k_cut, list.items.size());
    double efd = 0.0, pop = 0.0, div = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      const double t = theta[list.items[a]];
      if (!(t > 0.0)) {
        throw NumericError("propensity of item " + ds.item_id(list.items[a]) +
                           " is not positive; apply the propensity floor before computing EFD");
      }
      efd += -std::log2(t);
      pop += t;
      for (std::size_t b = a + 1; b < n; ++b) div += cosine_item_similarity(ds, list.items[a], list.items[b]);
    }
    out.efd += efd / k;
    out.avg_pop += pop / k;
    if (k_cut > 1) out.div += div / (k * (k - 1.0));
  }
  const double users = static_cast<double>(lists.size());
  out.efd /= users;
  out.avg_pop /= users;
  out.div /= users;
  return out;
}

double average_precision_at_k(std::span<const bool> relevant, std::size_t n_relevant, std::size_t k_cut) {
  const std::size_t denom = std::min(k_cut, n_relevant);
  if (denom == 0) return 0.0;
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t pos = 0; pos < std::min(k_cut, relevant.size()); ++pos) {
    if (relevant[pos]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(pos + 1);
    }
  }
  return sum / static_cast<double>(denom);
}

double binary_ndcg_at_k(std::span<const bool> relevant, std::size_t n_relevant, std::size_t k_cut) {
  const std::size_t ideal_hits = std::min(k_cut, n_relevant);
  if (ideal_hits == 0) return 0.0;
  double dcg = 0.0, idcg = 0.0;
  for (std::size_t pos = 0; pos < std::min(k_cut, relevant.size()); ++pos) {
    if (relevant[pos]) dcg += 1.0 / std::log2(static_cast<double>(pos) + 2.0);
  }
  for (std::size_t pos = 0; pos < ideal_hits; ++pos) idcg += 1.0 / std::log2(static_cast<double>(pos) + 2.0);
  return dcg / idcg;
}

UnbiasedMetrics evaluate_unbiased_testset(const FactorModel& m, std::span<const RatedUser> testset,
                                          std::size_t k_cut, double relevance_threshold) {
  UnbiasedMetrics out;
  std::vector<std::pair<double, const RatedItem*>> scored;
  for (const auto& ru : testset) {
    std::size_t n_rel = 0;
    for (const auto& it : ru.items) n_rel += it.rating >= relevance_threshold;
    if (n_rel == 0) {
      ++out.users_excluded;
      continue;
    }
    scored.clear();
    for (const auto& it : ru.items) scored.emplace_back(score(m, ru.user, it.item), &it);
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second->item < b.second->item;
    });
    auto rel = std::make_unique<bool[]>(scored.size());
    for (std::size_t k = 0; k < scored.size(); ++k) rel[k] = scored[k].second->rating >= relevance_threshold;
    const std::span<const bool> flags(rel.get(), scored.size());
    out.map += average_precision_at_k(flags, n_rel, k_cut);
    out.ndcg += binary_ndcg_at_k(flags, n_rel, k_cut);
    ++out.users_evaluated;
  }
  if (out.users_evaluated > 0) {
    out.map /= static_cast<double>(out.users_evaluated);
    out.ndcg /= static_cast<double>(out.users_evaluated);
  }
  return out;
}

const char* to_string(Protocol p) { return p == Protocol::loo_101 ? "loo_101" : "unbiased_testset"; }

EvalReport evaluate_loo(const FactorModel& m, const LooSplit& split, const ExplainabilityMatrix& e_eval,
                        std::span<const double> clamped_theta, std::size_t k_cut) {
  EvalReport report;
  report.protocol = Protocol::loo_101;
  report.cutoff = k_cut;
  report.seed = split.seed;
  const auto ranking = evaluate_ranking(m, split, k_cut);
  const auto lists = loo_top_k(m, split, k_cut);
  const auto expl = evaluate_explainability(lists, e_eval, k_cut);
  const auto pop = evaluate_popularity(lists, clamped_theta, split.full, k_cut);
  report.metrics = {{"NDCG", ranking.ndcg}, {"HR", ranking.hr},       {"MEP", expl.mep},
                    {"WMEP", expl.wmep},    {"EFD", pop.efd},         {"Avg_Pop", pop.avg_pop},
                    {"Div", pop.div}};
  return report;
}

ReplicateSummary run_replicates(std::size_t n, std::uint64_t seed, const ReplicateRunner& run) {
  if (n == 0) throw ConfigError("need at least one replicate");
  ReplicateSummary out;
  for (std::size_t r = 0; r < n; ++r) out.replicates.push_back(run(r, derive_seed(seed, r)));
  for (const auto& [name, _] : out.replicates.front().metrics) {
    double sum = 0.0;
    for (const auto& rep : out.replicates) sum += rep.metrics.at(name);
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (const auto& rep : out.replicates) ss += (rep.metrics.at(name) - mean) * (rep.metrics.at(name) - mean);
    out.summary[name] = {mean, n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0};
  }
  return out;
}

ReplicateSummary run_replicates(const LooSplit& split, const TrainingConfig& cfg, std::size_t n,
                                const ReplicateOptions& options) {
  const LooSplit rsplit = options.merged && !split.merged() ? merge_validation(split) : split;
  const auto e_train = explainability_for_phase(rsplit, cfg.eta, Phase::training, options.threads);
  const auto e_eval = explainability_for_phase(rsplit, cfg.eta, Phase::evaluation, options.threads);
  const auto prop = build_propensity_model(rsplit.train, e_train.neighborhoods(), options.variant,
                                           options.propensity_floor);
  const auto theta = prop.clamped_items();
  return run_replicates(n, cfg.seed, [&](std::size_t r, std::uint64_t rs) {
    TrainingConfig rcfg = cfg;
    rcfg.seed = rs;
    const auto result = train(rsplit, rcfg, {&e_train, &prop, cfg.weight_clip});
    const auto eval_split = resample_eval_negatives(rsplit, replicate_negative_seed(split.seed, r));
    auto report = evaluate_loo(result.model, eval_split, e_eval, theta, options.k_cut);
    report.seed = rs;
    return report;
  });
}

void write_report_rows(const std::string& model, const ReplicateSummary& s, std::ostream& out) {
  for (std::size_t r = 0; r < s.replicates.size(); ++r) {
    for (const auto& [name, value] : s.replicates[r].metrics) {
      out << model << '\t' << name << '\t' << r << '\t' << format_real(value) << '\n';
    }
  }
  for (const auto& [name, m] : s.summary) {
    out << model << '\t' << name << "\tmean\t" << format_real(m.mean) << '\n';
    out << model << '\t' << name << "\tstd\t" << format_real(m.stddev) << '\n';
  }
}

void write_report_table(const std::vector<std::pair<std::string, ReplicateSummary>>& rows, std::ostream& out) {
  std::vector<std::string> names;
  for (const auto& n : loo_metric_names()) names.push_back(n);
  for (const auto& [_, s] : rows) {
    for (const auto& [name, __] : s.summary) {
      if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(name);
    }
  }
  // Only columns that at least one row carries.
  std::erase_if(names, [&](const std::string& n) {
    return std::none_of(rows.begin(), rows.end(), [&](const auto& r) { return r.second.summary.count(n) > 0; });
  });
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::left << std::setw(10) << "model";
  for (const auto& n : names) out << std::right << std::setw(18) << n;
  out << '\n';
  out << std::fixed << std::setprecision(4);
  for (const auto& [model, s] : rows) {
    out << std::left << std::setw(10) << model;
    for (const auto& n : names) {
      const auto it = s.summary.find(n);
      if (it == s.summary.end()) {
        out << std::right << std::setw(18) << "-";
      } else {
        std::ostringstream cell;
        cell << std::fixed << std::setprecision(4) << it->second.mean << "+-" << it->second.stddev;
        out << std::right << std::setw(18) << cell.str();
      }
    }
    out << '\n';
  }
  out.flags(flags);
  out.precision(precision);
}

}  // namespace ebpr
