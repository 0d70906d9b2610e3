#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ebpr/pipeline.hpp"
#include "gradcheck.hpp"
#include "naive.hpp"
#include "toy.hpp"
#include "weights.hpp"

using namespace ebpr;
namespace fs = std::filesystem;

namespace {

namespace tol {
constexpr std::size_t kUsers = 943;
constexpr std::size_t kItems = 1682;
constexpr std::size_t kInteractions = 100000;
constexpr double kIngestSeconds = 5.0;

constexpr double kAvgExplainability = 0.1043;
constexpr double kAvgExplainabilityTol = 0.005;
constexpr double kExplainabilitySeconds = 60.0;

constexpr double kBprNdcg = 0.3807;
constexpr double kEbprNdcg = 0.3821;
constexpr double kNdcgTol = 0.03;
constexpr double kProtocolSeconds = 2 * 3600.0;

constexpr std::size_t kGradPoints = 100;
constexpr double kGradRelErr = 1e-4;

constexpr std::size_t kOracleWorlds = 3;
constexpr std::size_t kOracleDraws = 10000;
constexpr double kOracleZ = 3.0;
constexpr double kOracleSeconds = 300.0;

constexpr double kNaiveRelErr = 1e-12;
}  // namespace tol

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

struct Context {
  fs::path data;
  fs::path work;
  unsigned threads = 1;
};

RunConfig base_config(const Context& ctx) {
  RunConfig cfg;
  cfg.data_path = ctx.data.string();
  cfg.out_dir = ctx.work.string();
  cfg.threads = ctx.threads;
  return cfg;
}

Outcome ingestion(const Context& ctx) {
  auto cfg = base_config(ctx);
  std::ostringstream log;
  const auto t0 = Clock::now();
  const auto s = cmd_ingest(cfg, log);
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = s.users == tol::kUsers && s.items == tol::kItems && s.interactions == tol::kInteractions &&
           secs < tol::kIngestSeconds;
  o.detail = "users=" + std::to_string(s.users) + " items=" + std::to_string(s.items) +
             " interactions=" + std::to_string(s.interactions) + " in " + fmt(secs, 2) + " s";
  return o;
}

InteractionDataset ingested_dataset(const Context& ctx) {
  const auto cfg = base_config(ctx);
  const auto raw = load_interactions(ctx.data, FormatSpec::parse(cfg.format));
  return filter_min_interactions(binarize_and_index(raw.records, cfg.threshold), cfg.min_user_interactions);
}

Outcome explainability_scale(const Context& ctx) {
  const auto t0 = Clock::now();
  const auto ds = ingested_dataset(ctx);
  auto nb = std::make_shared<const ItemNeighborhoods>(build_neighborhoods(ds, 20, ctx.threads));
  const double avg = average_explainability(build_explainability(ds, nb), ds);
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = std::abs(avg - tol::kAvgExplainability) <= tol::kAvgExplainabilityTol && secs < tol::kExplainabilitySeconds;
  o.detail = "average E at eta=20 is " + fmt(avg, 5) + " (target " + fmt(tol::kAvgExplainability) + " +- " +
             fmt(tol::kAvgExplainabilityTol, 3) + ") in " + fmt(secs, 2) + " s";
  return o;
}

// Shared by criteria 3 and 4: one full tune + retrain + evaluate run.
struct ProtocolRun {
  bool done = false;
  std::string error;
  double seconds = 0.0;
  std::map<std::string, std::map<std::string, MetricSummary>> summary;  // model -> metric
};

ProtocolRun& protocol(const Context& ctx) {
  static ProtocolRun run;
  if (run.done) return run;
  run.done = true;
  auto cfg = base_config(ctx);
  cfg.losses = {LossKind::bpr, LossKind::ebpr, LossKind::uebpr};
  const auto t0 = Clock::now();
  try {
    auto& log = std::cout;
    cmd_ingest(cfg, log);
    cmd_split(cfg, log);
    cmd_precompute(cfg, log);
    for (auto loss : cfg.losses) cmd_tune(cfg, loss, log);
    for (auto loss : cfg.losses) cmd_train(cfg, loss, log);
    run.seconds = seconds_since(t0);
    for (const auto& [model, s] : cmd_evaluate(cfg, log)) run.summary[model] = s.summary;
  } catch (const std::exception& e) {
    run.error = e.what();
  }
  return run;
}

double mean_of(const ProtocolRun& run, const std::string& model, const std::string& metric) {
  return run.summary.at(model).at(metric).mean;
}

Outcome table_reproduction(const Context& ctx) {
  const auto& run = protocol(ctx);
  if (!run.error.empty()) return {false, "protocol run failed: " + run.error};
  const double bpr = mean_of(run, "BPR", "NDCG"), ebpr = mean_of(run, "EBPR", "NDCG");
  const double mep_b = mean_of(run, "BPR", "MEP"), mep_e = mean_of(run, "EBPR", "MEP");
  const double wmep_b = mean_of(run, "BPR", "WMEP"), wmep_e = mean_of(run, "EBPR", "WMEP");
  const bool ndcg_ok = std::abs(bpr - tol::kBprNdcg) <= tol::kNdcgTol && std::abs(ebpr - tol::kEbprNdcg) <= tol::kNdcgTol;
  const bool order_ok = mep_e > mep_b && wmep_e > wmep_b;
  const bool time_ok = run.seconds < tol::kProtocolSeconds;
  Outcome o;
  o.pass = ndcg_ok && order_ok && time_ok;
  o.detail = "NDCG BPR=" + fmt(bpr) + " EBPR=" + fmt(ebpr) + " (+-" + fmt(tol::kNdcgTol, 2) + " of " +
             fmt(tol::kBprNdcg) + "/" + fmt(tol::kEbprNdcg) + "); MEP " + fmt(mep_e) + " vs " + fmt(mep_b) +
             "; WMEP " + fmt(wmep_e) + " vs " + fmt(wmep_b) + "; tune+train " + fmt(run.seconds / 60, 1) + " min";
  return o;
}

Outcome popularity_direction(const Context& ctx) {
  const auto& run = protocol(ctx);
  if (!run.error.empty()) return {false, "protocol run failed: " + run.error};
  const double pop_u = mean_of(run, "UEBPR", "Avg_Pop"), pop_b = mean_of(run, "BPR", "Avg_Pop");
  const double efd_u = mean_of(run, "UEBPR", "EFD"), efd_b = mean_of(run, "BPR", "EFD");
  Outcome o;
  o.pass = pop_u < pop_b && efd_u > efd_b;
  o.detail = "Avg_Pop UEBPR=" + fmt(pop_u) + " BPR=" + fmt(pop_b) + "; EFD UEBPR=" + fmt(efd_u) + " BPR=" + fmt(efd_b);
  return o;
}

Outcome gradient_correctness(const Context&) {
  Rng rng(20210701);
  const std::size_t n_users = 4, n_items = 8, k = 5, eta = 5;
  double worst = 0.0;
  std::size_t points = 0;
  for (auto kind : kAllLossKinds) {
    for (std::size_t p = 0; p < tol::kGradPoints; ++p) {
      std::vector<std::tuple<UserIndex, ItemIndex, std::uint32_t>> cells;
      for (UserIndex u = 0; u < n_users; ++u)
        for (ItemIndex i = 0; i < n_items; ++i) cells.emplace_back(u, i, static_cast<std::uint32_t>(uniform_index(rng, eta + 1)));
      const auto e = weights::explicit_e(n_users, n_items, eta, cells);
      PropensityModel prop;
      for (std::size_t i = 0; i < n_items; ++i) {
        prop.item.push_back(uniform_real(rng, 0.05, 1.0));
        prop.neighborhood.push_back(uniform_real(rng, 0.2, 3.0));
      }
      BasicFactorModel<double> m(n_users, n_items, k);
      for (auto& v : m.user_factors()) v = standard_normal(rng);
      for (auto& v : m.item_factors()) v = standard_normal(rng);
      const auto u = static_cast<UserIndex>(uniform_index(rng, n_users));
      const auto a = static_cast<ItemIndex>(uniform_index(rng, n_items));
      auto b = static_cast<ItemIndex>(uniform_index(rng, n_items - 1));
      if (b >= a) ++b;
      const Triple t{u, a, b};
      const double w = instance_weight(kind, t, {&e, &prop, false});
      const double l2 = p % 2 ? uniform_real(rng, 0.0, 1e-2) : 0.0;
      worst = std::max(worst, gradcheck::relative_error(m, t, w, l2));
      ++points;
    }
  }
  std::ostringstream d;
  d << points << " points over 5 losses, worst relative error " << std::scientific << std::setprecision(2) << worst
    << " (limit " << tol::kGradRelErr << ")";
  return {worst < tol::kGradRelErr, d.str()};
}

Outcome estimator_propositions(const Context& ctx) {
  const auto t0 = Clock::now();
  bool pass = true;
  std::ostringstream detail;
  for (std::size_t w = 0; w < tol::kOracleWorlds; ++w) {
    OracleOptions o;
    o.world.n_users = 6;
    o.world.n_items = 12;
    o.world.eta = 3;
    o.world.seed = derive_seed(2021, 100 + w);
    o.seed = derive_seed(2021, 200 + w);
    o.n_draws = tol::kOracleDraws;
    o.z_threshold = tol::kOracleZ;
    o.threads = ctx.threads;
    o.include_full_domain = false;
    const auto rep = run_oracle(o);
    if (!generate_world(o.world).has_partial_exposure()) pass = false;
    pass = pass && rep.passed();
    detail << (w ? "; " : "") << "world " << w << ':';
    for (const auto& c : rep.checks) detail << ' ' << c.name << " z=" << fmt(c.measurement.z(), 2);
  }
  const double secs = seconds_since(t0);
  pass = pass && secs < tol::kOracleSeconds;
  detail << "; " << fmt(secs, 1) << " s";
  return {pass, detail.str()};
}

Outcome brute_force(const Context&) {
  double worst_e = 0, worst_m = 0, worst_l = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto ds = toy::random_dataset(6, 12, 0.3, 500 + seed, 3);
    auto nb = std::make_shared<const ItemNeighborhoods>(build_neighborhoods(ds, 3));
    const auto e = build_explainability(ds, nb);
    const auto dense = naive::to_dense(ds);
    const auto ref_nb = naive::neighborhoods(dense, 12, 3);
    const auto ref_e = naive::explainability(dense, ref_nb, 3);
    for (UserIndex u = 0; u < 6; ++u)
      for (ItemIndex i = 0; i < 12; ++i) worst_e = std::max(worst_e, naive::rel_err(e.value(u, i), ref_e[u][i]));

    const auto split = merge_validation(loo_split(ds, 2, seed));
    const auto e_eval = explainability_for_phase(split, 3, Phase::evaluation);
    const auto theta = build_propensity_model(split.train, e_eval.neighborhoods()).clamped_items();
    const auto m = init_model(6, 12, 3, seed, 1.0);
    const auto rep = evaluate_loo(m, split, e_eval, theta, 3);
    std::vector<std::vector<double>> de(6, std::vector<double>(12));
    for (UserIndex u = 0; u < 6; ++u)
      for (ItemIndex i = 0; i < 12; ++i) de[u][i] = e_eval.value(u, i);
    const auto ref = naive::loo_metrics(m, split, de, theta, dense, 3);
    const std::pair<const char*, double> pairs[] = {{"NDCG", ref.ndcg}, {"HR", ref.hr},   {"MEP", ref.mep},
                                                    {"WMEP", ref.wmep}, {"EFD", ref.efd}, {"Avg_Pop", ref.avg_pop},
                                                    {"Div", ref.div}};
    for (const auto& [name, value] : pairs) worst_m = std::max(worst_m, naive::rel_err(rep.metrics.at(name), value));

    WorldOptions wo;
    wo.seed = seed;
    const auto world = generate_world(wo);
    for (auto domain : {TripleDomain::cross_neighborhood, TripleDomain::full}) {
      const naive::OracleNaive oracle{world, domain == TripleDomain::cross_neighborhood};
      for (std::uint64_t d = 0; d < 3; ++d) {
        const auto y = sample_interactions(world, d);
        worst_l = std::max(worst_l, naive::rel_err(empirical_estimator_loss(world, y, LossKind::puebpr, domain),
                                                   oracle.estimator(y, false)));
        worst_l = std::max(worst_l, naive::rel_err(empirical_estimator_loss(world, y, LossKind::uebpr, domain),
                                                   oracle.estimator(y, true)));
      }
    }
  }
  const double worst = std::max({worst_e, worst_m, worst_l});
  std::ostringstream d;
  d << "worst relative error: E " << worst_e << ", metrics " << worst_m << ", estimator losses " << worst_l
    << " (limit " << tol::kNaiveRelErr << ")";
  return {worst <= tol::kNaiveRelErr, d.str()};
}

Outcome vanishing_gradient(const Context& ctx) {
  const auto ds = toy::random_dataset(50, 80, 0.15, 77, 5);
  const auto split = loo_split(ds, 10, 3);
  const auto zero = weights::explicit_e(ds.n_users(), ds.n_items(), 20, {});
  TrainingConfig cfg;
  cfg.loss = LossKind::ebpr;
  cfg.seed = 11;
  cfg.l2 = 1e-3;
  cfg.max_epochs = 20;
  cfg.patience = 0;
  const auto trained = train(merge_validation(split), cfg, {&zero, nullptr, false}).model;
  const auto init = init_model(ds.n_users(), ds.n_items(), cfg.latent_dim, derive_seed(cfg.seed, 1));
  const bool identical = trained == init;

  const auto full = ingested_dataset(ctx);
  const auto rows = sparsity_study(full, 20, base_config(ctx).sparsity_min_counts, ctx.threads);
  bool monotone = rows.size() >= 2;
  std::ostringstream d;
  d << "zero-E EBPR after 20 epochs " << (identical ? "bit-identical" : "CHANGED") << "; sparsity->E:";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    d << ' ' << fmt(rows[k].sparsity, 3) << "->" << fmt(rows[k].average_explainability, 4);
    if (k > 0 && !(rows[k].sparsity > rows[k - 1].sparsity &&
                   rows[k].average_explainability < rows[k - 1].average_explainability)) {
      monotone = false;
    }
  }
  return {identical && monotone, d.str()};
}

Outcome weight_identities(const Context&) {
  Rng rng(99);
  std::size_t checked = 0, failures = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n_users = 1 + uniform_index(rng, 6), n_items = 2 + uniform_index(rng, 11);
    const std::size_t eta = 1 + uniform_index(rng, 30);
    std::vector<std::tuple<UserIndex, ItemIndex, std::uint32_t>> random_cells, bpr_cells;
    std::vector<std::vector<bool>> positive(n_users, std::vector<bool>(n_items));
    for (UserIndex u = 0; u < n_users; ++u)
      for (ItemIndex i = 0; i < n_items; ++i) {
        random_cells.emplace_back(u, i, static_cast<std::uint32_t>(uniform_index(rng, eta + 1)));
        positive[u][i] = uniform_unit(rng) < 0.5;
        if (positive[u][i]) bpr_cells.emplace_back(u, i, static_cast<std::uint32_t>(eta));
      }
    const auto e = weights::explicit_e(n_users, n_items, eta, random_cells);
    const auto e_bpr = weights::explicit_e(n_users, n_items, eta, bpr_cells);
    PropensityModel ones;
    ones.item.assign(n_items, 1.0);
    ones.neighborhood.assign(n_items, 1.0);
    PropensityModel item_ones = ones;
    for (auto& v : item_ones.neighborhood) v = uniform_real(rng, 0.1, 3.0);
    for (UserIndex u = 0; u < n_users; ++u)
      for (ItemIndex a = 0; a < n_items; ++a)
        for (ItemIndex b = 0; b < n_items; ++b) {
          if (a == b) continue;
          const Triple t{u, a, b};
          const double ebpr_w = instance_weight(LossKind::ebpr, t, {&e, nullptr, false});
          failures += instance_weight(LossKind::uebpr, t, {&e, &ones, false}) != ebpr_w;
          failures += instance_weight(LossKind::puebpr, t, {&e, &item_ones, false}) != ebpr_w;
          checked += 2;
          if (positive[u][a] && !positive[u][b]) {
            failures += instance_weight(LossKind::ebpr, t, {&e_bpr, nullptr, false}) !=
                        instance_weight(LossKind::bpr, t, {});
            ++checked;
          }
        }
  }
  return {failures == 0, std::to_string(checked) + " identities checked, " + std::to_string(failures) + " mismatches"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  Context ctx;
  std::string data;
  std::string work = "acceptance-run";
  std::vector<int> only;
  if (const char* env = std::getenv("EBPR_DATA_DIR")) data = (fs::path(env) / "ml-100k" / "u.data").string();
  app.add_option("-d,--data", data, "ml-100k u.data");
  app.add_option("-w,--work", work, "Scratch directory for the protocol run");
  app.add_option("--threads", ctx.threads, "Threads for neighborhoods and oracle draws");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  ctx.data = data;
  ctx.work = work;

  using Check = Outcome (*)(const Context&);
  const std::vector<std::pair<std::string, Check>> criteria{
      {"ingestion fidelity", ingestion},
      {"explainability scale", explainability_scale},
      {"table reproduction", table_reproduction},
      {"popularity-debiasing direction", popularity_direction},
      {"gradient correctness", gradient_correctness},
      {"estimator propositions", estimator_propositions},
      {"brute-force equivalences", brute_force},
      {"vanishing gradient and sparsity trend", vanishing_gradient},
      {"weight-reduction identities", weight_identities},
  };
  const std::set<int> selected(only.begin(), only.end());
  std::vector<std::string> lines;
  bool all = true;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[k].second(ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::ostringstream line;
    line << (o.pass ? "PASS" : "FAIL") << "  criterion " << id << " (" << criteria[k].first << "): " << o.detail;
    lines.push_back(line.str());
    std::cout << lines.back() << std::endl;
  }
  std::cout << "\nsummary\n";
  for (const auto& l : lines) std::cout << l << '\n';
  return all ? 0 : 1;
}
