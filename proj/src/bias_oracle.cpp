#include "ebpr/bias_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <thread>

namespace ebpr {

bool SyntheticWorld::has_partial_exposure() const {
  return std::any_of(theta.begin(), theta.end(), [](double t) { return t < 1.0; });
}

const char* to_string(TripleDomain d) {
  return d == TripleDomain::full ? "full" : "cross_neighborhood";
}

SyntheticWorld generate_world(const WorldOptions& o) {
  if (o.eta == 0) throw ConfigError("oracle world needs eta >= 1");
  if (o.n_items < o.eta + 1) throw ConfigError("oracle world needs at least eta + 1 items");
  if (o.n_users == 0) throw ConfigError("oracle world needs at least one user");
  if (!(o.theta_min > 0.0) || o.theta_max > 1.0 || o.theta_min > o.theta_max) {
    throw ConfigError("exposure range must lie in (0, 1]");
  }
  if (o.gamma_min < 0.0 || o.gamma_max > 1.0 || o.gamma_min > o.gamma_max) {
    throw ConfigError("relevance range must lie in [0, 1]");
  }

  SyntheticWorld w;
  w.n_users = o.n_users;
  w.n_items = o.n_items;
  w.eta = o.eta;
  w.block_constant = o.block_constant;

  const std::size_t block_size = o.eta + 1;
  const std::size_t n_blocks = o.n_items / block_size;
  w.block_of.resize(o.n_items);
  for (std::size_t i = 0; i < o.n_items; ++i) w.block_of[i] = std::min(i / block_size, n_blocks - 1);

  std::vector<std::vector<Neighbor>> lists(o.n_items);
  for (std::size_t b = 0; b < n_blocks; ++b) {
    const std::size_t first = b * block_size;
    const std::size_t last = b + 1 == n_blocks ? o.n_items : first + block_size;
    const std::size_t len = last - first;
    for (std::size_t i = first; i < last; ++i) {
      auto& list = lists[i];
      for (std::size_t step = 1; step <= o.eta; ++step) {
        list.push_back({static_cast<ItemIndex>(first + (i - first + step) % len), 1.0});
      }
      std::sort(list.begin(), list.end(), [](const Neighbor& a, const Neighbor& b) { return a.item < b.item; });
    }
  }
  w.neighborhoods = std::make_shared<const ItemNeighborhoods>(o.eta, std::move(lists));

  std::vector<std::string> users, items;
  for (std::size_t u = 0; u < o.n_users; ++u) users.push_back("u" + std::to_string(u));
  for (std::size_t i = 0; i < o.n_items; ++i) items.push_back("i" + std::to_string(i));
  w.ids = IdMaps::make(std::move(users), std::move(items));

  Rng theta_rng(derive_seed(o.seed, 1));
  Rng gamma_rng(derive_seed(o.seed, 2));
  w.theta.assign(o.n_users * o.n_items, 1.0);
  w.gamma.assign(o.n_users * o.n_items, 0.0);
  for (std::size_t u = 0; u < o.n_users; ++u) {
    std::vector<double> block_theta(n_blocks);
    for (auto& t : block_theta) t = uniform_real(theta_rng, o.theta_min, o.theta_max);
    for (std::size_t i = 0; i < o.n_items; ++i) {
      double t = o.block_constant ? block_theta[w.block_of[i]] : uniform_real(theta_rng, o.theta_min, o.theta_max);
      if (o.full_exposure) t = 1.0;
      w.theta[u * o.n_items + i] = t;
      w.gamma[u * o.n_items + i] = uniform_real(gamma_rng, o.gamma_min, o.gamma_max);
    }
  }

  w.model = BasicFactorModel<double>(o.n_users, o.n_items, o.latent_dim);
  Rng model_rng(derive_seed(o.seed, 3));
  for (auto& v : w.model.user_factors()) v = o.model_scale * standard_normal(model_rng);
  for (auto& v : w.model.item_factors()) v = o.model_scale * standard_normal(model_rng);
  return w;
}

namespace {

bool in_domain(const SyntheticWorld& w, TripleDomain d, ItemIndex ip, ItemIndex in) {
  return d == TripleDomain::full || w.block_of[ip] != w.block_of[in];
}

double normalizer(const SyntheticWorld& w) {
  return static_cast<double>(w.n_users) * static_cast<double>(w.n_items) * static_cast<double>(w.n_items);
}

// Sum over the domain of pos(u,i+) * neg(u,i-) * -log sigma(f(u,i+,i-)).
template <typename Pos, typename Neg>
double triple_sum(const SyntheticWorld& w, TripleDomain d, Pos&& pos, Neg&& neg) {
  double total = 0.0;
  for (UserIndex u = 0; u < w.n_users; ++u) {
    for (ItemIndex ip = 0; ip < w.n_items; ++ip) {
      const double a = pos(u, ip);
      if (a == 0.0) continue;
      for (ItemIndex in = 0; in < w.n_items; ++in) {
        if (!in_domain(w, d, ip, in)) continue;
        const double b = neg(u, in);
        if (b == 0.0) continue;
        total += a * b * softplus(-preference(w.model, u, ip, in));
      }
    }
  }
  return total / normalizer(w);
}

}  // namespace

IdealQuantities ideal_quantities(const SyntheticWorld& w, TripleDomain domain) {
  IdealQuantities q;
  q.e_ideal.assign(w.n_users * w.n_items, 0.0);
  q.theta_n.assign(w.n_users * w.n_items, 0.0);
  const double eta = static_cast<double>(w.eta);
  for (UserIndex u = 0; u < w.n_users; ++u) {
    for (ItemIndex i = 0; i < w.n_items; ++i) {
      double g = 0.0, t = 0.0;
      for (const auto& nb : w.neighborhoods->of(i)) {
        g += w.gamma_at(u, nb.item);
        t += w.theta_at(u, nb.item);
      }
      q.e_ideal[u * w.n_items + i] = g / eta;
      q.theta_n[u * w.n_items + i] = t / eta;
    }
  }
  const auto& e = q.e_ideal;
  q.loss = triple_sum(
      w, domain, [&](UserIndex u, ItemIndex i) { return w.gamma_at(u, i) * e[u * w.n_items + i]; },
      [&](UserIndex u, ItemIndex i) { return (1.0 - w.gamma_at(u, i)) * (1.0 - e[u * w.n_items + i]); });
  return q;
}

double ideal_ebpr_loss(const SyntheticWorld& world, TripleDomain domain) {
  return ideal_quantities(world, domain).loss;
}

BinaryMatrix sample_interactions(const SyntheticWorld& w, std::uint64_t draw_seed) {
  Rng rng(draw_seed);
  BinaryMatrix y(w.n_users * w.n_items, 0);
  for (std::size_t k = 0; k < y.size(); ++k) {
    const bool exposed = uniform_unit(rng) < w.theta[k];
    const bool relevant = uniform_unit(rng) < w.gamma[k];
    y[k] = exposed && relevant ? 1 : 0;
  }
  return y;
}

ExplainabilityMatrix draw_explainability(const SyntheticWorld& w, const BinaryMatrix& y) {
  std::vector<std::vector<Positive>> rows(w.n_users);
  for (UserIndex u = 0; u < w.n_users; ++u) {
    for (ItemIndex i = 0; i < w.n_items; ++i) {
      if (y[u * w.n_items + i]) rows[u].push_back({i, 0, 0});
    }
  }
  const InteractionDataset ds(w.ids, std::move(rows));
  return build_explainability(ds, w.neighborhoods, ExplainabilitySource::full);
}

namespace {

double estimator_loss(const SyntheticWorld& w, const BinaryMatrix& y, LossKind kind, TripleDomain domain,
                      const std::vector<double>& theta_n) {
  if (kind != LossKind::puebpr && kind != LossKind::uebpr) {
    throw ConfigError("the oracle measures pUEBPR and UEBPR only");
  }
  const auto e = draw_explainability(w, y);
  const bool debias_e = kind == LossKind::uebpr;
  const std::size_t n = w.n_items;
  return triple_sum(
      w, domain,
      [&](UserIndex u, ItemIndex i) {
        if (!y[u * n + i]) return 0.0;
        const double ev = debias_e ? e.value(u, i) / theta_n[u * n + i] : e.value(u, i);
        return ev / w.theta_at(u, i);
      },
      [&](UserIndex u, ItemIndex i) {
        const double yv = y[u * n + i] ? 1.0 : 0.0;
        const double ev = debias_e ? e.value(u, i) / theta_n[u * n + i] : e.value(u, i);
        return (1.0 - yv / w.theta_at(u, i)) * (1.0 - ev);
      });
}

}  // namespace

double empirical_estimator_loss(const SyntheticWorld& w, const BinaryMatrix& y, LossKind kind,
                                TripleDomain domain) {
  const auto q = ideal_quantities(w, domain);
  return estimator_loss(w, y, kind, domain, q.theta_n);
}

double analytic_puebpr_expectation(const SyntheticWorld& w, TripleDomain domain) {
  const auto q = ideal_quantities(w, domain);
  const std::size_t n = w.n_items;
  return triple_sum(
      w, domain,
      [&](UserIndex u, ItemIndex i) { return w.gamma_at(u, i) * q.theta_n[u * n + i] * q.e_ideal[u * n + i]; },
      [&](UserIndex u, ItemIndex i) {
        return (1.0 - w.gamma_at(u, i)) * (1.0 - q.theta_n[u * n + i] * q.e_ideal[u * n + i]);
      });
}

BiasMeasurement measure_bias(const SyntheticWorld& w, LossKind kind, std::size_t n_draws, std::uint64_t seed,
                             TripleDomain domain, unsigned threads) {
  if (n_draws < 2) throw ConfigError("bias measurement needs at least two draws");
  const auto q = ideal_quantities(w, domain);
  std::vector<double> values(n_draws);
  const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n_draws)));
  {
    std::vector<std::jthread> workers;
    for (unsigned t = 0; t < n_threads; ++t) {
      workers.emplace_back([&, t] {
        for (std::size_t d = t; d < n_draws; d += n_threads) {
          values[d] = estimator_loss(w, sample_interactions(w, derive_seed(seed, d)), kind, domain, q.theta_n);
        }
      });
    }
  }
  BiasMeasurement m;
  m.kind = kind;
  m.domain = domain;
  m.n_draws = n_draws;
  double sum = 0.0;
  for (double v : values) sum += v;
  m.mean = sum / static_cast<double>(n_draws);
  double ss = 0.0;
  for (double v : values) ss += (v - m.mean) * (v - m.mean);
  m.standard_error = std::sqrt(ss / static_cast<double>(n_draws - 1) / static_cast<double>(n_draws));
  m.ideal = q.loss;
  m.bias = std::abs(m.mean - m.ideal);
  return m;
}

bool OracleReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const OracleCheck& c) { return c.passed; });
}

OracleReport run_oracle(const OracleOptions& options) {
  OracleReport report;
  report.options = options;
  const auto world = generate_world(options.world);
  const auto domain = TripleDomain::cross_neighborhood;
  report.ideal_loss = ideal_ebpr_loss(world, domain);
  report.puebpr_expected = analytic_puebpr_expectation(world, domain);
  const double z_max = options.z_threshold;

  auto check = [&](std::string name, BiasMeasurement m, bool expect_biased) {
    OracleCheck c{std::move(name), m, expect_biased, false};
    c.passed = expect_biased ? m.z() > z_max : m.z() <= z_max;
    report.checks.push_back(std::move(c));
  };

  const auto uebpr = measure_bias(world, LossKind::uebpr, options.n_draws, options.seed, domain, options.threads);
  const auto puebpr = measure_bias(world, LossKind::puebpr, options.n_draws, options.seed, domain, options.threads);
  check("UEBPR vs ideal", uebpr, false);
  check("pUEBPR vs ideal", puebpr, world.has_partial_exposure());
  BiasMeasurement vs_analytic = puebpr;
  vs_analytic.ideal = report.puebpr_expected;
  vs_analytic.bias = std::abs(puebpr.mean - report.puebpr_expected);
  check("pUEBPR vs analytic expectation", vs_analytic, false);

  if (options.include_full_domain) {
    for (LossKind k : {LossKind::uebpr, LossKind::puebpr}) {
      report.full_domain.push_back(
          measure_bias(world, k, options.n_draws, options.seed, TripleDomain::full, options.threads));
    }
  }
  return report;
}

void write_oracle_report(const OracleReport& r, std::ostream& out) {
  const auto& w = r.options.world;
  out << "world users=" << w.n_users << " items=" << w.n_items << " eta=" << w.eta << " seed=" << w.seed
      << " theta=[" << format_real(w.theta_min) << "," << format_real(w.theta_max) << "]"
      << " gamma=[" << format_real(w.gamma_min) << "," << format_real(w.gamma_max) << "]"
      << " block_constant=" << (w.block_constant ? "true" : "false")
      << " full_exposure=" << (w.full_exposure ? "true" : "false") << '\n';
  out << "draws=" << r.options.n_draws << " seed=" << r.options.seed << " z_threshold="
      << format_real(r.options.z_threshold) << '\n';
  out << "ideal_loss=" << format_real(r.ideal_loss) << " puebpr_analytic=" << format_real(r.puebpr_expected)
      << '\n';
  out << "check\tdomain\tmean\tstderr\treference\tbias\tz\texpect\tresult\n";
  for (const auto& c : r.checks) {
    const auto& m = c.measurement;
    out << c.name << '\t' << to_string(m.domain) << '\t' << format_real(m.mean) << '\t'
        << format_real(m.standard_error) << '\t' << format_real(m.ideal) << '\t' << format_real(m.bias) << '\t'
        << format_real(m.z()) << '\t' << (c.expect_biased ? "biased" : "unbiased") << '\t'
        << (c.passed ? "PASS" : "FAIL") << '\n';
  }
  for (const auto& m : r.full_domain) {
    out << to_string(m.kind) << " vs ideal (informational)\t" << to_string(m.domain) << '\t' << format_real(m.mean)
        << '\t' << format_real(m.standard_error) << '\t' << format_real(m.ideal) << '\t' << format_real(m.bias)
        << '\t' << format_real(m.z()) << "\t-\t-\n";
  }
  out << "overall\t" << (r.passed() ? "PASS" : "FAIL") << '\n';
}

}  // namespace ebpr
