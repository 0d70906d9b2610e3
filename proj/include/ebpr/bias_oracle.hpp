#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "ebpr/dataset.hpp"
#include "ebpr/explainability.hpp"
#include "ebpr/model.hpp"
#include "ebpr/training.hpp"

namespace ebpr {

struct WorldOptions {
  std::size_t n_users = 6;
  std::size_t n_items = 12;
  std::size_t eta = 3;
  std::uint64_t seed = 0;
  double theta_min = 0.2;
  double theta_max = 1.0;
  double gamma_min = 0.1;
  double gamma_max = 0.9;
  std::size_t latent_dim = 3;
  double model_scale = 1.0;
  bool full_exposure = false;   // theta = 1 everywhere
  // When false, theta is drawn per (u, i) instead of per (u, block). Such
  // worlds break the premise the unbiasedness argument needs; exploration only.
  bool block_constant = true;
};

// Items are cut into consecutive blocks of eta + 1 (the remainder joins the
// last block). An item's neighborhood is the next eta items of its block,
// cyclically, all with similarity 1. Exposure theta is shared by all items of
// a block for a given user; relevance gamma is drawn per (u, i).
struct SyntheticWorld {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::size_t eta = 0;
  bool block_constant = true;
  std::vector<std::size_t> block_of;  // per item
  std::vector<double> theta;          // n_users x n_items, row-major
  std::vector<double> gamma;          // n_users x n_items, row-major
  std::shared_ptr<const IdMaps> ids;
  std::shared_ptr<const ItemNeighborhoods> neighborhoods;
  BasicFactorModel<double> model;

  double theta_at(UserIndex u, ItemIndex i) const { return theta[u * n_items + i]; }
  double gamma_at(UserIndex u, ItemIndex i) const { return gamma[u * n_items + i]; }
  bool has_partial_exposure() const;
};

// Throws ConfigError unless n_items >= eta + 1 and eta >= 1.
SyntheticWorld generate_world(const WorldOptions& options);

// Which (u, i+, i-) triples enter the sums. Both are normalized by |U||I|^2.
// cross_neighborhood keeps triples whose items lie in different blocks, the
// terms for which the estimator expectation factorizes; full is every triple.
enum class TripleDomain { cross_neighborhood, full };

const char* to_string(TripleDomain d);

struct IdealQuantities {
  std::vector<double> e_ideal;  // n_users x n_items: mean gamma over N_i
  std::vector<double> theta_n;  // n_users x n_items: mean theta over N_i
  double loss = 0.0;
};

IdealQuantities ideal_quantities(const SyntheticWorld& world,
                                 TripleDomain domain = TripleDomain::cross_neighborhood);
double ideal_ebpr_loss(const SyntheticWorld& world,
                       TripleDomain domain = TripleDomain::cross_neighborhood);

using BinaryMatrix = std::vector<std::uint8_t>;  // n_users x n_items

// Y = O * R with O ~ Ber(theta), R ~ Ber(gamma), all independent.
BinaryMatrix sample_interactions(const SyntheticWorld& world, std::uint64_t draw_seed);

// E of a draw, from the explainability module over the world's neighborhoods.
ExplainabilityMatrix draw_explainability(const SyntheticWorld& world, const BinaryMatrix& y);

// Full-sum pUEBPR or UEBPR estimator of one draw, with the true theta and the
// true neighborhood propensity in the denominators. Triples with Y_{i-} = 1
// are included.
double empirical_estimator_loss(const SyntheticWorld& world, const BinaryMatrix& y, LossKind kind,
                                TripleDomain domain = TripleDomain::cross_neighborhood);

// Expected pUEBPR loss: the ideal loss with E replaced by theta_N * E_ideal.
double analytic_puebpr_expectation(const SyntheticWorld& world,
                                   TripleDomain domain = TripleDomain::cross_neighborhood);

struct BiasMeasurement {
  LossKind kind = LossKind::uebpr;
  TripleDomain domain = TripleDomain::cross_neighborhood;
  std::size_t n_draws = 0;
  double mean = 0.0;
  double standard_error = 0.0;
  double ideal = 0.0;
  double bias = 0.0;  // |mean - ideal|
  double z() const { return standard_error > 0.0 ? bias / standard_error : 0.0; }
};

// Draw d uses seed derive_seed(seed, d); results do not depend on `threads`.
BiasMeasurement measure_bias(const SyntheticWorld& world, LossKind kind, std::size_t n_draws,
                             std::uint64_t seed,
                             TripleDomain domain = TripleDomain::cross_neighborhood,
                             unsigned threads = 1);

struct OracleOptions {
  WorldOptions world;
  std::size_t n_draws = 10000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  double z_threshold = 3.0;
  bool include_full_domain = true;  // also report the every-triple sums
};

// `measurement.ideal` holds the reference value the check compares against.
struct OracleCheck {
  std::string name;
  BiasMeasurement measurement;
  bool expect_biased = false;  // pass iff z > threshold, otherwise iff z <= threshold
  bool passed = false;
};

struct OracleReport {
  OracleOptions options;
  double ideal_loss = 0.0;
  double puebpr_expected = 0.0;
  std::vector<OracleCheck> checks;             // cross-neighborhood domain
  std::vector<BiasMeasurement> full_domain;    // informational
  bool passed() const;
};

OracleReport run_oracle(const OracleOptions& options);
void write_oracle_report(const OracleReport& report, std::ostream& out);

}  // namespace ebpr
