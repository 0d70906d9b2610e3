#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "ebpr/propensity.hpp"
#include "toy.hpp"

using namespace ebpr;

TEST_CASE("item propensity from counts 4, 1, 0") {
  const auto ds = toy::dataset({{0, 1}, {0}, {0}, {0}}, 3);
  const auto th = estimate_item_propensity(ds);
  CHECK(th[0] == 1.0);
  CHECK(th[1] == doctest::Approx(0.5));
  CHECK(th[2] == 0.0);
}

TEST_CASE("empty dataset has no propensity") {
  CHECK_THROWS_AS(estimate_item_propensity(toy::dataset({{}}, 3)), DataError);
}

TEST_CASE("neighborhood propensity variants") {
  const std::vector<double> theta{0.3, 0.5, 0.1, 0.9};
  // item 0 neighbors {1, 2}, others empty
  ItemNeighborhoods nb(2, {{{1, 1.0}, {2, 0.5}}, {}, {}, {}});
  const auto sum = neighborhood_propensity(theta, nb, NeighborhoodVariant::paper_sum);
  const auto mean = neighborhood_propensity(theta, nb, NeighborhoodVariant::definitional_mean);
  CHECK(sum[0] == doctest::Approx(0.6));
  CHECK(mean[0] == doctest::Approx(0.3));
  CHECK(sum[1] == 0.0);
  CHECK(mean[3] == 0.0);
}

TEST_CASE("floor applies to denominators only") {
  CHECK(clamp_propensity(0.0, 1e-3) == 1e-3);
  CHECK(clamp_propensity(0.5, 1e-3) == 0.5);
  PropensityModel pm;
  pm.item = {0.0, 0.25};
  pm.neighborhood = {0.0, 0.5};
  CHECK(pm.item_denominator(0) == kDefaultPropensityFloor);
  CHECK(pm.neighborhood_denominator(1) == 0.5);
  CHECK(pm.clamped_items() == std::vector<double>{kDefaultPropensityFloor, 0.25});
  CHECK(pm.item[0] == 0.0);
}

TEST_CASE("variant names parse back") {
  for (auto v : {NeighborhoodVariant::paper_sum, NeighborhoodVariant::definitional_mean}) {
    CHECK(parse_neighborhood_variant(to_string(v)) == v);
  }
  CHECK_THROWS(parse_neighborhood_variant("median"));
}

TEST_CASE("propensity artifact round trip") {
  const auto ds = toy::random_dataset(12, 10, 0.3, 5, 1);
  const auto nb = build_neighborhoods(ds, 3);
  const auto pm = build_propensity_model(ds, nb);
  std::stringstream ss;
  write_propensities(pm, ds, ss);
  const auto back = read_propensities(ss, ds);
  CHECK(back.eta == 3);
  CHECK(back.variant == pm.variant);
  CHECK(back.item == pm.item);
  CHECK(back.neighborhood == pm.neighborhood);
}
