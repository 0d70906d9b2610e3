#include <cmath>
#include <memory>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "ebpr/explainability.hpp"
#include "naive.hpp"
#include "toy.hpp"

using namespace ebpr;

TEST_CASE("cosine similarity examples") {
  // item 0 liked by users {1,2}, item 1 by {2,3}, item 2 by {1,2}, item 3 by {0}
  const auto ds = toy::dataset({{3}, {0, 2}, {0, 1, 2}, {1}}, 5);
  CHECK(cosine_item_similarity(ds, 0, 1) == doctest::Approx(0.5));
  CHECK(cosine_item_similarity(ds, 0, 2) == doctest::Approx(1.0));
  CHECK(cosine_item_similarity(ds, 0, 3) == 0.0);
  CHECK(cosine_item_similarity(ds, 0, 4) == 0.0);
  CHECK(cosine_item_similarity(ds, 1, 0) == cosine_item_similarity(ds, 0, 1));
}

TEST_CASE("neighborhood lists exclude self and zero-similarity items") {
  const auto ds = toy::dataset({{0, 1}, {1, 2}, {3}}, 4);
  const auto nb = build_neighborhoods(ds, 5);
  CHECK(nb.of(0).size() == 1);
  CHECK(nb.of(1).size() == 2);
  CHECK(nb.of(3).empty());
  for (ItemIndex i = 0; i < 4; ++i) {
    for (const auto& n : nb.of(i)) CHECK(n.item != i);
  }
}

TEST_CASE("neighborhoods match a brute-force oracle") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n_items = seed < 10 ? 6 : 25;
    const std::size_t eta = seed < 10 ? 2 : 4;
    const auto ds = toy::random_dataset(12, n_items, 0.35, seed);
    const auto nb = build_neighborhoods(ds, eta);
    const auto ref = naive::neighborhoods(naive::to_dense(ds), n_items, eta);
    for (ItemIndex i = 0; i < n_items; ++i) {
      REQUIRE(nb.of(i).size() == ref[i].size());
      for (std::size_t k = 0; k < ref[i].size(); ++k) CHECK(nb.of(i)[k].item == ref[i][k]);
      for (std::size_t k = 1; k < nb.of(i).size(); ++k) CHECK(nb.of(i)[k - 1].similarity >= nb.of(i)[k].similarity);
    }
  }
}

TEST_CASE("neighborhoods do not depend on the thread count") {
  const auto ds = toy::random_dataset(40, 50, 0.2, 3);
  const auto a = build_neighborhoods(ds, 5, 1);
  const auto b = build_neighborhoods(ds, 5, 4);
  for (ItemIndex i = 0; i < 50; ++i) {
    REQUIRE(a.of(i).size() == b.of(i).size());
    for (std::size_t k = 0; k < a.of(i).size(); ++k) CHECK(a.of(i)[k].item == b.of(i)[k].item);
  }
}

TEST_CASE("explainability matches a brute-force count") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto ds = toy::random_dataset(5, 6, 0.4, 100 + seed);
    auto nb = std::make_shared<const ItemNeighborhoods>(build_neighborhoods(ds, 2));
    const auto e = build_explainability(ds, nb);
    const auto dense = naive::to_dense(ds);
    std::vector<std::vector<std::size_t>> lists(6);
    for (ItemIndex i = 0; i < 6; ++i) for (const auto& n : nb->of(i)) lists[i].push_back(n.item);
    const auto ref = naive::explainability(dense, lists, 2);
    for (UserIndex u = 0; u < 5; ++u) {
      for (ItemIndex i = 0; i < 6; ++i) CHECK(e.value(u, i) == ref[u][i]);
    }
  }
}

TEST_CASE("explainability boundary values") {
  // item 0's neighbors are items 1 and 2 (perfectly co-liked)
  const auto ds = toy::dataset({{0, 1, 2}, {0, 1, 2}, {3}}, 4);
  auto nb = std::make_shared<const ItemNeighborhoods>(build_neighborhoods(ds, 2));
  const auto e = build_explainability(ds, nb);
  CHECK(e.value(0, 0) == 1.0);
  CHECK(e.value(2, 0) == 0.0);
  CHECK(e.value(0, 3) == 0.0);
}

TEST_CASE("explanation of 3 liked neighbors out of 20 gives 0.15") {
  // item 0 shares user 0 with items 1..20; user 1 likes items 1, 2, 3 and 21
  std::vector<std::vector<ItemIndex>> rows(2);
  for (ItemIndex i = 0; i <= 20; ++i) rows[0].push_back(i);
  rows[1] = {1, 2, 3, 21};
  const auto ds = toy::dataset(rows, 22);
  const auto nb = build_neighborhoods(ds, 20);
  REQUIRE(nb.of(0).size() == 20);
  const auto ex = explain_recommendation(1, 0, nb, ds);
  CHECK(ex.explainability == doctest::Approx(0.15));
  CHECK(ex.liked_neighbors.size() == 3);
  auto shared = std::make_shared<const ItemNeighborhoods>(nb);
  CHECK(build_explainability(ds, shared).value(1, 0) == ex.explainability);
}

TEST_CASE("training phase hides held-out items") {
  const auto ds = toy::random_dataset(30, 40, 0.25, 9, 5);
  const auto split = loo_split(ds, 5, 2);
  const auto tr = explainability_for_phase(split, 3, Phase::training);
  const auto ev = explainability_for_phase(split, 3, Phase::evaluation);
  CHECK(tr.source() == ExplainabilitySource::train_only);
  CHECK(ev.source() == ExplainabilitySource::full);
  // E over train-phase neighborhoods never counts a held-out item
  for (UserIndex u = 0; u < ds.n_users(); ++u) {
    for (const auto& entry : tr.row(u)) {
      std::uint32_t c = 0;
      for (const auto& n : tr.neighborhoods().of(entry.item)) c += split.train.contains(u, n.item);
      CHECK(c == entry.count);
    }
  }
}

TEST_CASE("with nothing held out both phases agree") {
  const auto ds = toy::random_dataset(15, 20, 0.3, 21, 3);
  auto split = loo_split(ds, 2, 1);
  split.train = split.full;
  const auto tr = explainability_for_phase(split, 3, Phase::training);
  const auto ev = explainability_for_phase(split, 3, Phase::evaluation);
  for (UserIndex u = 0; u < ds.n_users(); ++u) {
    for (ItemIndex i = 0; i < ds.n_items(); ++i) CHECK(tr.value(u, i) == ev.value(u, i));
  }
}

TEST_CASE("adding interactions never lowers E over fixed neighborhoods") {
  const auto small = toy::random_dataset(10, 12, 0.25, 31);
  auto rows = std::vector<std::vector<ItemIndex>>(10);
  Rng rng(4);
  for (UserIndex u = 0; u < 10; ++u) {
    for (const auto& p : small.positives(u)) rows[u].push_back(p.item);
    const auto extra = static_cast<ItemIndex>(uniform_index(rng, 12));
    if (!small.contains(u, extra)) rows[u].push_back(extra);
  }
  const auto big = toy::dataset(rows, 12);
  auto nb = std::make_shared<const ItemNeighborhoods>(build_neighborhoods(small, 3));
  const auto e_small = build_explainability(small, nb);
  const auto e_big = build_explainability(big, nb);
  for (UserIndex u = 0; u < 10; ++u) {
    for (ItemIndex i = 0; i < 12; ++i) CHECK(e_big.value(u, i) >= e_small.value(u, i));
  }
}

TEST_CASE("average explainability") {
  const auto empty_rows = toy::dataset({{0}, {1}}, 3);
  auto nb = std::make_shared<const ItemNeighborhoods>(build_neighborhoods(empty_rows, 2));
  CHECK(average_explainability(build_explainability(empty_rows, nb), empty_rows) == 0.0);

  // items 0 and 1 co-liked by user 0 only: E(0,0) = E(0,1) = 1/1 at eta 1
  const auto ds = toy::dataset({{0, 1}, {}}, 2);
  auto nb1 = std::make_shared<const ItemNeighborhoods>(build_neighborhoods(ds, 1));
  CHECK(average_explainability(build_explainability(ds, nb1), ds) == doctest::Approx(0.5));
}

TEST_CASE("text artifacts round trip") {
  const auto ds = toy::random_dataset(10, 14, 0.3, 17);
  const auto nb = build_neighborhoods(ds, 3);
  std::stringstream ns;
  write_neighborhoods(nb, ds, ns);
  auto back = std::make_shared<const ItemNeighborhoods>(read_neighborhoods(ns, ds));
  CHECK(back->eta() == 3);
  for (ItemIndex i = 0; i < 14; ++i) {
    REQUIRE(back->of(i).size() == nb.of(i).size());
    for (std::size_t k = 0; k < nb.of(i).size(); ++k) CHECK(back->of(i)[k].item == nb.of(i)[k].item);
  }
  const auto e = build_explainability(ds, back);
  std::stringstream es;
  write_explainability(e, ds, es);
  const auto e2 = read_explainability(es, ds, back);
  for (UserIndex u = 0; u < 10; ++u) {
    for (ItemIndex i = 0; i < 14; ++i) CHECK(e2.value(u, i) == e.value(u, i));
  }
}
