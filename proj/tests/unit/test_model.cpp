#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "ebpr/model.hpp"
#include "naive.hpp"
#include "toy.hpp"

using namespace ebpr;

TEST_CASE("initialization shape and determinism") {
  const auto a = init_model(7, 9, 4, 123);
  const auto b = init_model(7, 9, 4, 123);
  const auto c = init_model(7, 9, 4, 124);
  CHECK(a.user_factors().size() == 28);
  CHECK(a.item_factors().size() == 36);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(a.all_finite());
}

TEST_CASE("initial entries have mean 0 and standard deviation 0.01") {
  const auto m = init_model(1000, 0, 1000, 5);
  const auto& v = m.user_factors();
  REQUIRE(v.size() == 1000000);
  double s = 0, ss = 0;
  for (float x : v) {
    s += x;
    ss += static_cast<double>(x) * x;
  }
  const double n = static_cast<double>(v.size());
  const double mean = s / n;
  const double sd = std::sqrt(ss / n - mean * mean);
  CHECK(std::abs(mean) < 3 * 0.01 / std::sqrt(n));
  CHECK(std::abs(sd - 0.01) < 3 * 0.01 / std::sqrt(2 * n));
}

TEST_CASE("score and preference") {
  FactorModel m(1, 2, 2);
  m.user(0)[0] = 1;
  m.user(0)[1] = 2;
  m.item(0)[0] = 3;
  m.item(0)[1] = -1;
  CHECK(score(m, 0, 0) == 1.0);
  CHECK(score(m, 0, 1) == 0.0);
  CHECK(preference(m, 0, 0, 1) == 1.0);
  CHECK(preference(m, 0, 1, 0) == -1.0);
}

TEST_CASE("preference is antisymmetric on random models") {
  const auto m = init_model(5, 8, 6, 2, 1.0);
  for (UserIndex u = 0; u < 5; ++u)
    for (ItemIndex i = 0; i < 8; ++i)
      for (ItemIndex j = 0; j < 8; ++j) CHECK(preference(m, u, i, j) == -preference(m, u, j, i));
}

TEST_CASE("top_k small example and ties") {
  FactorModel m(1, 4, 1);
  m.user(0)[0] = 1;
  const float q[] = {0.9f, 0.5f, 0.7f, 0.5f};
  for (ItemIndex i = 0; i < 4; ++i) m.item(i)[0] = q[i];
  const std::vector<ItemIndex> cand{0, 1, 2, 3};
  const auto top = top_k(m, 0, cand, 2);
  CHECK(top.items == std::vector<ItemIndex>{0, 2});
  CHECK_FALSE(top.truncated);
  const auto all = top_k(m, 0, cand, 10);
  CHECK(all.items == std::vector<ItemIndex>{0, 2, 1, 3});
  CHECK(all.truncated);
  CHECK_THROWS(top_k(m, 0, std::vector<ItemIndex>{}, 3));
}

TEST_CASE("top_k agrees with a full sort") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = init_model(3, 60, 4, seed, 1.0);
    std::vector<ItemIndex> cand(60);
    std::iota(cand.begin(), cand.end(), 0);
    for (UserIndex u = 0; u < 3; ++u) {
      const auto top = top_k(m, u, cand, 10);
      const auto ref = naive::full_sort(m, u, std::vector<std::size_t>(cand.begin(), cand.end()));
      for (std::size_t k = 0; k < 10; ++k) CHECK(top.items[k] == ref[k]);
      for (std::size_t k = 1; k < 10; ++k) CHECK(top.scores[k - 1] >= top.scores[k]);
    }
  }
}

TEST_CASE("training positives are rejected as candidates") {
  const auto ds = toy::dataset({{1}}, 3);
  const auto m = init_model(1, 3, 2, 1);
  CHECK_THROWS_AS(top_k(m, 0, std::vector<ItemIndex>{0, 1}, 1, ds), std::invalid_argument);
  CHECK_NOTHROW(top_k(m, 0, std::vector<ItemIndex>{0, 2}, 1, ds));
  const auto rec = recommend(m, ds, 0, 5);
  CHECK(rec.items.size() == 2);
  for (auto i : rec.items) CHECK(i != 1);
}

TEST_CASE("checkpoint round trip is bit-exact") {
  const auto m = init_model(4, 6, 3, 77);
  std::stringstream ss;
  write_checkpoint(m, {0, 0, 0, 77, "UEBPR"}, ss);
  CheckpointHeader h;
  const auto back = read_checkpoint(ss, &h);
  CHECK(back == m);
  CHECK(h.seed == 77);
  CHECK(h.loss == "UEBPR");
  CHECK(h.latent_dim == 3);

  std::stringstream bad("not a checkpoint at all");
  CHECK_THROWS_AS(read_checkpoint(bad), DataError);
  std::string bytes = [&] {
    std::stringstream s2;
    write_checkpoint(m, {0, 0, 0, 77, "BPR"}, s2);
    return s2.str();
  }();
  std::stringstream truncated(bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(read_checkpoint(truncated), DataError);
}
