#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "ebpr/dataset.hpp"
#include "toy.hpp"

using namespace ebpr;

namespace {

std::vector<RawInteraction> raw_log(const std::string& text) {
  std::istringstream in(text);
  return parse_interactions(in).records;
}

}  // namespace

TEST_CASE("empty input parses to zero records") {
  std::istringstream in("");
  const auto r = parse_interactions(in);
  CHECK(r.records.empty());
  CHECK(r.warnings.empty());
}

TEST_CASE("malformed lines are skipped with a warning") {
  std::istringstream in("1\t10\t5\t100\n2\t20\t3\t101\nbroken line\n3\t30\t4\t102\n");
  const auto r = parse_interactions(in);
  CHECK(r.records.size() == 3);
  REQUIRE(r.warnings.size() == 1);
  CHECK(r.warnings[0].line == 3);
}

TEST_CASE("bad value and timestamp fields are rejected") {
  std::istringstream in("1\t10\tabc\t100\n1\t11\t4\tnope\n1\t12\t-1\t5\n");
  const auto r = parse_interactions(in);
  CHECK(r.records.empty());
  CHECK(r.warnings.size() == 3);
}

TEST_CASE("format spec parsing") {
  const auto f = FormatSpec::parse("comma:u,-,i,r:header");
  CHECK(f.delimiter == ',');
  CHECK(f.user_column == 0);
  CHECK(f.item_column == 2);
  CHECK(f.value_column == 3);
  CHECK(f.timestamp_column < 0);
  CHECK(f.skip_header);
  CHECK(FormatSpec::parse(f.to_string()).to_string() == f.to_string());
  CHECK_THROWS(FormatSpec::parse("tab:u,r"));

  std::istringstream in("user,x,item,rating\na,_,b,1\n");
  const auto r = parse_interactions(in, f);
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].item_id == "b");
  CHECK(r.records[0].timestamp == 2);
}

TEST_CASE("missing file is a data error") {
  CHECK_THROWS_AS(load_interactions("/nonexistent/u.data"), DataError);
}

TEST_CASE("binarization drops zero values and keeps the latest duplicate") {
  const auto ds = binarize_and_index(raw_log("a\tx\t0\t1\na\ty\t4\t5\na\ty\t2\t9\nb\tx\t3\t2\n"));
  CHECK(ds.n_users() == 2);
  CHECK(ds.n_items() == 2);
  CHECK(ds.interaction_count() == 2);
  const auto a = *ds.find_user("a");
  const auto y = *ds.find_item("y");
  REQUIRE(ds.positives(a).size() == 1);
  CHECK(ds.positives(a)[0].item == y);
  CHECK(ds.positives(a)[0].timestamp == 9);
  CHECK_FALSE(ds.contains(a, *ds.find_item("x")));
}

TEST_CASE("indices follow first appearance") {
  const auto ds = binarize_and_index(raw_log("z\tq\t1\t1\ny\tp\t1\t2\nz\tp\t1\t3\n"));
  CHECK(ds.user_id(0) == "z");
  CHECK(ds.user_id(1) == "y");
  CHECK(ds.item_id(0) == "q");
  CHECK(ds.item_id(1) == "p");
}

TEST_CASE("user filter boundary: 9 positives removed, 10 kept") {
  std::vector<std::vector<ItemIndex>> rows(2);
  for (ItemIndex i = 0; i < 9; ++i) rows[0].push_back(i);
  for (ItemIndex i = 0; i < 10; ++i) rows[1].push_back(i);
  const auto ds = toy::dataset(rows, 12);
  const auto f = filter_min_interactions(ds, 10);
  CHECK(f.n_users() == 1);
  CHECK(f.user_id(0) == "u1");
  CHECK(f.n_items() == 12);
  CHECK(filter_min_interactions(ds, 0).n_users() == 2);
}

TEST_CASE("item filter re-indexes items and drops emptied users") {
  const auto ds = toy::dataset({{0, 1}, {0}, {2}}, 3);
  const auto f = filter_min_item_interactions(ds, 2);
  CHECK(f.n_items() == 1);
  CHECK(f.item_id(0) == "i0");
  CHECK(f.n_users() == 2);
}

TEST_CASE("leave-one-out takes the latest item for test and the next for validation") {
  std::vector<RawInteraction> raw;
  int line = 1;
  for (auto [item, ts] : std::vector<std::pair<std::string, int>>{{"a", 5}, {"b", 12}, {"c", 9}, {"d", 1}}) {
    raw.push_back({"u", item, 1.0, ts, static_cast<std::size_t>(line++)});
  }
  for (int k = 0; k < 10; ++k) raw.push_back({"v", "n" + std::to_string(k), 1.0, k, static_cast<std::size_t>(line++)});
  const auto ds = binarize_and_index(raw);
  const auto split = loo_split(ds, 2, 1);
  const auto u = *ds.find_user("u");
  CHECK(ds.item_id(split.test[u].item) == "b");
  CHECK(ds.item_id(split.validation[u].item) == "c");
  CHECK(split.train.positives(u).size() == 2);
}

TEST_CASE("timestamp ties are broken by file order") {
  std::vector<RawInteraction> raw{{"u", "a", 1, 7, 1}, {"u", "b", 1, 7, 2}, {"u", "c", 1, 7, 3}};
  for (int k = 0; k < 8; ++k) raw.push_back({"w", "x" + std::to_string(k), 1, 1, static_cast<std::size_t>(10 + k)});
  const auto ds = binarize_and_index(raw);
  const auto split = loo_split(ds, 1, 1);
  CHECK(ds.item_id(split.test[0].item) == "c");
  CHECK(ds.item_id(split.validation[0].item) == "b");
}

TEST_CASE("split partition, negative purity and determinism") {
  const auto ds = toy::random_dataset(30, 60, 0.2, 4, 5);
  const auto a = loo_split(ds, 10, 77);
  const auto b = loo_split(ds, 10, 77);
  const auto c = loo_split(ds, 10, 78);
  bool any_diff = false;
  for (UserIndex u = 0; u < ds.n_users(); ++u) {
    CHECK(a.test[u].negatives == b.test[u].negatives);
    CHECK(a.validation[u].negatives == b.validation[u].negatives);
    any_diff = any_diff || a.test[u].negatives != c.test[u].negatives;

    std::multiset<ItemIndex> parts;
    for (const auto& p : a.train.positives(u)) parts.insert(p.item);
    parts.insert(a.test[u].item);
    parts.insert(a.validation[u].item);
    std::multiset<ItemIndex> whole;
    for (const auto& p : ds.positives(u)) whole.insert(p.item);
    CHECK(parts == whole);

    std::set<ItemIndex> negs(a.test[u].negatives.begin(), a.test[u].negatives.end());
    CHECK(negs.size() == 10);
    for (auto i : a.validation[u].negatives) {
      CHECK(negs.count(i) == 0);
      CHECK_FALSE(ds.contains(u, i));
    }
    for (auto i : a.test[u].negatives) CHECK_FALSE(ds.contains(u, i));
  }
  CHECK(any_diff);
}

TEST_CASE("split rejects users with too few positives or negatives") {
  CHECK_THROWS_AS(loo_split(toy::dataset({{0, 1}}, 10), 1, 1), DataError);
  CHECK_THROWS_AS(loo_split(toy::dataset({{0, 1, 2}}, 5), 2, 1), DataError);
}

TEST_CASE("merging validation and resampling negatives") {
  const auto ds = toy::random_dataset(20, 40, 0.2, 8, 4);
  const auto split = loo_split(ds, 5, 3);
  const auto merged = merge_validation(split);
  CHECK(merged.merged());
  for (UserIndex u = 0; u < ds.n_users(); ++u) {
    CHECK(merged.train.positives(u).size() == split.train.positives(u).size() + 1);
    CHECK(merged.train.contains(u, split.validation[u].item));
    CHECK(merged.test[u].item == split.test[u].item);
  }
  const auto again = resample_eval_negatives(merged, 99);
  CHECK(again.merged());
  for (UserIndex u = 0; u < ds.n_users(); ++u) {
    CHECK(again.test[u].item == merged.test[u].item);
    CHECK(again.test[u].negatives.size() == 5);
    for (auto i : again.test[u].negatives) CHECK_FALSE(ds.contains(u, i));
  }
}

TEST_CASE("training triples: one per positive, negatives never positive in the full data") {
  const auto ds = toy::random_dataset(25, 30, 0.3, 12, 4);
  const auto split = loo_split(ds, 3, 5);
  const auto t1 = sample_training_triples(split, 42);
  const auto t2 = sample_training_triples(split, 42);
  CHECK(t1 == t2);
  CHECK(t1.size() == split.train.interaction_count());
  for (const auto& t : t1) {
    CHECK(split.train.contains(t.user, t.positive));
    CHECK_FALSE(ds.contains(t.user, t.negative));
  }
  CHECK(sample_training_triples(split, 43) != t1);
}

TEST_CASE("dataset artifact round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "ebpr_test_dataset";
  std::filesystem::remove_all(dir);
  const auto ds = toy::random_dataset(10, 15, 0.3, 1, 3);
  save_dataset(ds, dir);
  const auto back = load_dataset(dir);
  CHECK(back.fingerprint() == ds.fingerprint());
  CHECK(back.interaction_count() == ds.interaction_count());
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_dataset(dir), DataError);
}

TEST_CASE("split manifest round trip") {
  const auto ds = toy::random_dataset(12, 30, 0.25, 2, 4);
  const auto split = loo_split(ds, 4, 6);
  std::stringstream ss;
  write_split_manifest(split, ss);
  const auto back = read_split_manifest(ss, ds);
  for (UserIndex u = 0; u < ds.n_users(); ++u) {
    CHECK(back.test[u].item == split.test[u].item);
    CHECK(back.test[u].negatives == split.test[u].negatives);
    CHECK(back.validation[u].negatives == split.validation[u].negatives);
  }
  CHECK(back.train.fingerprint() == split.train.fingerprint());
}
