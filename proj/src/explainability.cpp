#include "ebpr/explainability.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>

namespace ebpr {
namespace {

__extension__ typedef unsigned __int128 Wide;

struct Candidate {
  ItemIndex item;
  std::uint64_t co_count;
  std::uint64_t popularity;
};

// a ranks before b iff c_a^2 / n_a > c_b^2 / n_b (the common n_i cancels),
// ties by ascending index.
bool ranks_before(const Candidate& a, const Candidate& b) {
  const Wide lhs = static_cast<Wide>(a.co_count) * a.co_count * b.popularity;
  const Wide rhs = static_cast<Wide>(b.co_count) * b.co_count * a.popularity;
  if (lhs != rhs) return lhs > rhs;
  return a.item < b.item;
}

std::vector<Neighbor> neighborhood_of(const InteractionDataset& ds, ItemIndex i, std::size_t eta,
                                      std::vector<std::uint32_t>& co, std::vector<ItemIndex>& touched) {
  std::vector<Neighbor> out;
  const auto users = ds.item_users(i);
  if (users.empty()) return out;
  touched.clear();
  for (UserIndex u : users) {
    for (const auto& p : ds.positives(u)) {
      if (p.item == i) continue;
      if (co[p.item]++ == 0) touched.push_back(p.item);
    }
  }
  std::vector<Candidate> cands;
  cands.reserve(touched.size());
  for (ItemIndex j : touched) {
    cands.push_back({j, co[j], ds.item_count(j)});
    co[j] = 0;
  }
  const std::size_t keep = std::min(eta, cands.size());
  std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                    ranks_before);
  const double n_i = static_cast<double>(users.size());
  out.reserve(keep);
  for (std::size_t k = 0; k < keep; ++k) {
    const auto& c = cands[k];
    double sim = static_cast<double>(c.co_count) / std::sqrt(n_i * static_cast<double>(c.popularity));
    // Order is decided exactly above; keep the rounded values non-increasing.
    if (k > 0) sim = std::min(sim, out.back().similarity);
    out.push_back({c.item, sim});
  }
  return out;
}

std::vector<std::string_view> split_on(std::string_view s, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(delim, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_real(std::string_view s, const char* what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataError(std::string("malformed ") + what + " value '" + std::string(s) + "'");
  }
  return v;
}

std::uint64_t parse_count(std::string_view s, const char* what) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataError(std::string("malformed ") + what + " value '" + std::string(s) + "'");
  }
  return v;
}

// Reads "# key=value ..." into a lookup function.
std::string header_value(const std::string& header, const std::string& key) {
  std::istringstream hs(header.substr(1));
  std::string tok;
  while (hs >> tok) {
    const auto eq = tok.find('=');
    if (eq != std::string::npos && tok.substr(0, eq) == key) return tok.substr(eq + 1);
  }
  throw DataError("artifact header lacks '" + key + "'");
}

}  // namespace

ItemNeighborhoods::ItemNeighborhoods(std::size_t eta, std::vector<std::vector<Neighbor>> lists)
    : eta_(eta), lists_(std::move(lists)) {}

bool ItemNeighborhoods::contains(ItemIndex i, ItemIndex j) const {
  const auto& l = lists_[i];
  return std::any_of(l.begin(), l.end(), [j](const Neighbor& n) { return n.item == j; });
}

double cosine_item_similarity(const InteractionDataset& ds, ItemIndex i, ItemIndex j) {
  const auto a = ds.item_users(i);
  const auto b = ds.item_users(j);
  if (a.empty() || b.empty()) return 0.0;
  std::size_t common = 0;
  for (std::size_t x = 0, y = 0; x < a.size() && y < b.size();) {
    if (a[x] < b[y]) ++x;
    else if (b[y] < a[x]) ++y;
    else { ++common; ++x; ++y; }
  }
  return static_cast<double>(common) /
         std::sqrt(static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

ItemNeighborhoods build_neighborhoods(const InteractionDataset& ds, std::size_t eta, unsigned threads) {
  if (eta == 0) throw ConfigError("neighborhood size eta must be >= 1");
  const std::size_t n = ds.n_items();
  std::vector<std::vector<Neighbor>> lists(n);
  auto work = [&](std::size_t worker, std::size_t n_workers) {
    std::vector<std::uint32_t> co(n, 0);
    std::vector<ItemIndex> touched;
    for (std::size_t i = worker; i < n; i += n_workers) {
      lists[i] = neighborhood_of(ds, static_cast<ItemIndex>(i), eta, co, touched);
    }
  };
  threads = std::max(1u, threads);
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t, threads);
  }
  return ItemNeighborhoods(eta, std::move(lists));
}

const char* to_string(ExplainabilitySource source) {
  return source == ExplainabilitySource::train_only ? "train_only" : "full";
}

ExplainabilityMatrix::ExplainabilityMatrix(std::size_t n_users, std::size_t n_items,
                                           std::shared_ptr<const ItemNeighborhoods> neighborhoods,
                                           ExplainabilitySource source,
                                           std::vector<std::vector<Entry>> rows)
    : n_users_(n_users),
      n_items_(n_items),
      neighborhoods_(std::move(neighborhoods)),
      source_(source),
      rows_(std::move(rows)) {
  if (!neighborhoods_) throw std::invalid_argument("ExplainabilityMatrix: null neighborhoods");
  if (rows_.size() != n_users_) throw std::invalid_argument("ExplainabilityMatrix: row count mismatch");
  for (auto& row : rows_) {
    std::sort(row.begin(), row.end(), [](const Entry& a, const Entry& b) { return a.item < b.item; });
    for (const auto& e : row) {
      if (e.item >= n_items_ || e.count == 0 || e.count > neighborhoods_->eta()) {
        throw std::invalid_argument("ExplainabilityMatrix: invalid entry");
      }
    }
  }
}

std::uint32_t ExplainabilityMatrix::count(UserIndex u, ItemIndex i) const {
  const auto& row = rows_[u];
  auto it = std::lower_bound(row.begin(), row.end(), i,
                             [](const Entry& e, ItemIndex v) { return e.item < v; });
  return (it != row.end() && it->item == i) ? it->count : 0;
}

double ExplainabilityMatrix::value(UserIndex u, ItemIndex i) const {
  const auto c = count(u, i);
  return c == 0 ? 0.0 : static_cast<double>(c) / static_cast<double>(eta());
}

std::size_t ExplainabilityMatrix::stored_entries() const {
  std::size_t n = 0;
  for (const auto& row : rows_) n += row.size();
  return n;
}

ExplainabilityMatrix build_explainability(const InteractionDataset& ds,
                                          std::shared_ptr<const ItemNeighborhoods> nbrs,
                                          ExplainabilitySource source) {
  if (!nbrs) throw std::invalid_argument("build_explainability: null neighborhoods");
  if (nbrs->n_items() != ds.n_items()) {
    throw ConfigError("neighborhoods cover " + std::to_string(nbrs->n_items()) +
                      " items but the dataset has " + std::to_string(ds.n_items()));
  }
  const std::size_t n_items = ds.n_items();
  // reverse[l] lists the items whose neighborhood contains l.
  std::vector<std::vector<ItemIndex>> reverse(n_items);
  for (ItemIndex i = 0; i < n_items; ++i) {
    for (const auto& nb : nbrs->of(i)) reverse[nb.item].push_back(i);
  }
  std::vector<std::vector<ExplainabilityMatrix::Entry>> rows(ds.n_users());
  std::vector<std::uint32_t> counts(n_items, 0);
  std::vector<ItemIndex> touched;
  for (UserIndex u = 0; u < ds.n_users(); ++u) {
    touched.clear();
    for (const auto& p : ds.positives(u)) {
      for (ItemIndex i : reverse[p.item]) {
        if (counts[i]++ == 0) touched.push_back(i);
      }
    }
    auto& row = rows[u];
    row.reserve(touched.size());
    for (ItemIndex i : touched) {
      row.push_back({i, counts[i]});
      counts[i] = 0;
    }
  }
  return ExplainabilityMatrix(ds.n_users(), n_items, std::move(nbrs), source, std::move(rows));
}

ExplainabilityMatrix explainability_for_phase(const LooSplit& split, std::size_t eta, Phase phase,
                                              unsigned threads) {
  const bool training = phase == Phase::training;
  const InteractionDataset& ds = training ? split.train : split.full;
  auto nbrs = std::make_shared<const ItemNeighborhoods>(build_neighborhoods(ds, eta, threads));
  return build_explainability(ds, std::move(nbrs),
                              training ? ExplainabilitySource::train_only : ExplainabilitySource::full);
}

double average_explainability(const ExplainabilityMatrix& e, const InteractionDataset& ds) {
  const double cells = static_cast<double>(ds.n_users()) * static_cast<double>(ds.n_items());
  if (cells == 0.0 || e.eta() == 0) return 0.0;
  std::uint64_t total = 0;
  for (UserIndex u = 0; u < e.n_users(); ++u) {
    for (const auto& entry : e.row(u)) total += entry.count;
  }
  return static_cast<double>(total) / static_cast<double>(e.eta()) / cells;
}

Explanation explain_recommendation(UserIndex u, ItemIndex i, const ItemNeighborhoods& nbrs,
                                   const InteractionDataset& ds) {
  Explanation out{u, i, 0.0, {}};
  for (const auto& nb : nbrs.of(i)) {
    if (ds.contains(u, nb.item)) out.liked_neighbors.push_back(nb);
  }
  if (nbrs.eta() > 0) {
    out.explainability = static_cast<double>(out.liked_neighbors.size()) / static_cast<double>(nbrs.eta());
  }
  return out;
}

void write_neighborhoods(const ItemNeighborhoods& nbrs, const InteractionDataset& ds, std::ostream& out) {
  out << "# eta=" << nbrs.eta() << " n_items=" << nbrs.n_items() << '\n';
  for (ItemIndex i = 0; i < nbrs.n_items(); ++i) {
    out << ds.item_id(i) << '\t';
    bool first = true;
    for (const auto& nb : nbrs.of(i)) {
      if (!first) out << ',';
      out << ds.item_id(nb.item) << ':' << format_real(nb.similarity);
      first = false;
    }
    out << '\n';
  }
}

ItemNeighborhoods read_neighborhoods(std::istream& in, const InteractionDataset& ds) {
  std::string line;
  if (!std::getline(in, line) || line.empty() || line.front() != '#') {
    throw DataError("neighborhood artifact lacks a header");
  }
  const std::size_t eta = parse_count(header_value(line, "eta"), "eta");
  std::vector<std::vector<Neighbor>> lists(ds.n_items());
  std::vector<bool> seen(ds.n_items(), false);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw DataError("malformed neighborhood line: " + line);
    const auto i = ds.find_item(line.substr(0, tab));
    if (!i) throw DataError("neighborhood artifact references unknown item '" + line.substr(0, tab) + "'");
    const std::string_view rest = std::string_view(line).substr(tab + 1);
    if (!rest.empty()) {
      for (auto tok : split_on(rest, ',')) {
        const auto colon = tok.rfind(':');
        if (colon == std::string_view::npos) throw DataError("malformed neighbor entry '" + std::string(tok) + "'");
        const auto j = ds.find_item(std::string(tok.substr(0, colon)));
        if (!j) throw DataError("neighborhood artifact references unknown item");
        lists[*i].push_back({*j, parse_real(tok.substr(colon + 1), "similarity")});
      }
    }
    seen[*i] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw DataError("neighborhood artifact does not cover every item");
  }
  return ItemNeighborhoods(eta, std::move(lists));
}

void write_explainability(const ExplainabilityMatrix& e, const InteractionDataset& ds, std::ostream& out) {
  out << "# eta=" << e.eta() << " source=" << to_string(e.source()) << " n_users=" << e.n_users()
      << " n_items=" << e.n_items() << '\n';
  for (UserIndex u = 0; u < e.n_users(); ++u) {
    for (const auto& entry : e.row(u)) {
      out << ds.user_id(u) << '\t' << ds.item_id(entry.item) << '\t' << entry.count << '\t'
          << format_real(static_cast<double>(entry.count) / static_cast<double>(e.eta())) << '\n';
    }
  }
}

ExplainabilityMatrix read_explainability(std::istream& in, const InteractionDataset& ds,
                                         std::shared_ptr<const ItemNeighborhoods> nbrs) {
  std::string line;
  if (!std::getline(in, line) || line.empty() || line.front() != '#') {
    throw DataError("explainability artifact lacks a header");
  }
  const std::size_t eta = parse_count(header_value(line, "eta"), "eta");
  const auto source = header_value(line, "source") == "train_only" ? ExplainabilitySource::train_only
                                                                   : ExplainabilitySource::full;
  if (!nbrs || nbrs->eta() != eta) throw DataError("explainability artifact eta does not match its neighborhoods");
  std::vector<std::vector<ExplainabilityMatrix::Entry>> rows(ds.n_users());
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_on(line, '\t');
    if (f.size() != 4) throw DataError("malformed explainability line: " + line);
    const auto u = ds.find_user(std::string(f[0]));
    const auto i = ds.find_item(std::string(f[1]));
    if (!u || !i) throw DataError("explainability artifact references unknown ids: " + line);
    rows[*u].push_back({*i, static_cast<std::uint32_t>(parse_count(f[2], "count"))});
  }
  try {
    return ExplainabilityMatrix(ds.n_users(), ds.n_items(), std::move(nbrs), source, std::move(rows));
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("corrupt explainability artifact: ") + e.what());
  }
}

}  // namespace ebpr
