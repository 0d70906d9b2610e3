#include "ebpr/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace ebpr {
namespace {

std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec == std::errc() && res.ptr == s.data() + s.size()) return v;
  // Some exports write timestamps as "881250949.0".
  const auto d = parse_double(s);
  if (d && std::isfinite(*d) && std::floor(*d) == *d &&
      std::fabs(*d) < 9.0e18) {
    return static_cast<std::int64_t>(*d);
  }
  return std::nullopt;
}

char parse_delimiter(std::string_view name) {
  if (name == "tab") return '\t';
  if (name == "comma") return ',';
  if (name == "space") return ' ';
  if (name == "semicolon") return ';';
  if (name == "pipe") return '|';
  if (name.size() == 1) return name.front();
  throw ConfigError("unknown delimiter '" + std::string(name) + "'");
}

std::string delimiter_name(char c) {
  switch (c) {
    case '\t': return "tab";
    case ',': return "comma";
    case ' ': return "space";
    case ';': return "semicolon";
    case '|': return "pipe";
    default: return std::string(1, c);
  }
}

bool later(const Positive& a, const Positive& b) {
  if (a.timestamp != b.timestamp) return a.timestamp > b.timestamp;
  return a.order > b.order;
}

std::vector<ItemIndex> parse_item_list(std::string_view field,
                                       const InteractionDataset& ds) {
  std::vector<ItemIndex> out;
  if (field.empty()) return out;
  for (auto tok : split_fields(field, ',')) {
    const auto idx = ds.find_item(std::string(tok));
    if (!idx) throw DataError("split manifest: unknown item id '" + std::string(tok) + "'");
    out.push_back(*idx);
  }
  return out;
}

std::string join_items(const std::vector<ItemIndex>& items,
                       const InteractionDataset& ds) {
  std::string out;
  for (std::size_t k = 0; k < items.size(); ++k) {
    if (k) out += ',';
    out += ds.item_id(items[k]);
  }
  return out;
}

}  // namespace

FormatSpec FormatSpec::parse(const std::string& text) {
  const auto parts = split_fields(text, ':');
  if (parts.size() < 2 || parts.size() > 3) {
    throw ConfigError("format must look like 'tab:u,i,r,t[:header]', got '" + text + "'");
  }
  FormatSpec spec;
  spec.delimiter = parse_delimiter(parts[0]);
  spec.user_column = spec.item_column = spec.value_column = spec.timestamp_column = -1;
  const auto cols = split_fields(parts[1], ',');
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const int idx = static_cast<int>(c);
    if (cols[c] == "u") spec.user_column = idx;
    else if (cols[c] == "i") spec.item_column = idx;
    else if (cols[c] == "r") spec.value_column = idx;
    else if (cols[c] == "t") spec.timestamp_column = idx;
    else if (cols[c] != "-") throw ConfigError("unknown column tag '" + std::string(cols[c]) + "'");
  }
  if (spec.user_column < 0 || spec.item_column < 0 || spec.value_column < 0) {
    throw ConfigError("format needs at least u, i and r columns: '" + text + "'");
  }
  if (parts.size() == 3) {
    if (parts[2] != "header") throw ConfigError("unknown format flag '" + std::string(parts[2]) + "'");
    spec.skip_header = true;
  }
  return spec;
}

std::string FormatSpec::to_string() const {
  const int n = std::max({user_column, item_column, value_column, timestamp_column}) + 1;
  std::vector<std::string> cols(static_cast<std::size_t>(n), "-");
  cols[static_cast<std::size_t>(user_column)] = "u";
  cols[static_cast<std::size_t>(item_column)] = "i";
  cols[static_cast<std::size_t>(value_column)] = "r";
  if (timestamp_column >= 0) cols[static_cast<std::size_t>(timestamp_column)] = "t";
  std::string out = delimiter_name(delimiter) + ":";
  for (std::size_t c = 0; c < cols.size(); ++c) out += (c ? "," : "") + cols[c];
  if (skip_header) out += ":header";
  return out;
}

LoadResult parse_interactions(std::istream& in, const FormatSpec& format) {
  LoadResult result;
  const int needed = std::max({format.user_column, format.item_column,
                               format.value_column, format.timestamp_column}) + 1;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && format.skip_header) continue;
    const auto view = trim(line);
    if (view.empty()) continue;
    const auto fields = split_fields(view, format.delimiter);
    if (static_cast<int>(fields.size()) < needed) {
      result.warnings.push_back({line_no, "expected " + std::to_string(needed) +
                                              " fields, found " + std::to_string(fields.size())});
      continue;
    }
    auto field = [&](int col) { return trim(fields[static_cast<std::size_t>(col)]); };
    RawInteraction rec;
    rec.user_id = std::string(field(format.user_column));
    rec.item_id = std::string(field(format.item_column));
    rec.line = line_no;
    if (rec.user_id.empty() || rec.item_id.empty()) {
      result.warnings.push_back({line_no, "empty user or item id"});
      continue;
    }
    const auto value = parse_double(field(format.value_column));
    if (!value || !std::isfinite(*value) || *value < 0.0) {
      result.warnings.push_back({line_no, "invalid value '" +
                                              std::string(field(format.value_column)) + "'"});
      continue;
    }
    rec.value = *value;
    if (format.timestamp_column >= 0) {
      const auto ts = parse_int(field(format.timestamp_column));
      if (!ts) {
        result.warnings.push_back({line_no, "invalid timestamp '" +
                                                std::string(field(format.timestamp_column)) + "'"});
        continue;
      }
      rec.timestamp = *ts;
    } else {
      rec.timestamp = static_cast<std::int64_t>(line_no);
    }
    result.records.push_back(std::move(rec));
  }
  return result;
}

LoadResult load_interactions(const std::filesystem::path& path, const FormatSpec& format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open interaction file '" + path.string() + "'");
  return parse_interactions(in, format);
}

std::shared_ptr<const IdMaps> IdMaps::make(std::vector<std::string> users,
                                           std::vector<std::string> items) {
  auto maps = std::make_shared<IdMaps>();
  maps->users = std::move(users);
  maps->items = std::move(items);
  maps->user_lookup.reserve(maps->users.size());
  maps->item_lookup.reserve(maps->items.size());
  for (std::size_t u = 0; u < maps->users.size(); ++u) {
    if (!maps->user_lookup.emplace(maps->users[u], static_cast<UserIndex>(u)).second) {
      throw std::invalid_argument("duplicate user id '" + maps->users[u] + "'");
    }
  }
  for (std::size_t i = 0; i < maps->items.size(); ++i) {
    if (!maps->item_lookup.emplace(maps->items[i], static_cast<ItemIndex>(i)).second) {
      throw std::invalid_argument("duplicate item id '" + maps->items[i] + "'");
    }
  }
  return maps;
}

InteractionDataset::InteractionDataset()
    : InteractionDataset(IdMaps::make({}, {}), {}) {}

InteractionDataset::InteractionDataset(std::shared_ptr<const IdMaps> ids,
                                       std::vector<std::vector<Positive>> positives)
    : ids_(std::move(ids)), positives_(std::move(positives)) {
  if (!ids_) throw std::invalid_argument("InteractionDataset: null id maps");
  if (positives_.size() != ids_->users.size()) {
    throw std::invalid_argument("InteractionDataset: positives table has " +
                                std::to_string(positives_.size()) + " users, id map has " +
                                std::to_string(ids_->users.size()));
  }
  const std::size_t n_items = ids_->items.size();
  std::vector<std::size_t> counts(n_items, 0);
  for (auto& row : positives_) {
    std::sort(row.begin(), row.end(),
              [](const Positive& a, const Positive& b) { return a.item < b.item; });
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (row[k].item >= n_items) throw std::invalid_argument("InteractionDataset: item index out of range");
      if (k && row[k].item == row[k - 1].item) {
        throw std::invalid_argument("InteractionDataset: duplicate (user,item) pair");
      }
      ++counts[row[k].item];
    }
    interaction_count_ += row.size();
  }
  item_offsets_.assign(n_items + 1, 0);
  for (std::size_t i = 0; i < n_items; ++i) item_offsets_[i + 1] = item_offsets_[i] + counts[i];
  item_user_list_.resize(interaction_count_);
  std::vector<std::size_t> cursor(item_offsets_.begin(), item_offsets_.end() - 1);
  for (std::size_t u = 0; u < positives_.size(); ++u) {
    for (const auto& p : positives_[u]) item_user_list_[cursor[p.item]++] = static_cast<UserIndex>(u);
  }
}

double InteractionDataset::sparsity() const {
  const double cells = static_cast<double>(n_users()) * static_cast<double>(n_items());
  return cells > 0 ? 1.0 - static_cast<double>(interaction_count_) / cells : 1.0;
}

std::span<const UserIndex> InteractionDataset::item_users(ItemIndex i) const {
  return std::span<const UserIndex>(item_user_list_.data() + item_offsets_[i],
                                    item_offsets_[i + 1] - item_offsets_[i]);
}

bool InteractionDataset::contains(UserIndex u, ItemIndex i) const {
  const auto& row = positives_[u];
  auto it = std::lower_bound(row.begin(), row.end(), i,
                             [](const Positive& p, ItemIndex v) { return p.item < v; });
  return it != row.end() && it->item == i;
}

std::optional<UserIndex> InteractionDataset::find_user(const std::string& raw) const {
  auto it = ids_->user_lookup.find(raw);
  if (it == ids_->user_lookup.end()) return std::nullopt;
  return it->second;
}

std::optional<ItemIndex> InteractionDataset::find_item(const std::string& raw) const {
  auto it = ids_->item_lookup.find(raw);
  if (it == ids_->item_lookup.end()) return std::nullopt;
  return it->second;
}

std::uint64_t InteractionDataset::fingerprint() const {
  Fingerprint fp;
  fp.add(n_users());
  fp.add(n_items());
  for (const auto& id : ids_->users) fp.add(id);
  for (const auto& id : ids_->items) fp.add(id);
  for (const auto& row : positives_) {
    fp.add(row.size());
    for (const auto& p : row) {
      fp.add(p.item);
      fp.add(p.timestamp);
    }
  }
  return fp.value();
}

InteractionDataset binarize_and_index(const std::vector<RawInteraction>& raw, double threshold) {
  std::vector<std::string> users, items;
  std::unordered_map<std::string, UserIndex> user_lookup;
  std::unordered_map<std::string, ItemIndex> item_lookup;
  std::vector<std::vector<Positive>> rows;
  for (std::size_t k = 0; k < raw.size(); ++k) {
    const auto& rec = raw[k];
    if (!(rec.value > threshold)) continue;
    auto [uit, new_user] = user_lookup.try_emplace(rec.user_id, static_cast<UserIndex>(users.size()));
    if (new_user) {
      users.push_back(rec.user_id);
      rows.emplace_back();
    }
    auto [iit, new_item] = item_lookup.try_emplace(rec.item_id, static_cast<ItemIndex>(items.size()));
    if (new_item) items.push_back(rec.item_id);
    const std::size_t order = rec.line ? rec.line : k + 1;
    rows[uit->second].push_back({iit->second, rec.timestamp, order});
  }
  for (auto& row : rows) {
    std::sort(row.begin(), row.end(), [](const Positive& a, const Positive& b) {
      if (a.item != b.item) return a.item < b.item;
      return later(b, a);
    });
    // After the sort the latest record of each item is the last of its run.
    std::vector<Positive> dedup;
    dedup.reserve(row.size());
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k + 1 < row.size() && row[k + 1].item == row[k].item) continue;
      dedup.push_back(row[k]);
    }
    row = std::move(dedup);
  }
  return InteractionDataset(IdMaps::make(std::move(users), std::move(items)), std::move(rows));
}

InteractionDataset filter_min_interactions(const InteractionDataset& ds, std::size_t min_interactions) {
  std::vector<std::string> users;
  std::vector<std::vector<Positive>> rows;
  for (UserIndex u = 0; u < ds.n_users(); ++u) {
    const auto pos = ds.positives(u);
    if (pos.size() < min_interactions) continue;
    users.push_back(ds.user_id(u));
    rows.emplace_back(pos.begin(), pos.end());
  }
  if (rows.size() == ds.n_users()) return ds;
  return InteractionDataset(IdMaps::make(std::move(users), ds.ids()->items), std::move(rows));
}

InteractionDataset filter_min_item_interactions(const InteractionDataset& ds, std::size_t min_count) {
  std::vector<std::int64_t> remap(ds.n_items(), -1);
  std::vector<std::string> items;
  for (ItemIndex i = 0; i < ds.n_items(); ++i) {
    if (ds.item_count(i) >= min_count) {
      remap[i] = static_cast<std::int64_t>(items.size());
      items.push_back(ds.item_id(i));
    }
  }
  std::vector<std::string> users;
  std::vector<std::vector<Positive>> rows;
  for (UserIndex u = 0; u < ds.n_users(); ++u) {
    std::vector<Positive> row;
    for (const auto& p : ds.positives(u)) {
      if (remap[p.item] >= 0) row.push_back({static_cast<ItemIndex>(remap[p.item]), p.timestamp, p.order});
    }
    if (row.empty()) continue;
    users.push_back(ds.user_id(u));
    rows.push_back(std::move(row));
  }
  return InteractionDataset(IdMaps::make(std::move(users), std::move(items)), std::move(rows));
}

LooSplit loo_split(const InteractionDataset& ds, std::size_t n_eval_negatives, std::uint64_t seed) {
  LooSplit split;
  split.full = ds;
  split.seed = seed;
  split.n_eval_negatives = n_eval_negatives;
  split.test.resize(ds.n_users());
  split.validation.resize(ds.n_users());
  std::vector<std::vector<Positive>> train_rows(ds.n_users());
  std::vector<ItemIndex> candidates;
  for (UserIndex u = 0; u < ds.n_users(); ++u) {
    std::vector<Positive> by_time(ds.positives(u).begin(), ds.positives(u).end());
    if (by_time.size() < 3) {
      throw DataError("user '" + ds.user_id(u) + "' has " + std::to_string(by_time.size()) +
                      " positives; leave-one-out needs at least 3");
    }
    std::sort(by_time.begin(), by_time.end(),
              [](const Positive& a, const Positive& b) { return later(b, a); });
    split.test[u].item = by_time.back().item;
    split.validation[u].item = by_time[by_time.size() - 2].item;
    train_rows[u].assign(by_time.begin(), by_time.end() - 2);

    candidates.clear();
    for (ItemIndex i = 0; i < ds.n_items(); ++i) {
      if (!ds.contains(u, i)) candidates.push_back(i);
    }
    if (candidates.size() < 2 * n_eval_negatives) {
      throw DataError("user '" + ds.user_id(u) + "' has only " + std::to_string(candidates.size()) +
                      " candidate negatives; need " + std::to_string(2 * n_eval_negatives));
    }
    // Partial Fisher-Yates: the first 2n slots become a uniform sample
    // without replacement; the first half goes to test, the rest to validation.
    Rng rng(derive_seed(seed, u));
    for (std::size_t k = 0; k < 2 * n_eval_negatives; ++k) {
      const auto j = k + static_cast<std::size_t>(uniform_index(rng, candidates.size() - k));
      std::swap(candidates[k], candidates[j]);
    }
    auto& test_negs = split.test[u].negatives;
    auto& val_negs = split.validation[u].negatives;
    test_negs.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n_eval_negatives));
    val_negs.assign(candidates.begin() + static_cast<std::ptrdiff_t>(n_eval_negatives),
                    candidates.begin() + static_cast<std::ptrdiff_t>(2 * n_eval_negatives));
    std::sort(test_negs.begin(), test_negs.end());
    std::sort(val_negs.begin(), val_negs.end());
  }
  split.train = InteractionDataset(ds.ids(), std::move(train_rows));
  return split;
}

LooSplit merge_validation(const LooSplit& split) {
  if (split.merged()) return split;
  LooSplit merged;
  merged.full = split.full;
  merged.test = split.test;
  merged.seed = split.seed;
  merged.n_eval_negatives = split.n_eval_negatives;
  std::vector<std::vector<Positive>> rows(split.train.n_users());
  for (UserIndex u = 0; u < split.train.n_users(); ++u) {
    rows[u].assign(split.train.positives(u).begin(), split.train.positives(u).end());
    const ItemIndex v = split.validation[u].item;
    for (const auto& p : split.full.positives(u)) {
      if (p.item == v) rows[u].push_back(p);
    }
  }
  merged.train = InteractionDataset(split.train.ids(), std::move(rows));
  return merged;
}

std::vector<Triple> sample_training_triples(const InteractionDataset& train,
                                            const InteractionDataset& exclude,
                                            std::uint64_t epoch_seed) {
  if (exclude.n_users() != train.n_users() || exclude.n_items() != train.n_items()) {
    throw std::invalid_argument("sample_training_triples: dataset shapes differ");
  }
  std::vector<Triple> triples;
  triples.reserve(train.interaction_count());
  Rng rng(epoch_seed);
  const std::size_t n_items = train.n_items();
  for (UserIndex u = 0; u < train.n_users(); ++u) {
    const auto pos = train.positives(u);
    if (pos.empty()) continue;
    if (exclude.positives(u).size() >= n_items || pos.size() >= n_items) {
      throw DataError("user '" + train.user_id(u) + "' has no negative items");
    }
    for (const auto& p : pos) {
      ItemIndex neg = 0;
      do {
        neg = static_cast<ItemIndex>(uniform_index(rng, n_items));
      } while (exclude.contains(u, neg) || train.contains(u, neg));
      triples.push_back({u, p.item, neg});
    }
  }
  return triples;
}

LooSplit resample_eval_negatives(const LooSplit& split, std::uint64_t seed) {
  LooSplit out = loo_split(split.full, split.n_eval_negatives, seed);
  return split.merged() ? merge_validation(out) : out;
}

std::vector<Triple> sample_training_triples(const LooSplit& split, std::uint64_t epoch_seed) {
  return sample_training_triples(split.train, split.full, epoch_seed);
}

void save_dataset(const InteractionDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream users(dir / "users.tsv"), items(dir / "items.tsv"), inter(dir / "interactions.tsv");
  if (!users || !items || !inter) throw DataError("cannot write dataset artifact in '" + dir.string() + "'");
  for (UserIndex u = 0; u < ds.n_users(); ++u) users << u << '\t' << ds.user_id(u) << '\n';
  for (ItemIndex i = 0; i < ds.n_items(); ++i) items << i << '\t' << ds.item_id(i) << '\n';
  inter << "# n_users=" << ds.n_users() << " n_items=" << ds.n_items()
        << " interactions=" << ds.interaction_count() << '\n';
  for (UserIndex u = 0; u < ds.n_users(); ++u) {
    for (const auto& p : ds.positives(u)) {
      inter << u << '\t' << p.item << '\t' << p.timestamp << '\t' << p.order << '\n';
    }
  }
}

InteractionDataset load_dataset(const std::filesystem::path& dir) {
  auto read_ids = [&](const std::string& name) {
    std::ifstream in(dir / name);
    if (!in) throw DataError("missing dataset artifact '" + (dir / name).string() + "'; run `ebpr ingest` first");
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos) throw DataError("malformed line in " + name);
      const auto idx = parse_int(std::string_view(line).substr(0, tab));
      if (!idx || *idx != static_cast<std::int64_t>(ids.size())) throw DataError("non-contiguous index in " + name);
      ids.push_back(line.substr(tab + 1));
    }
    return ids;
  };
  auto users = read_ids("users.tsv");
  auto items = read_ids("items.tsv");
  auto ids = IdMaps::make(std::move(users), std::move(items));
  std::ifstream in(dir / "interactions.tsv");
  if (!in) throw DataError("missing dataset artifact '" + (dir / "interactions.tsv").string() + "'; run `ebpr ingest` first");
  std::vector<std::vector<Positive>> rows(ids->users.size());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto f = split_fields(line, '\t');
    if (f.size() != 4) throw DataError("malformed interactions.tsv line: " + line);
    const auto u = parse_int(f[0]), i = parse_int(f[1]), ts = parse_int(f[2]), ord = parse_int(f[3]);
    if (!u || !i || !ts || !ord || *u < 0 || *u >= static_cast<std::int64_t>(rows.size()) || *i < 0) {
      throw DataError("malformed interactions.tsv line: " + line);
    }
    rows[static_cast<std::size_t>(*u)].push_back(
        {static_cast<ItemIndex>(*i), *ts, static_cast<std::size_t>(*ord)});
  }
  try {
    return InteractionDataset(std::move(ids), std::move(rows));
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("corrupt dataset artifact: ") + e.what());
  }
}

void write_split_manifest(const LooSplit& split, std::ostream& out) {
  out << "# loo-split seed=" << split.seed << " n_eval_negatives=" << split.n_eval_negatives
      << " dataset=" << to_hex(split.full.fingerprint()) << '\n';
  for (UserIndex u = 0; u < split.full.n_users(); ++u) {
    out << split.full.user_id(u) << '\t' << split.full.item_id(split.test[u].item) << '\t'
        << split.full.item_id(split.validation[u].item) << '\t'
        << join_items(split.test[u].negatives, split.full) << '\t'
        << join_items(split.validation[u].negatives, split.full) << '\n';
  }
}

LooSplit read_split_manifest(std::istream& in, const InteractionDataset& full) {
  LooSplit split;
  split.full = full;
  split.test.resize(full.n_users());
  split.validation.resize(full.n_users());
  std::vector<bool> seen(full.n_users(), false);
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      std::istringstream hs(line.substr(1));
      std::string tok;
      while (hs >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const auto key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "seed") split.seed = std::stoull(val);
        else if (key == "n_eval_negatives") split.n_eval_negatives = std::stoull(val);
        else if (key == "dataset" && val != to_hex(full.fingerprint())) {
          throw DataError("split manifest was produced for a different dataset; rerun `ebpr split`");
        }
      }
      header = true;
      continue;
    }
    const auto f = split_fields(line, '\t');
    if (f.size() != 5) throw DataError("malformed split manifest line: " + line);
    const auto u = full.find_user(std::string(f[0]));
    const auto t = full.find_item(std::string(f[1]));
    const auto v = full.find_item(std::string(f[2]));
    if (!u || !t || !v) throw DataError("split manifest references unknown ids: " + line);
    split.test[*u] = {*t, parse_item_list(f[3], full)};
    split.validation[*u] = {*v, parse_item_list(f[4], full)};
    seen[*u] = true;
  }
  if (!header) throw DataError("split manifest has no header line");
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw DataError("split manifest does not cover every user");
  }
  std::vector<std::vector<Positive>> rows(full.n_users());
  for (UserIndex u = 0; u < full.n_users(); ++u) {
    for (const auto& p : full.positives(u)) {
      if (p.item != split.test[u].item && p.item != split.validation[u].item) rows[u].push_back(p);
    }
  }
  split.train = InteractionDataset(full.ids(), std::move(rows));
  return split;
}

}  // namespace ebpr
