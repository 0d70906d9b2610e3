#include "ebpr/model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <istream>
#include <numeric>
#include <ostream>

namespace ebpr {
namespace {

constexpr std::array<char, 8> kMagic = {'E', 'B', 'P', 'R', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::ostream& out, T value) {
  std::array<char, sizeof(T)> bytes{};
  for (std::size_t k = 0; k < sizeof(T); ++k) {
    bytes[k] = static_cast<char>((value >> (8 * k)) & 0xff);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T get_le(std::istream& in) {
  std::array<unsigned char, sizeof(T)> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw DataError("truncated checkpoint");
  T value = 0;
  for (std::size_t k = 0; k < sizeof(T); ++k) value |= static_cast<T>(bytes[k]) << (8 * k);
  return value;
}

bool ranked_before(double sa, ItemIndex a, double sb, ItemIndex b) {
  if (sa != sb) return sa > sb;
  return a < b;
}

}  // namespace

FactorModel init_model(std::size_t n_users, std::size_t n_items, std::size_t latent_dim,
                       std::uint64_t seed, double scale) {
  if (latent_dim == 0) throw ConfigError("latent dimension K must be >= 1");
  FactorModel m(n_users, n_items, latent_dim);
  Rng rng(seed);
  for (auto& v : m.user_factors()) v = static_cast<float>(scale * standard_normal(rng));
  for (auto& v : m.item_factors()) v = static_cast<float>(scale * standard_normal(rng));
  return m;
}

RankedList top_k(const FactorModel& m, UserIndex u, std::span<const ItemIndex> candidates,
                 std::size_t k_cut) {
  RankedList out;
  out.user = u;
  if (candidates.empty()) throw std::invalid_argument("top_k: empty candidate set");
  std::vector<std::pair<double, ItemIndex>> scored;
  scored.reserve(candidates.size());
  for (ItemIndex i : candidates) scored.emplace_back(score(m, u, i), i);
  const std::size_t keep = std::min(k_cut, scored.size());
  out.truncated = scored.size() < k_cut;
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(),
                    [](const auto& a, const auto& b) { return ranked_before(a.first, a.second, b.first, b.second); });
  out.items.reserve(keep);
  out.scores.reserve(keep);
  for (std::size_t k = 0; k < keep; ++k) {
    out.scores.push_back(scored[k].first);
    out.items.push_back(scored[k].second);
  }
  return out;
}

RankedList top_k(const FactorModel& m, UserIndex u, std::span<const ItemIndex> candidates,
                 std::size_t k_cut, const InteractionDataset& train) {
  for (ItemIndex i : candidates) {
    if (train.contains(u, i)) {
      throw std::invalid_argument("top_k: candidate " + train.item_id(i) +
                                  " is a training positive of user " + train.user_id(u));
    }
  }
  return top_k(m, u, candidates, k_cut);
}

RankedList recommend(const FactorModel& m, const InteractionDataset& train, UserIndex u,
                     std::size_t k_cut) {
  std::vector<ItemIndex> candidates;
  candidates.reserve(train.n_items());
  for (ItemIndex i = 0; i < train.n_items(); ++i) {
    if (!train.contains(u, i)) candidates.push_back(i);
  }
  return top_k(m, u, candidates, k_cut);
}

void write_checkpoint(const FactorModel& m, const CheckpointHeader& header, std::ostream& out) {
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint64_t>(out, m.n_users());
  put_le<std::uint64_t>(out, m.n_items());
  put_le<std::uint64_t>(out, m.latent_dim());
  put_le<std::uint64_t>(out, header.seed);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(header.loss.size()));
  out.write(header.loss.data(), static_cast<std::streamsize>(header.loss.size()));
  for (float v : m.user_factors()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  for (float v : m.item_factors()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  if (!out) throw DataError("failed to write checkpoint");
}

FactorModel read_checkpoint(std::istream& in, CheckpointHeader* header) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw DataError("not an ebpr checkpoint");
  if (get_le<std::uint32_t>(in) != kVersion) throw DataError("unsupported checkpoint version");
  CheckpointHeader h;
  h.n_users = get_le<std::uint64_t>(in);
  h.n_items = get_le<std::uint64_t>(in);
  h.latent_dim = get_le<std::uint64_t>(in);
  h.seed = get_le<std::uint64_t>(in);
  const auto len = get_le<std::uint32_t>(in);
  if (len > 64) throw DataError("corrupt checkpoint header");
  h.loss.resize(len);
  in.read(h.loss.data(), len);
  if (!in) throw DataError("truncated checkpoint");
  if (h.latent_dim == 0 || h.n_users > (1ULL << 32) || h.n_items > (1ULL << 32) || h.latent_dim > 4096) {
    throw DataError("corrupt checkpoint header");
  }
  FactorModel m(h.n_users, h.n_items, h.latent_dim);
  for (auto& v : m.user_factors()) v = std::bit_cast<float>(get_le<std::uint32_t>(in));
  for (auto& v : m.item_factors()) v = std::bit_cast<float>(get_le<std::uint32_t>(in));
  if (header) *header = std::move(h);
  return m;
}

}  // namespace ebpr
