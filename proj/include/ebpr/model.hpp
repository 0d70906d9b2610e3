#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ebpr/common.hpp"
#include "ebpr/dataset.hpp"

namespace ebpr {

// Matrix-factorization parameters: P (users x K) and Q (items x K), row-major.
// Training and checkpoints use float; the gradient checks instantiate double.
template <typename Real>
class BasicFactorModel {
 public:
  using value_type = Real;

  BasicFactorModel() = default;
  BasicFactorModel(std::size_t n_users, std::size_t n_items, std::size_t latent_dim)
      : n_users_(n_users),
        n_items_(n_items),
        latent_dim_(latent_dim),
        users_(n_users * latent_dim, Real(0)),
        items_(n_items * latent_dim, Real(0)) {}

  std::size_t n_users() const { return n_users_; }
  std::size_t n_items() const { return n_items_; }
  std::size_t latent_dim() const { return latent_dim_; }

  std::span<Real> user(UserIndex u) { return {users_.data() + u * latent_dim_, latent_dim_}; }
  std::span<const Real> user(UserIndex u) const { return {users_.data() + u * latent_dim_, latent_dim_}; }
  std::span<Real> item(ItemIndex i) { return {items_.data() + i * latent_dim_, latent_dim_}; }
  std::span<const Real> item(ItemIndex i) const { return {items_.data() + i * latent_dim_, latent_dim_}; }

  std::vector<Real>& user_factors() { return users_; }
  const std::vector<Real>& user_factors() const { return users_; }
  std::vector<Real>& item_factors() { return items_; }
  const std::vector<Real>& item_factors() const { return items_; }

  bool all_finite() const {
    for (Real v : users_) if (!std::isfinite(v)) return false;
    for (Real v : items_) if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const BasicFactorModel&, const BasicFactorModel&) = default;

 private:
  std::size_t n_users_ = 0;
  std::size_t n_items_ = 0;
  std::size_t latent_dim_ = 0;
  std::vector<Real> users_;
  std::vector<Real> items_;
};

using FactorModel = BasicFactorModel<float>;

inline constexpr double kInitScale = 0.01;

// Entries i.i.d. N(0, scale^2); deterministic in seed.
FactorModel init_model(std::size_t n_users, std::size_t n_items, std::size_t latent_dim,
                       std::uint64_t seed, double scale = kInitScale);

// P_u . Q_i accumulated in double.
template <typename Real>
double score(const BasicFactorModel<Real>& m, UserIndex u, ItemIndex i) {
  const auto p = m.user(u);
  const auto q = m.item(i);
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) s += static_cast<double>(p[k]) * static_cast<double>(q[k]);
  return s;
}

// f = P_u . Q_{i+} - P_u . Q_{i-}
template <typename Real>
double preference(const BasicFactorModel<Real>& m, UserIndex u, ItemIndex positive, ItemIndex negative) {
  return score(m, u, positive) - score(m, u, negative);
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

struct RankedList {
  UserIndex user = 0;
  std::vector<ItemIndex> items;
  std::vector<double> scores;  // non-increasing
  bool truncated = false;      // fewer candidates than the requested cutoff
};

// Highest-scoring k_cut candidates, ties by ascending item index.
RankedList top_k(const FactorModel& m, UserIndex u, std::span<const ItemIndex> candidates,
                 std::size_t k_cut);
// Same, but enforces that no candidate is a training positive of u.
RankedList top_k(const FactorModel& m, UserIndex u, std::span<const ItemIndex> candidates,
                 std::size_t k_cut, const InteractionDataset& train);
// Full-catalog recommendation over every item u has not interacted with in `train`.
RankedList recommend(const FactorModel& m, const InteractionDataset& train, UserIndex u,
                     std::size_t k_cut);

struct CheckpointHeader {
  std::uint64_t n_users = 0;
  std::uint64_t n_items = 0;
  std::uint64_t latent_dim = 0;
  std::uint64_t seed = 0;
  std::string loss;
};

// Binary checkpoint: magic "EBPRCKPT", u32 version, u64 n_users, u64 n_items,
// u64 K, u64 seed, u32 length + loss name, then P and Q row-major as
// little-endian IEEE-754 binary32.
void write_checkpoint(const FactorModel& m, const CheckpointHeader& header, std::ostream& out);
FactorModel read_checkpoint(std::istream& in, CheckpointHeader* header = nullptr);

}  // namespace ebpr
