#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ebpr {

using UserIndex = std::uint32_t;
using ItemIndex = std::uint32_t;

// Error hierarchy. The CLI maps each family onto a distinct exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed, missing or degenerate input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// Inconsistent configuration (e.g. a loss that needs E but none was given).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite parameters or values reaching a logarithm.
class NumericError : public Error {
 public:
  using Error::Error;
};

// All sampling in the library goes through this engine and the helpers below,
// never through std::*_distribution, whose output is implementation-defined.
// That keeps split manifests and checkpoints identical across toolchains.
using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent sub-seeds from one seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  return mix_seed(mix_seed(base) ^ mix_seed(stream + 0x632be59bd9b4e019ULL));
}

// Uniform integer in [0, n), rejection sampled so there is no modulo bias.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: empty range");
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - (max % n + 1) % n;
  std::uint64_t x = rng();
  while (x > limit) x = rng();
  return x % n;
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_real(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(rng);
}

// Standard normal via Box-Muller (one value per call, the sine branch dropped).
double standard_normal(Rng& rng);

template <typename T>
void shuffle(std::span<T> values, Rng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(values[i - 1], values[j]);
  }
}

template <typename T>
void shuffle(std::vector<T>& values, Rng& rng) {
  shuffle(std::span<T>(values), rng);
}

// 64-bit FNV-1a, used for dataset fingerprints in run manifests.
class Fingerprint {
 public:
  void add_bytes(const void* data, std::size_t n);
  template <typename T>
  void add(const T& value) {
    add_bytes(&value, sizeof(T));
  }
  void add(const std::string& s) {
    add(s.size());
    add_bytes(s.data(), s.size());
  }
  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::string to_hex(std::uint64_t value);

// Shortest decimal that round-trips to the same double.
std::string format_real(double value);

}  // namespace ebpr
