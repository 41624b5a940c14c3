#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace foda {

/// Counter-based 64-bit generator ("splitmix64 counter mode").
///
/// Output i of stream (key) is `mix(key + (i + 1) * 0x9E3779B97F4A7C15)`
/// where `mix` is the splitmix64 finalizer:
///
///     z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
///     z ^= z >> 27; z *= 0x94D049BB133111EB;
///     z ^= z >> 31;
///
/// Uniform doubles take the top 53 bits. Gaussians use the Box-Muller
/// transform with both variates consumed in order. Independent substreams
/// are derived with `split(tag)`, which keys a new generator from
/// `mix(key ^ mix(tag))`. Everything is integer arithmetic plus f64, so a
/// seed reproduces the same stream on every platform with IEEE doubles.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : key_(mix(seed)) {}

  static std::uint64_t mix(std::uint64_t z);

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform integer in [0, n). `n` must be positive.
  std::uint64_t below(std::uint64_t n);
  double gaussian();
  /// Samples index i with probability weights[i] / sum(weights).
  std::size_t categorical(std::span<const double> weights);

  CounterRng split(std::uint64_t tag) const;

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t counter() const { return counter_; }

 private:
  CounterRng(std::uint64_t key, int) : key_(key) {}

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// 64-bit FNV-1a over the bytes of `s`.
std::uint64_t fnv1a(std::string_view s, std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace foda
