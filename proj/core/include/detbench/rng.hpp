#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <string>
#include <string_view>
#include <type_traits>

namespace detbench {

namespace detail {
// SplitMix64 / Stafford variant 13 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

// One element of an RNG derivation path: a string tag or an integer index.
class RngLabel {
 public:
  RngLabel(const char* s) : hash_(hash_string(s)) {}
  RngLabel(std::string_view s) : hash_(hash_string(s)) {}
  RngLabel(const std::string& s) : hash_(hash_string(s)) {}
  template <typename T>
    requires std::is_integral_v<T>
  RngLabel(T v) : hash_(hash_integer(static_cast<std::uint64_t>(v))) {}

  std::uint64_t hash() const noexcept { return hash_; }

 private:
  static std::uint64_t hash_string(std::string_view s) noexcept;
  static std::uint64_t hash_integer(std::uint64_t v) noexcept;
  std::uint64_t hash_;
};

// Counter-based, splittable random stream. The value sequence is a pure
// function of (master seed, label path), so per-image streams do not depend
// on execution order or worker count.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream() : RngStream(derive(0, {})) {}

  static RngStream derive(std::uint64_t seed, std::initializer_list<RngLabel> path);

  // Stream whose path is this stream's path extended by `label`.
  RngStream child(RngLabel label) const;
  RngStream child(std::initializer_list<RngLabel> labels) const;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u64(); }

  // Two keyed rounds over the counter; output i depends only on (key, i).
  std::uint64_t next_u64() noexcept {
    const std::uint64_t c = ++counter_;
    const std::uint64_t z = detail::mix64(key_ ^ (c * 0xD1B54A32D192ED03ULL));
    return detail::mix64(z + key_ + c * 0x9E3779B97F4A7C15ULL);
  }
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }  // [0, 1)
  double uniform(double lo, double hi) noexcept;
  double normal();
  // Same values as n successive normal() calls, scaled by `scale`.
  void fill_normal(double* out, std::size_t n, double scale = 1.0);
  double rayleigh(double sigma) noexcept;
  std::uint64_t below(std::uint64_t n) noexcept;  // uniform integer in [0, n)
  bool coin() noexcept { return (next_u64() >> 63) != 0; }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t position() const noexcept { return counter_; }

 private:
  explicit RngStream(std::uint64_t key) : key_(key) {}
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace detbench
