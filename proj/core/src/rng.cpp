#include "detbench/rng.hpp"

#include <cmath>

#include <boost/random/normal_distribution.hpp>

namespace detbench {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

using detail::mix64;

constexpr std::uint64_t absorb(std::uint64_t key, std::uint64_t label) noexcept {
  return mix64(mix64(key + kGolden) ^ label);
}

}  // namespace

std::uint64_t RngLabel::hash_string(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return mix64(h ^ 0x5354524C41424C45ULL);
}

std::uint64_t RngLabel::hash_integer(std::uint64_t v) noexcept {
  return mix64(v ^ 0x494E544C4142454CULL);
}

RngStream RngStream::derive(std::uint64_t seed, std::initializer_list<RngLabel> path) {
  std::uint64_t key = mix64(seed ^ 0xD6E8FEB86659FD93ULL);
  for (const auto& label : path) key = absorb(key, label.hash());
  return RngStream(key);
}

RngStream RngStream::child(RngLabel label) const { return RngStream(absorb(key_, label.hash())); }

RngStream RngStream::child(std::initializer_list<RngLabel> labels) const {
  std::uint64_t key = key_;
  for (const auto& label : labels) key = absorb(key, label.hash());
  return RngStream(key);
}

double RngStream::uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

double RngStream::normal() {
  boost::random::normal_distribution<double> dist(0.0, 1.0);
  return dist(*this);
}

void RngStream::fill_normal(double* out, std::size_t n, double scale) {
  boost::random::normal_distribution<double> dist(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) out[i] = scale * dist(*this);
}

double RngStream::rayleigh(double sigma) noexcept {
  const double u = uniform();
  return sigma * std::sqrt(-2.0 * std::log1p(-u));
}

std::uint64_t RngStream::below(std::uint64_t n) noexcept {
  if (n <= 1) return 0;
  // Lemire's multiply-shift with rejection for exact uniformity.
  for (;;) {
    const unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    const auto low = static_cast<std::uint64_t>(m);
    if (low >= n || low >= (-n) % n) return static_cast<std::uint64_t>(m >> 64);
  }
}

}  // namespace detbench
