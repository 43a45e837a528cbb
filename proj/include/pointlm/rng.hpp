#pragma once
// Self-contained counter/stream RNG so runs reproduce bit-for-bit across
// platforms and across save/restore. std::mt19937 + std::*_distribution are
// avoided on purpose: distribution output is implementation-defined, which
// would break checkpoint determinism between standard libraries.
//
// Generator is xoshiro256++ seeded via splitmix64. One master seed fans out
// into per-purpose streams through derive_seed(master, tag), so adding a new
// consumer never perturbs the draws of existing ones.

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "pointlm/common.hpp"

namespace pointlm {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// FNV-1a over the tag, mixed with the master seed. Streams for distinct tags
// are effectively independent; same (master, tag) is always the same stream.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t s = master ^ h;
  return splitmix64(s);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                 std::uint64_t index) {
  return derive_seed(master, std::string(tag) + "/" + std::to_string(index));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
    has_cached_normal_ = false;
    cached_normal_ = 0.0;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1): 53 random bits, exact double.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Rejection-free modulo bias is negligible for
  // the small n used here, but do it properly anyway.
  std::uint64_t uniform_index(std::uint64_t n) {
    require(n > 0, "Rng::uniform_index: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // Box-Muller, cached pair. Kept manual for the same portability reason.
  double normal() {
    if (has_cached_normal_) {
      has_cached_normal_ = false;
      return cached_normal_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    cached_normal_ = r * std::sin(theta);
    has_cached_normal_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Serialized state: four words plus the Box-Muller cache, enough to resume
  // the stream mid-pair.
  struct State {
    std::uint64_t s[4];
    bool has_cached_normal;
    double cached_normal;
  };

  State state() const {
    State st;
    for (int i = 0; i < 4; ++i) st.s[i] = s_[i];
    st.has_cached_normal = has_cached_normal_;
    st.cached_normal = cached_normal_;
    return st;
  }

  void set_state(const State& st) {
    for (int i = 0; i < 4; ++i) s_[i] = st.s[i];
    has_cached_normal_ = st.has_cached_normal;
    cached_normal_ = st.cached_normal;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4] = {1, 2, 3, 4};
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

// Fill helpers used by parameter init and data synthesis.
template <typename S>
void fill_normal(Mat<S>& m, Rng& rng, double mean, double stddev) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = S(rng.normal(mean, stddev));
}

template <typename S>
void fill_uniform(Mat<S>& m, Rng& rng, double lo, double hi) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      m(i, j) = S(rng.uniform(lo, hi));
}

}  // namespace pointlm
