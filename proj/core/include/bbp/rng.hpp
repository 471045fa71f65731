#pragma once
// Deterministic random numbers. std::mt19937_64's output sequence is pinned by
// the standard, but the <random> distributions are not, so every mapping from
// raw bits to doubles/ints lives here. Sub-streams are derived by hashing a
// master seed with integer tags; results are therefore independent of the
// order in which components consume randomness.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace bbp {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stable sub-seed for a labelled stream, e.g. derive_seed(master, {kCaseTag, case_id}).
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t t : tags) h = splitmix64(h ^ (t + 0x9e3779b97f4a7c15ULL));
  return h;
}

class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed ^ 0xabcdef1234567890ULL)) {}

  // Uniform in [0, 1), 53 usable bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive bounds.
  int uniform_int(int lo, int hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(engine_() % span);
  }

  // Marsaglia polar method; cached second variate keeps call counts stable.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    cached_ = v * m;
    has_cached_ = true;
    return u * m;
  }

  std::uint64_t next_raw() { return engine_(); }

private:
  std::mt19937_64 engine_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace bbp
