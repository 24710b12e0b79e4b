#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "sacfv/errors.hpp"

namespace sacfv {

// ---------------------------------------------------------------------------
// Philox4x32-10 counter-based generator
// ---------------------------------------------------------------------------
// Each (seed, sample, step) triple maps to a fixed 4x32-bit counter block, so
// increments can be generated independently, in any order, on any thread.

namespace philox {

inline constexpr std::uint32_t kMult0 = 0xD2511F53u;
inline constexpr std::uint32_t kMult1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void round_once(std::array<std::uint32_t, 4>& ctr, std::array<std::uint32_t, 2>& key) {
  const std::uint64_t p0 = static_cast<std::uint64_t>(kMult0) * ctr[0];
  const std::uint64_t p1 = static_cast<std::uint64_t>(kMult1) * ctr[2];
  const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
  const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
  const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
  const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
  ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  key[0] += kWeyl0;
  key[1] += kWeyl1;
}

inline std::array<std::uint32_t, 4> block(std::uint64_t seed, std::uint64_t step,
                                          std::uint64_t sample) {
  std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed),
                                   static_cast<std::uint32_t>(seed >> 32)};
  std::array<std::uint32_t, 4> ctr{
      static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
      static_cast<std::uint32_t>(sample), static_cast<std::uint32_t>(sample >> 32)};
  for (int r = 0; r < 10; ++r) round_once(ctr, key);
  return ctr;
}

}  // namespace philox

/// Uniform deviate in the open interval (0,1) from the first two words of the
/// Philox block: 53 significant bits, offset half an ulp from both endpoints.
inline double uniform_open01(std::uint64_t seed, std::uint64_t step, std::uint64_t sample) {
  const auto words = philox::block(seed, step, sample);
  const std::uint64_t x =
      (static_cast<std::uint64_t>(words[1]) << 32) | static_cast<std::uint64_t>(words[0]);
  return (static_cast<double>(x >> 11) + 0.5) * 0x1p-53;
}

// ---------------------------------------------------------------------------
// Inverse normal CDF (Wichura's PPND16 rational approximation)
// ---------------------------------------------------------------------------

/// Quantile of the standard normal, accurate to about 1e-15 on (0,1).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw validation_error("normal_quantile: p outside (0,1)");
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        q * (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                  6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
              1.3314166789178437745e2) * r + 3.3871328727963666080);
    const double den =
        (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
              3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
            5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
          4.2313330701600911252e1) * r + 1.0);
    return num / den;
  }
  double r = std::sqrt(-std::log(std::min(p, 1.0 - p)));
  double x;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        ((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
             2.41780725177450611770e-1) * r + 1.27045825245236838258) * r +
           3.64784832476320460504) * r + 5.76949722146069140550) * r +
         4.63033784615654529590) * r + 1.42343711074968357734;
    const double den =
        ((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
             1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
           6.89767334985100004550e-1) * r + 1.67638483018380384940) * r +
         2.05319162663775882187) * r + 1.0;
    x = num / den;
  } else {
    r -= 5.0;
    const double num =
        ((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
             1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
           2.96560571828504891230e-1) * r + 1.78482653991729133580) * r +
         5.46378491116411436990) * r + 6.65790464350110377720;
    const double den =
        ((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
             1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
           1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
         5.99832206555887937690e-1) * r + 1.0;
    x = num / den;
  }
  return q < 0.0 ? -x : x;
}

/// Standard normal deviate for the (seed, step, sample) triple.
inline double normal_deviate(std::uint64_t seed, std::uint64_t step, std::uint64_t sample) {
  return normal_quantile(uniform_open01(seed, step, sample));
}

// ---------------------------------------------------------------------------
// Brownian increments
// ---------------------------------------------------------------------------

/// One sample path of the driving Wiener process, stored as increments
/// Delta W_n = W(t_{n+1}) - W(t_n) with t_n = n dt.
struct BrownianPath {
  int n_steps = 0;
  double dt = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t sample_index = 0;
  std::vector<double> increments;

  double increment(int n) const {
    return increments[static_cast<std::size_t>(n)];
  }

  /// W(t_n) by partial summation (W(0) = 0).
  double value_at_step(int n) const {
    double w = 0.0;
    for (int i = 0; i < n; ++i) w += increments[static_cast<std::size_t>(i)];
    return w;
  }
};

/// Draws the path for (seed, sample_index): increment n uses counter step n.
inline BrownianPath sample_path(std::uint64_t seed, std::uint64_t sample_index, int n_steps,
                                double dt) {
  if (n_steps < 1) throw validation_error("sample_path: n_steps must be positive");
  if (!(dt > 0.0)) throw validation_error("sample_path: dt must be positive");
  BrownianPath path;
  path.n_steps = n_steps;
  path.dt = dt;
  path.seed = seed;
  path.sample_index = sample_index;
  path.increments.resize(static_cast<std::size_t>(n_steps));
  const double scale = std::sqrt(dt);
  for (int n = 0; n < n_steps; ++n)
    path.increments[static_cast<std::size_t>(n)] =
        scale * normal_deviate(seed, static_cast<std::uint64_t>(n), sample_index);
  return path;
}

namespace detail {

/// Fixed-association block sum. Power-of-two blocks use a balanced pairwise
/// tree, which makes power-of-two coarsenings compose bit-exactly
/// (coarsen by 2 twice == coarsen by 4); other sizes fold left to right.
inline double block_sum(const double* a, int n) {
  if (n == 1) return a[0];
  if ((n & (n - 1)) == 0) {
    const int half = n / 2;
    return block_sum(a, half) + block_sum(a + half, half);
  }
  double s = a[0];
  for (int i = 1; i < n; ++i) s += a[i];
  return s;
}

}  // namespace detail

/// Sums consecutive blocks of `factor` increments, producing the same Wiener
/// path sampled on the coarser grid. Requires factor | n_steps.
inline BrownianPath coarsen(const BrownianPath& fine, int factor) {
  if (factor < 1) throw validation_error("coarsen: factor must be positive");
  if (fine.n_steps % factor != 0)
    throw validation_error("coarsen: factor must divide the step count");
  BrownianPath coarse;
  coarse.n_steps = fine.n_steps / factor;
  coarse.dt = fine.dt * factor;
  coarse.seed = fine.seed;
  coarse.sample_index = fine.sample_index;
  coarse.increments.resize(static_cast<std::size_t>(coarse.n_steps));
  for (int n = 0; n < coarse.n_steps; ++n)
    coarse.increments[static_cast<std::size_t>(n)] =
        detail::block_sum(fine.increments.data() + static_cast<std::size_t>(n) * factor,
                          factor);
  return coarse;
}

}  // namespace sacfv
