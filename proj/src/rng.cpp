#include "cmd/rng.hpp"

#include <cmath>
#include <random>

#include "cmd/errors.hpp"

namespace cmd {

Vec gaussian(std::uint64_t seed, Index n) {
  if (n < 1) throw ContractError("gaussian: n must be >= 1");
  std::mt19937_64 gen(seed);
  const double two_pi = 2.0 * M_PI;
  Vec out(n);
  for (Index i = 0; i < n; i += 2) {
    // top 53 bits -> u1 in (0, 1], u2 in [0, 1)
    const double u1 =
        (static_cast<double>(gen() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(gen() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    out[i] = r * std::cos(two_pi * u2);
    if (i + 1 < n) out[i + 1] = r * std::sin(two_pi * u2);
  }
  return out;
}

}  // namespace cmd
