#pragma once

#include <random>

#include "shearband/params.hpp"

namespace shearband::testing {

// Samples the admissible range with the fast-slow separation n << alpha-m-n
// under which the closed-form spectra keep their sign patterns.
inline Params sample_params(std::mt19937_64& rng, double n_lo = 1e-3, double n_hi = 0.05) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (;;) {
    const double n = n_lo + (n_hi - n_lo) * u(rng);
    const double alpha = 0.05 + 2.5 * u(rng);
    const double m_hi = alpha - n - std::max(0.05, 12.0 * n);
    if (m_hi <= -0.95) continue;
    const double m = -0.95 + (m_hi + 0.95) * u(rng);
    const double lmax = lambda_max(alpha, m, n);
    if (!(lmax > 1e-3)) continue;
    Params p{alpha, m, n, (0.1 + 0.8 * u(rng)) * lmax};
    const double mu11 = -(1.0 + m + n) / (alpha - m - n);
    if (std::abs(mu11 + 1.0) < 1e-3) continue;  // keep S1 well-conditioned
    const Exponents e = exponents(p);
    if (std::abs(e.b - p.lambda) < 1e-6) continue;
    return p;
  }
}

}  // namespace shearband::testing
