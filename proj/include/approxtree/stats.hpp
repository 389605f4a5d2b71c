#pragma once

#include <cstdint>
#include <random>

namespace approxtree {

using Rng = std::mt19937_64;

/// Deterministic, well-mixed seed for an independent stream `stream` of a
/// base seed (splitmix64 finalizer over both words).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

inline Rng make_rng(std::uint64_t base, std::uint64_t stream = 0) { return Rng(derive_seed(base, stream)); }

double normal_cdf(double z);
/// Inverse standard normal CDF; p in (0,1).
double normal_quantile(double p);
/// Upper tail P(X > t) for X ~ chi-squared with df degrees of freedom.
/// df = 0 is the point mass at zero.
double chi2_sf(double t, double df);

}  // namespace approxtree
