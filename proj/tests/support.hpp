#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include <gtest/gtest.h>

namespace echolab::testing {

/// Seeded value source for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  std::uint64_t seed() { return rng_(); }

 private:
  std::mt19937_64 rng_;
};

/// Runs `body(gen)` for `cases` generated cases. A failure names the case
/// so it can be replayed with Gen(base + case).
template <class Body>
void for_all(int cases, Body&& body, std::uint64_t base = 20240601) {
  for (int i = 0; i < cases; ++i) {
    SCOPED_TRACE("property case " + std::to_string(i) + " (seed " + std::to_string(base + i) + ")");
    Gen gen(base + static_cast<std::uint64_t>(i));
    body(gen);
    if (::testing::Test::HasFatalFailure() || ::testing::Test::HasNonfatalFailure()) return;
  }
}

inline double rel_err(double actual, double expected) {
  return std::abs(actual - expected) / std::abs(expected);
}

}  // namespace echolab::testing
