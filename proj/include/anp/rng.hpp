// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace anp {

/// Seedable stream of random draws with a fully specified algorithm.
///
/// Engine: std::mt19937_64 seeded with its standard single-integer seeding.
/// Draws are derived from raw 64-bit outputs by fixed formulas, never through
/// the implementation-defined std:: distributions, so a seed reproduces the
/// same stream on every platform:
///
///   uniform()        (u >> 11) * 2^-53                        in [0, 1)
///   uniform_int(a,b) rejection on u to the largest multiple of (b-a+1)
///   normal()         Box-Muller, sqrt(-2 ln(1 - u1)) * cos(2 pi u2);
///                    two uniforms per draw, nothing cached
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Inclusive on both ends.
  std::size_t uniform_int(std::size_t lo, std::size_t hi);
  double normal();
  std::vector<double> normals(std::size_t count);

  /// `count` distinct values from [0, population), in draw order (partial Fisher-Yates).
  std::vector<std::size_t> sample_without_replacement(std::size_t population, std::size_t count);

  /// Textual engine state; restoring it resumes the exact stream position.
  std::string state() const;
  void set_state(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

}  // namespace anp
