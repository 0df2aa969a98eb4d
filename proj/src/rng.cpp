// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0

#include "anp/rng.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace anp {

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::size_t Rng::uniform_int(std::size_t lo, std::size_t hi) {
  if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
  const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
  if (range == 0) return lo + engine_();  // full 64-bit range
  const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t limit = max - (max % range + 1) % range;
  std::uint64_t u = engine_();
  while (u > limit) u = engine_();
  return lo + static_cast<std::size_t>(u % range);
}

double Rng::normal() {
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<double> Rng::normals(std::size_t count) {
  std::vector<double> out(count);
  for (double& v : out) v = normal();
  return out;
}

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t population, std::size_t count) {
  if (count > population) {
    throw std::invalid_argument("sample_without_replacement: count " + std::to_string(count) +
                                " exceeds population " + std::to_string(population));
  }
  std::vector<std::size_t> pool(population);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = uniform_int(i, population - 1);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return pool;
}

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::set_state(const std::string& state) {
  std::istringstream is(state);
  is >> engine_;
  if (!is) throw std::runtime_error("rng: malformed engine state");
}

}  // namespace anp
