#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>

#include "fastgan/common.hpp"

namespace fastgan {

// Seeded random stream. Distributions are constructed per call so that the
// engine state alone determines every future draw (checkpointable).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);  // inclusive
  bool bernoulli(double p);
  void fill_normal(std::span<Real> out, double mean = 0.0, double stddev = 1.0);

  std::string state() const;
  void set_state(const std::string& s);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fastgan
