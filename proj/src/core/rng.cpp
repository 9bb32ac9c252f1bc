#include "fastgan/rng.hpp"

#include <sstream>

namespace fastgan {

double Rng::uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

double Rng::uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
}

bool Rng::bernoulli(double p) { return uniform() < p; }

void Rng::fill_normal(std::span<Real> out, double mean, double stddev) {
  std::normal_distribution<double> dist(mean, stddev);
  for (auto& v : out) v = static_cast<Real>(dist(engine_));
}

std::string Rng::state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::set_state(const std::string& s) {
  std::istringstream is(s);
  is >> engine_;
  if (!is) throw Error("malformed RNG state");
}

}  // namespace fastgan
