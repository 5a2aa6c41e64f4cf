#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace wfsel {

std::uint64_t splitmix64(std::uint64_t x);

// Hashes a master seed and a path of integers into an independent stream id.
std::uint64_t derive_stream(std::uint64_t master, std::initializer_list<std::uint64_t> path);

// Seeded Mersenne Twister with the handful of variates the samplers need.
// Distributions come from Boost.Random so streams are reproducible across
// standard library implementations.
class Rng {
 public:
  using engine_type = std::mt19937_64;
  using result_type = engine_type::result_type;

  explicit Rng(std::uint64_t stream_id);

  static constexpr result_type min() { return engine_type::min(); }
  static constexpr result_type max() { return engine_type::max(); }
  result_type operator()() { return engine_(); }

  std::uint64_t stream_id() const { return stream_id_; }

  // Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  double exponential();
  std::int64_t poisson(double mean);
  std::int64_t binomial(std::int64_t trials, double p);

  // log of a Gamma(shape, 1) variate; stays finite for shapes far below 1.
  double log_gamma_variate(double shape);
  // Beta(a, b) computed from log-gamma variates so tiny shapes do not give 0/0.
  double beta(double a, double b);

 private:
  engine_type engine_;
  std::uint64_t stream_id_;
};

}  // namespace wfsel
