#include "wfsel/rng.hpp"

#include <boost/random/binomial_distribution.hpp>
#include <boost/random/exponential_distribution.hpp>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <cmath>
#include <limits>

#include "wfsel/error.hpp"

namespace wfsel {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_stream(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t p : path) h = splitmix64(h ^ splitmix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

namespace {
std::mt19937_64 seeded_engine(std::uint64_t stream_id) {
  const std::uint64_t a = splitmix64(stream_id);
  const std::uint64_t b = splitmix64(a);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}
}  // namespace

Rng::Rng(std::uint64_t stream_id) : engine_(seeded_engine(stream_id)), stream_id_(stream_id) {}

double Rng::uniform() {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() { return boost::random::normal_distribution<double>(0.0, 1.0)(engine_); }

double Rng::exponential() {
  return boost::random::exponential_distribution<double>(1.0)(engine_);
}

std::int64_t Rng::poisson(double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) raise(ErrorKind::kDomain, "poisson mean must be finite and >= 0");
  if (mean == 0.0) return 0;
  return boost::random::poisson_distribution<std::int64_t, double>(mean)(engine_);
}

std::int64_t Rng::binomial(std::int64_t trials, double p) {
  if (trials < 0 || !(p >= 0.0 && p <= 1.0)) raise(ErrorKind::kDomain, "binomial requires trials >= 0 and p in [0, 1]");
  if (trials == 0 || p == 0.0) return 0;
  if (p == 1.0) return trials;
  return boost::random::binomial_distribution<std::int64_t, double>(trials, p)(engine_);
}

double Rng::log_gamma_variate(double shape) {
  if (!(shape > 0.0) || !std::isfinite(shape)) raise(ErrorKind::kDomain, "gamma shape must be finite and > 0");
  if (shape >= 1.0) {
    return std::log(boost::random::gamma_distribution<double>(shape, 1.0)(engine_));
  }
  // G(a) = G(a + 1) * U^(1/a)
  const double g = boost::random::gamma_distribution<double>(shape + 1.0, 1.0)(engine_);
  return std::log(g) + std::log(uniform()) / shape;
}

double Rng::beta(double a, double b) {
  const double la = log_gamma_variate(a);
  const double lb = log_gamma_variate(b);
  if (la >= lb) return 1.0 / (1.0 + std::exp(lb - la));
  const double r = std::exp(la - lb);
  return r / (1.0 + r);
}

}  // namespace wfsel
