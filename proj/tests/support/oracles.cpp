#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace wfsel::testing {

double euler_maruyama(double q0, double s, const MutationRates& theta, double horizon, double dt, Rng& rng) {
  const auto steps = static_cast<std::int64_t>(std::llround(horizon / dt));
  const double sq = std::sqrt(dt);
  const double t1 = theta.theta1(), t2 = theta.theta2();
  double x = q0;
  for (std::int64_t i = 0; i < steps; ++i) {
    const double v = x * (1.0 - x);
    const double drift = s * v + 0.5 * (t1 * (1.0 - x) - t2 * x);
    x += drift * dt + std::sqrt(v) * sq * rng.normal();
    x = std::clamp(x, 0.0, 1.0);
  }
  return x;
}

std::vector<double> euler_maruyama_batch(std::int64_t count, double q0, double s, const MutationRates& theta,
                                         double horizon, double dt, std::uint64_t seed, int threads) {
  std::vector<double> out(static_cast<std::size_t>(count));
  threads = std::max(1, threads);
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      for (std::int64_t i = w; i < count; i += threads) {
        Rng rng(derive_stream(seed, {static_cast<std::uint64_t>(i)}));
        out[static_cast<std::size_t>(i)] = euler_maruyama(q0, s, theta, horizon, dt, rng);
      }
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf) {
  std::sort(a.begin(), a.end());
  const double n = static_cast<double>(a.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double f = cdf(a[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double chi_square_pvalue(std::span<const std::int64_t> counts, std::span<const double> probs, double min_expected) {
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  std::vector<std::pair<double, double>> pooled;  // observed, expected
  double obs = 0.0, expct = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    obs += static_cast<double>(counts[i]);
    expct += probs[i] * total;
    if (expct >= min_expected) {
      pooled.emplace_back(obs, expct);
      obs = expct = 0.0;
    }
  }
  if (pooled.empty()) return 1.0;
  pooled.back().first += obs;
  pooled.back().second += expct;
  if (pooled.size() < 2) return 1.0;
  double stat = 0.0;
  for (auto [o, e] : pooled) stat += (o - e) * (o - e) / e;
  boost::math::chi_squared dist(static_cast<double>(pooled.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

MeanSe mean_se(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  double m = 0.0;
  for (double v : x) m += v;
  m /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return {m, std::sqrt(ss / (n - 1.0) / n)};
}

double neutral_mean(double q0, const MutationRates& theta, double t) {
  const double p = theta.theta1() / theta.total();
  return p + (q0 - p) * std::exp(-theta.total() * t / 2.0);
}

double integrate(const std::function<double(double)>& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-12);
}

}  // namespace wfsel::testing
