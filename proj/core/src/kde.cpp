#include "wfsel/kde.hpp"

#include <algorithm>
#include <cmath>

#include "wfsel/error.hpp"

namespace wfsel {

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014327;

void check_bandwidth(double h) {
  if (!(h > 0.0) || !std::isfinite(h)) raise(ErrorKind::kDomain, "bandwidth must be finite and > 0");
}
}  // namespace

double scott_bandwidth(std::span<const double> draws) {
  const std::size_t n = draws.size();
  if (n < 2) raise(ErrorKind::kDegenerateBank, "bandwidth needs at least two draws");
  const auto [lo, hi] = std::minmax_element(draws.begin(), draws.end());
  if (*lo == *hi) raise(ErrorKind::kDegenerateBank, "all draws are identical");
  double mean = 0.0;
  for (double x : draws) mean += x;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : draws) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0.0)) raise(ErrorKind::kDegenerateBank, "all draws are identical");
  return sd * std::pow(static_cast<double>(n), -0.2);
}

double kde_eval(double q, std::span<const double> draws, double h) {
  check_bandwidth(h);
  if (draws.empty()) raise(ErrorKind::kDegenerateBank, "empty bank");
  double total = 0.0;
  for (double x : draws) {
    const double z = (q - x) / h;
    total += std::exp(-0.5 * z * z);
  }
  return total * kInvSqrt2Pi / (h * static_cast<double>(draws.size()));
}

double kde_eval_reflected(double q, std::span<const double> draws, double h) {
  check_bandwidth(h);
  if (draws.empty()) raise(ErrorKind::kDegenerateBank, "empty bank");
  if (q < 0.0 || q > 1.0) return 0.0;
  double total = 0.0;
  for (double x : draws) {
    for (double c : {x, -x, 2.0 - x}) {
      const double z = (q - c) / h;
      total += std::exp(-0.5 * z * z);
    }
  }
  return total * kInvSqrt2Pi / (h * static_cast<double>(draws.size()));
}

Kde::Kde(std::vector<double> draws, double h, bool reflect)
    : sorted_(std::move(draws)), h_(h), reflect_(reflect) {
  check_bandwidth(h);
  if (sorted_.empty()) raise(ErrorKind::kDegenerateBank, "empty bank");
  std::sort(sorted_.begin(), sorted_.end());
}

Kde Kde::scott(std::vector<double> draws, bool reflect) {
  const double h = scott_bandwidth(draws);
  return Kde(std::move(draws), h, reflect);
}

double Kde::window_sum(double q) const {
  const double reach = kCutoff * h_;
  auto first = std::lower_bound(sorted_.begin(), sorted_.end(), q - reach);
  auto last = std::upper_bound(first, sorted_.end(), q + reach);
  double total = 0.0;
  for (auto it = first; it != last; ++it) {
    const double z = (q - *it) / h_;
    total += std::exp(-0.5 * z * z);
  }
  return total;
}

double Kde::operator()(double q) const {
  double total = window_sum(q);
  if (reflect_) {
    if (q < 0.0 || q > 1.0) return 0.0;
    total += window_sum(-q) + window_sum(2.0 - q);
  }
  return total * kInvSqrt2Pi / (h_ * static_cast<double>(sorted_.size()));
}

void Kde::accumulate_on_grid(std::span<double> out, double weight) const {
  if (out.size() < 2) raise(ErrorKind::kDomain, "grid needs at least two nodes");
  const double intervals = static_cast<double>(out.size() - 1);
  const double scale = weight * kInvSqrt2Pi / (h_ * static_cast<double>(sorted_.size()));
  const double reach = kCutoff * h_;
  const auto last_node = static_cast<std::ptrdiff_t>(out.size() - 1);
  auto deposit = [&](double centre) {
    const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil((centre - reach) * intervals)));
    const auto hi = std::min<std::ptrdiff_t>(last_node, static_cast<std::ptrdiff_t>(std::floor((centre + reach) * intervals)));
    for (std::ptrdiff_t i = lo; i <= hi; ++i) {
      const double z = (static_cast<double>(i) / intervals - centre) / h_;
      out[static_cast<std::size_t>(i)] += scale * std::exp(-0.5 * z * z);
    }
  };
  for (double x : sorted_) {
    deposit(x);
    if (reflect_) {
      deposit(-x);
      deposit(2.0 - x);
    }
  }
}

}  // namespace wfsel
