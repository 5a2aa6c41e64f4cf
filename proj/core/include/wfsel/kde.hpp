#pragma once

#include <span>
#include <vector>

namespace wfsel {

// sd * n^(-1/5) with the n-1 sample standard deviation. Throws
// kDegenerateBank for fewer than two draws or zero spread.
double scott_bandwidth(std::span<const double> draws);

// Gaussian kernel density estimate, no boundary correction.
double kde_eval(double q, std::span<const double> draws, double h);

// Same estimate with the kernel mass beyond 0 and 1 reflected back inside.
double kde_eval_reflected(double q, std::span<const double> draws, double h);

// Sorted draws plus bandwidth; evaluation skips draws more than `cutoff`
// bandwidths away, where a kernel contributes below exp(-cutoff^2 / 2).
class Kde {
 public:
  Kde(std::vector<double> draws, double h, bool reflect = false);
  static Kde scott(std::vector<double> draws, bool reflect = false);

  double bandwidth() const { return h_; }
  bool reflected() const { return reflect_; }
  std::size_t size() const { return sorted_.size(); }
  const std::vector<double>& sorted() const { return sorted_; }

  double operator()(double q) const;

  // Adds weight * estimate(x_i) to out[i] for x_i = i / (out.size() - 1).
  void accumulate_on_grid(std::span<double> out, double weight) const;

  static constexpr double kCutoff = 10.0;

 private:
  double window_sum(double q) const;

  std::vector<double> sorted_;
  double h_;
  bool reflect_;
};

}  // namespace wfsel
