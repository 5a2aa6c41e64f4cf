#include "wfsel/selection.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wfsel/error.hpp"

namespace wfsel {

double phi(double x, double s, const MutationRates& theta) {
  return 0.5 * s * (-s * x * x + (s - theta.total()) * x + theta.theta1());
}

PhiBounds phi_bounds(double s, const MutationRates& theta) {
  const double at0 = phi(0.0, s, theta);
  const double at1 = phi(1.0, s, theta);
  PhiBounds b{std::min(at0, at1), std::max(at0, at1)};
  if (s != 0.0) {
    // -s^2/2 < 0, so the vertex is the maximum when it lies inside [0, 1]
    const double vertex = (s - theta.total()) / (2.0 * s);
    if (vertex > 0.0 && vertex < 1.0) b.upper = std::max(b.upper, phi(vertex, s, theta));
  }
  return b;
}

SelectedSampler::SelectedSampler(double s, MutationRates theta, double horizon,
                                 std::shared_ptr<const NeutralKernel> kernel, SelectionOptions options)
    : s_(s), theta_(theta), horizon_(horizon), kernel_(std::move(kernel)), options_(options),
      bounds_(phi_bounds(s, theta)) {
  if (!std::isfinite(s)) raise(ErrorKind::kDomain, "selection coefficient must be finite");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) raise(ErrorKind::kDomain, "horizon must be finite and > 0");
  if (!(options_.bound_inflation >= 0.0)) raise(ErrorKind::kDomain, "bound inflation must be >= 0");
  if (options_.max_attempts < 1) raise(ErrorKind::kDomain, "attempt budget must be >= 1");
  if (!kernel_) kernel_ = shared_kernel(theta_);
  if (!(kernel_->theta() == theta_)) raise(ErrorKind::kDomain, "kernel mutation rates differ from the model");
  bounds_.upper += options_.bound_inflation;
}

ExactDrawReport SelectedSampler::draw(double q0, Rng& rng) const {
  if (!(q0 > 0.0 && q0 < 1.0)) raise(ErrorKind::kDomain, "starting frequency must lie in (0, 1)");
  ExactDrawReport report;
  if (s_ == 0.0) {
    report.value = kernel_->sample(q0, horizon_, rng);
    report.attempts = 1;
    if (options_.record_skeletons) report.skeleton_sizes.push_back(0);
    return report;
  }
  const double range = bounds_.upper - bounds_.lower;
  const double rate = range * horizon_;
  const double endpoint_shift = std::max(s_, 0.0);
  std::vector<double> times;
  std::vector<double> marks;
  for (std::int64_t attempt = 1; attempt <= options_.max_attempts; ++attempt) {
    const std::int64_t kappa = rate > 0.0 ? rng.poisson(rate) : 0;
    if (options_.record_skeletons) report.skeleton_sizes.push_back(kappa);
    times.resize(static_cast<std::size_t>(kappa));
    for (double& t : times) t = rng.uniform() * horizon_;
    std::sort(times.begin(), times.end());
    marks.resize(times.size());
    for (double& u : marks) u = rng.uniform();

    double x = q0;
    double t_prev = 0.0;
    bool survived = true;
    for (std::size_t i = 0; i < times.size(); ++i) {
      x = kernel_->sample(x, times[i] - t_prev, rng);
      t_prev = times[i];
      if (marks[i] < (phi(x, s_, theta_) - bounds_.lower) / range) {
        survived = false;
        break;
      }
    }
    if (!survived) continue;
    x = kernel_->sample(x, horizon_ - t_prev, rng);
    if (rng.uniform() <= std::exp(s_ * x - endpoint_shift)) {
      report.value = x;
      report.attempts = attempt;
      return report;
    }
  }
  raise(ErrorKind::kAttemptsExhausted, "no proposal accepted in " + std::to_string(options_.max_attempts) +
                                           " attempts (s=" + std::to_string(s_) +
                                           ", q0=" + std::to_string(q0) + ")");
}

ExactDrawReport sample_selected(double q0, double s, const MutationRates& theta, double horizon, Rng& rng,
                                const SelectionOptions& options) {
  const SelectedSampler sampler(s, theta, horizon, nullptr, options);
  return sampler.draw(q0, rng);
}

}  // namespace wfsel
