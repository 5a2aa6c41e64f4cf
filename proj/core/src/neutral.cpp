#include "wfsel/neutral.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#ifdef WFSEL_HAVE_FLOAT128
#include <boost/multiprecision/float128.hpp>
#endif
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <string>

#include "wfsel/error.hpp"

namespace wfsel {

namespace {

using Extended = long double;
using Wide = boost::multiprecision::cpp_bin_float_50;
#ifdef WFSEL_HAVE_FLOAT128
using Quad = boost::multiprecision::float128;
#endif

struct PrecisionStall {};

void check_theta_total(double theta) {
  if (!(theta > 0.0) || !std::isfinite(theta)) {
    raise(ErrorKind::kDomain, "theta must be finite and > 0, got " + std::to_string(theta));
  }
}

void check_time(double t, double min_horizon) {
  if (!std::isfinite(t) || !(t >= min_horizon) || !(t > 0.0)) {
    raise(ErrorKind::kIterationCap, "time " + std::to_string(t) + " is below the exact-sampler minimum " +
                                  std::to_string(min_horizon));
  }
}

template <class Real>
Real log_coeff_a_impl(std::int64_t k, std::int64_t m, const Real& theta) {
  using boost::math::lgamma;
  using std::log;
  if (k == 0) return Real(0);
  const Real kk(k);
  const Real mm(m);
  return log(theta + 2 * kk - 1) + lgamma(theta + mm + kk - 1) - lgamma(theta + mm) -
         lgamma(mm + 1) - lgamma(kk - mm + 1);
}

// q_m(t) = sum_{k >= m} (-1)^{k-m} b_k with b_k = a_{km} exp(-k(k+theta-1)t/2).
// Terms are generated by their ratio; once the ratio bound drops below one
// every partial sum brackets q_m and the next term bounds the gap.
template <class Real>
class WeightSeries {
 public:
  // diag is b_m = a_{mm} exp(-m(m+theta-1)t/2), carried across m by DiagonalTerms.
  WeightSeries(std::int64_t m, const Real& diag, const Real& theta, const Real& t)
      : m_(m), theta_(theta) {
    using std::exp;
    decay_ = exp(-t);
    exp_factor_ = exp(-(2 * Real(m) + theta) * t / 2);
    j_ = m;
    sum_ = diag;
    abs_mass_ = diag;
    next_ = diag * ratio(j_);
    while (!past_onset()) advance();
  }

  void advance() {
    const Real term = ((j_ + 1 - m_) % 2 == 0) ? next_ : Real(-next_);
    const Real s = sum_ + term;
    using std::abs;
    if (abs(sum_) >= abs(term)) {
      comp_ += (sum_ - s) + term;
    } else {
      comp_ += (term - s) + sum_;
    }
    sum_ = s;
    abs_mass_ += next_;
    ++j_;
    exp_factor_ *= decay_;
    next_ = next_ * ratio(j_);
  }

  Real error() const {
    const Real eps = std::numeric_limits<Real>::epsilon();
    return (abs_mass_ + next_) * eps * (16 + 4 * static_cast<double>(j_ + m_));
  }

  Real lower() const {
    const Real s = sum_ + comp_;
    return ((j_ - m_) % 2 == 0 ? Real(s - next_) : s) - error();
  }

  Real upper() const {
    const Real s = sum_ + comp_;
    return ((j_ - m_) % 2 == 0 ? s : Real(s + next_)) + error();
  }

  // Further terms cannot tighten the bracket beyond rounding error.
  bool stalled() const { return next_ <= error(); }

 private:
  Real ratio(std::int64_t k) const {
    if (k == 0) return (theta_ + 1) * exp_factor_;
    const Real kk(k);
    return (theta_ + 2 * kk + 1) / (theta_ + 2 * kk - 1) * (theta_ + Real(m_) + kk - 1) /
           Real(k + 1 - m_) * exp_factor_;
  }

  bool past_onset() const {
    if (j_ == 0) return false;
    const Real kk(j_);
    Real f;
    if (m_ >= 1) {
      f = (theta_ + Real(m_) + kk - 1) / Real(j_ + 1 - m_);
    } else {
      f = (theta_ + kk - 1) / (kk + 1);
      if (f < 1) f = 1;
    }
    const Real bound = (theta_ + 2 * kk + 1) / (theta_ + 2 * kk - 1) * f * exp_factor_;
    return bound < Real(1.0 - 1e-12);
  }

  std::int64_t m_;
  std::int64_t j_ = 0;
  Real theta_;
  Real decay_;
  Real exp_factor_;
  Real sum_ = 0;
  Real comp_ = 0;
  Real next_ = 0;
  Real abs_mass_ = 0;
};

// b_{m+1} / b_m = (theta+2m+1)(theta+2m) / ((theta+m)(m+1)) * exp(-(2m+theta)t/2)
template <class Real>
class DiagonalTerms {
 public:
  DiagonalTerms(const Real& theta, const Real& t) : theta_(theta) {
    using std::exp;
    decay_ = exp(-t);
    exp_factor_ = exp(-theta * t / 2);
  }

  const Real& value() const { return value_; }

  void step() {
    const Real mm(m_);
    value_ *= (theta_ + 2 * mm + 1) * ((theta_ + 2 * mm) / (theta_ + mm)) / (mm + 1) * exp_factor_;
    exp_factor_ *= decay_;
    ++m_;
  }

 private:
  Real theta_;
  Real decay_;
  Real exp_factor_;
  Real value_ = 1;
  std::int64_t m_ = 0;
};

template <class Real>
std::int64_t index_from_uniform_impl(double theta_total, double t, double u, int max_refinements) {
  const Real theta(theta_total);
  const Real tt(t);
  const Real uu(u);
  DiagonalTerms<Real> diag(theta, tt);
  std::vector<WeightSeries<Real>> series;
  series.emplace_back(0, diag.value(), theta, tt);
  std::int64_t m = 0;
  int rounds = 0;
  for (;;) {
    Real lo = 0;
    Real hi = 0;
    for (const auto& s : series) {
      lo += s.lower();
      hi += s.upper();
    }
    // rounding in the two sums above
    const Real slack = std::numeric_limits<Real>::epsilon() * Real(4 * series.size() + 4);
    if (lo - slack > uu) return m;
    if (hi + slack < uu) {
      ++m;
      diag.step();
      series.emplace_back(m, diag.value(), theta, tt);
      continue;
    }
    if (++rounds > max_refinements) {
      raise(ErrorKind::kIterationCap, "lineage-count envelope unresolved after " +
                                          std::to_string(max_refinements) + " refinements (t=" +
                                          std::to_string(t) + ")");
    }
    bool progressed = false;
    for (auto& s : series) {
      if (!s.stalled()) {
        s.advance();
        progressed = true;
      }
    }
    if (!progressed) throw PrecisionStall{};
  }
}

template <class Real>
double log_binomial_coefficient(std::int64_t n, std::int64_t k) {
  using boost::math::lgamma;
  return lgamma(static_cast<double>(n) + 1.0) - lgamma(static_cast<double>(k) + 1.0) -
         lgamma(static_cast<double>(n - k) + 1.0);
}

double log_beta_pdf(double x, double a, double b) {
  using boost::math::lgamma;
  const double log_norm = lgamma(a) + lgamma(b) - lgamma(a + b);
  return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - log_norm;
}

}  // namespace

MutationRates::MutationRates(double theta1, double theta2)
    : theta1_(theta1), theta2_(theta2), total_(theta1 + theta2) {
  if (!(theta1 > 0.0) || !(theta2 > 0.0) || !std::isfinite(theta1) || !std::isfinite(theta2)) {
    raise(ErrorKind::kDomain, "mutation rates must be finite and > 0");
  }
}

MutationRates MutationRates::symmetric(double per_type) { return MutationRates(per_type, per_type); }

double log_coeff_a(std::int64_t k, std::int64_t m, double theta_total) {
  check_theta_total(theta_total);
  if (m < 0 || k < 0 || m > k) {
    raise(ErrorKind::kDomain, "a_{km} needs 0 <= m <= k, got k=" + std::to_string(k) +
                                  " m=" + std::to_string(m));
  }
  return static_cast<double>(log_coeff_a_impl<Extended>(k, m, Extended(theta_total)));
}

double log_coeff_a(std::int64_t k, std::int64_t m, const MutationRates& theta) {
  return log_coeff_a(k, m, theta.total());
}

namespace {

template <class Real>
MixtureWeights mixture_weights_impl(double theta_total, double t, double tol, double& width_sum) {
  MixtureWeights w;
  const Real theta(theta_total);
  const Real tt(t);
  Real cum_lower = 0;
  Real widths = 0;
  DiagonalTerms<Real> diag(theta, tt);
  for (std::int64_t m = 0;; ++m, diag.step()) {
    if (m > 10'000'000) raise(ErrorKind::kIterationCap, "mixture weights did not converge");
    WeightSeries<Real> s(m, diag.value(), theta, tt);
    int steps = 0;
    while (!s.stalled() && s.upper() - s.lower() > Real(tol) / 16 && steps < 100000) {
      s.advance();
      ++steps;
    }
    Real lo = s.lower();
    Real hi = s.upper();
    if (lo < 0) lo = 0;
    if (hi > 1) hi = 1;
    w.lower.push_back(static_cast<double>(lo));
    w.upper.push_back(static_cast<double>(hi));
    cum_lower += lo;
    widths += hi - lo;
    Real remaining = 1 - cum_lower;
    if (remaining < 0) remaining = 0;
    if (remaining <= Real(tol) + 2 * widths) {
      w.tail_bound = static_cast<double>(remaining);
      width_sum = static_cast<double>(widths);
      return w;
    }
  }
}

}  // namespace

MixtureWeights mixture_weights(double theta_total, double t, double tol) {
  check_theta_total(theta_total);
  check_time(t, 0.0);
  // escalate precision until rounding no longer dominates the enclosures
  const double good_enough = std::max(tol, 1e-9);
  double widths = 0.0;
  MixtureWeights w = mixture_weights_impl<Extended>(theta_total, t, tol, widths);
  if (widths <= good_enough) return w;
#ifdef WFSEL_HAVE_FLOAT128
  w = mixture_weights_impl<Quad>(theta_total, t, tol, widths);
  if (widths <= good_enough) return w;
#endif
  return mixture_weights_impl<Wide>(theta_total, t, tol, widths);
}

std::int64_t mixture_index_from_uniform(double theta_total, double t, double u,
                                        const MixtureIndexOptions& options) {
  check_theta_total(theta_total);
  check_time(t, options.min_horizon);
  if (!(u > 0.0 && u < 1.0)) raise(ErrorKind::kDomain, "uniform must lie in (0, 1)");
  try {
    return index_from_uniform_impl<Extended>(theta_total, t, u, options.max_refinements);
  } catch (const PrecisionStall&) {
  }
#ifdef WFSEL_HAVE_FLOAT128
  try {
    return index_from_uniform_impl<Quad>(theta_total, t, u, options.max_refinements);
  } catch (const PrecisionStall&) {
  }
#endif
  try {
    return index_from_uniform_impl<Wide>(theta_total, t, u, options.max_refinements);
  } catch (const PrecisionStall&) {
  }
  raise(ErrorKind::kIterationCap,
        "lineage-count series needs more than 50 significant digits at t=" + std::to_string(t));
}

std::int64_t sample_mixture_index(const MutationRates& theta, double t, Rng& rng,
                                  const MixtureIndexOptions& options) {
  check_time(t, options.min_horizon);
  return mixture_index_from_uniform(theta.total(), t, rng.uniform(), options);
}

std::int64_t sample_mixture_index_asymptotic(double theta_total, double t, Rng& rng) {
  check_theta_total(theta_total);
  if (!(t > 0.0) || !std::isfinite(t)) raise(ErrorKind::kDomain, "time must be finite and > 0");
  const long double beta = (static_cast<long double>(theta_total) - 1.0L) * t / 2.0L;
  long double mean;
  long double var;
  if (std::fabs(beta) < 1e-6L) {
    mean = 2.0L / t;
    var = 2.0L / (3.0L * t);
  } else {
    const long double eta = beta / std::expm1(beta);
    mean = 2.0L * eta / t;
    var = 2.0L * eta / t * (eta + beta) * (eta + beta) * (1.0L + eta / (eta + beta) - 2.0L * eta) /
          (beta * beta);
  }
  const double draw = static_cast<double>(mean + std::sqrt(std::max(var, 0.0L)) * rng.normal());
  if (!(draw > 0.0)) return 0;
  if (draw > 9.0e18) raise(ErrorKind::kDomain, "time step too small for the lineage approximation");
  return std::llround(draw);
}

double sample_neutral(const NeutralTransition& transition, const MutationRates& theta, Rng& rng,
                      const MixtureIndexOptions& options) {
  if (!(transition.q0 >= 0.0 && transition.q0 <= 1.0)) {
    raise(ErrorKind::kDomain, "starting frequency must lie in [0, 1]");
  }
  const std::int64_t m = sample_mixture_index(theta, transition.horizon, rng, options);
  const std::int64_t l = rng.binomial(m, transition.q0);
  return rng.beta(theta.theta1() + static_cast<double>(l), theta.theta2() + static_cast<double>(m - l));
}

double neutral_pdf(double x, const NeutralTransition& transition, const MutationRates& theta, double tol) {
  if (!std::isfinite(x)) raise(ErrorKind::kDomain, "density argument must be finite");
  if (!(transition.q0 >= 0.0 && transition.q0 <= 1.0)) {
    raise(ErrorKind::kDomain, "starting frequency must lie in [0, 1]");
  }
  if (x < 0.0 || x > 1.0) return 0.0;
  const MixtureWeights w = mixture_weights(theta.total(), transition.horizon, tol);
  const double q0 = transition.q0;
  double total = 0.0;
  for (std::size_t mi = 0; mi < w.size(); ++mi) {
    const double qm = w.value(mi);
    if (qm <= 0.0) continue;
    const auto m = static_cast<std::int64_t>(mi);
    double inner = 0.0;
    for (std::int64_t l = 0; l <= m; ++l) {
      double log_p;
      if (q0 == 0.0) {
        if (l != 0) continue;
        log_p = 0.0;
      } else if (q0 == 1.0) {
        if (l != m) continue;
        log_p = 0.0;
      } else {
        log_p = log_binomial_coefficient<double>(m, l) + static_cast<double>(l) * std::log(q0) +
                static_cast<double>(m - l) * std::log1p(-q0);
      }
      inner += std::exp(log_p + log_beta_pdf(x, theta.theta1() + static_cast<double>(l),
                                             theta.theta2() + static_cast<double>(m - l)));
    }
    total += qm * inner;
  }
  return total;
}

NeutralKernel::NeutralKernel(MutationRates theta, NeutralKernelOptions options)
    : theta_(theta), options_(options) {
  if (!options_.use_table) return;
  if (!(options_.table_min > 0.0) || !(options_.table_max > options_.table_min) ||
      !(options_.table_step > 0.0)) {
    raise(ErrorKind::kDomain, "invalid lineage table range");
  }
  for (double t = options_.table_min; t < options_.table_max;
       t *= 1.0 + options_.table_step * std::min(t, 1.0)) {
    nodes_.push_back(t);
  }
  nodes_.push_back(options_.table_max);
  cdf_lower_.reserve(nodes_.size());
  cdf_upper_.reserve(nodes_.size());
  for (double t : nodes_) {
    const MixtureWeights w = mixture_weights(theta_.total(), t, 1e-14);
    std::vector<double> lo(w.size());
    std::vector<double> hi(w.size());
    long double acc_lo = 0.0L;
    long double acc_hi = 0.0L;
    for (std::size_t m = 0; m < w.size(); ++m) {
      acc_lo += w.lower[m];
      acc_hi += w.upper[m];
      // round outward so the stored doubles still bracket the CDF
      lo[m] = std::nextafter(static_cast<double>(std::min(acc_lo, 1.0L)), 0.0);
      hi[m] = std::nextafter(static_cast<double>(std::min(acc_hi, 1.0L)), 2.0);
    }
    cdf_lower_.push_back(std::move(lo));
    cdf_upper_.push_back(std::move(hi));
  }
}

std::int64_t NeutralKernel::index_from_table(double t, double u) const {
  if (nodes_.size() < 2 || t < nodes_.front() || t > nodes_.back()) return -1;
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t);
  std::size_t i = static_cast<std::size_t>(it - nodes_.begin());
  i = (i == 0) ? 0 : i - 1;
  if (i + 1 >= nodes_.size()) i = nodes_.size() - 2;
  const auto& lo = cdf_lower_[i];
  const auto& hi = cdf_upper_[i + 1];
  const auto hi_it = std::upper_bound(lo.begin(), lo.end(), u);
  if (hi_it == lo.end()) return -1;
  const auto m_hi = hi_it - lo.begin();
  const auto lo_it = std::lower_bound(hi.begin(), hi.end(), u);
  const auto m_lo = lo_it - hi.begin();
  return m_lo == m_hi ? static_cast<std::int64_t>(m_hi) : -1;
}

std::int64_t NeutralKernel::sample_index(double t, Rng& rng) const {
  if (t < options_.asymptotic_below) return sample_mixture_index_asymptotic(theta_.total(), t, rng);
  const double u = rng.uniform();
  if (options_.use_table) {
    const std::int64_t m = index_from_table(t, u);
    if (m >= 0) return m;
  }
  return mixture_index_from_uniform(theta_.total(), t, u, options_.index);
}

double NeutralKernel::sample(double x, double t, Rng& rng) const {
  if (!(t > 0.0)) return x;
  x = std::clamp(x, 0.0, 1.0);
  const std::int64_t m = sample_index(t, rng);
  const std::int64_t l = rng.binomial(m, x);
  return rng.beta(theta_.theta1() + static_cast<double>(l), theta_.theta2() + static_cast<double>(m - l));
}

std::shared_ptr<const NeutralKernel> shared_kernel(const MutationRates& theta) {
  static std::mutex mutex;
  static std::map<std::pair<double, double>, std::shared_ptr<const NeutralKernel>> cache;
  const std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[{theta.theta1(), theta.theta2()}];
  if (!slot) slot = std::make_shared<const NeutralKernel>(theta);
  return slot;
}

}  // namespace wfsel
