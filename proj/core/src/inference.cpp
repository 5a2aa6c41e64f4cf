#include "wfsel/inference.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <numeric>

#include "wfsel/error.hpp"

namespace wfsel {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log g_k without the binomial coefficient; the coefficient cancels in every ratio.
double log_kernel(std::int64_t y, std::int64_t n, double q) {
  if (q <= 0.0) return y == 0 ? 0.0 : kNegInf;
  if (q >= 1.0) return y == n ? 0.0 : kNegInf;
  return static_cast<double>(y) * std::log(q) + static_cast<double>(n - y) * std::log1p(-q);
}

std::vector<double> cumulative(const std::vector<double>& weights) {
  std::vector<double> cdf(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cdf.begin());
  return cdf;
}

std::size_t draw_from_cdf(const std::vector<double>& cdf, Rng& rng) {
  const double u = rng.uniform() * cdf.back();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

std::vector<double> resolve_prior_s(const std::vector<double>& prior_s, std::size_t count) {
  if (prior_s.empty()) return std::vector<double>(count, 1.0 / static_cast<double>(count));
  return prior_s;
}

}  // namespace

Dataset Dataset::with_common_n(std::vector<std::int64_t> counts, std::int64_t n) {
  Dataset d;
  d.trials.assign(counts.size(), n);
  d.counts = std::move(counts);
  d.validate();
  return d;
}

void Dataset::validate() const {
  if (counts.empty()) raise(ErrorKind::kDomain, "dataset has no loci");
  if (trials.size() != counts.size()) raise(ErrorKind::kDomain, "counts and sample sizes differ in length");
  if (!locus_ids.empty() && locus_ids.size() != counts.size()) {
    raise(ErrorKind::kDomain, "locus ids and counts differ in length");
  }
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (trials[k] < 1) raise(ErrorKind::kDomain, "sample size must be >= 1 at locus " + std::to_string(k));
    if (counts[k] < 0 || counts[k] > trials[k]) {
      raise(ErrorKind::kDomain, "count outside [0, n] at locus " + std::to_string(k));
    }
  }
}

double log_binomial_pmf(std::int64_t y, std::int64_t n, double q) {
  if (n < 0 || y < 0 || y > n) raise(ErrorKind::kDomain, "binomial pmf needs 0 <= y <= n");
  const double base = log_kernel(y, n, q);
  if (base == kNegInf) return base;
  using boost::math::lgamma;
  const auto dn = static_cast<double>(n);
  const auto dy = static_cast<double>(y);
  return lgamma(dn + 1.0) - lgamma(dy + 1.0) - lgamma(dn - dy + 1.0) + base;
}

double log_likelihood(const Dataset& data, std::span<const double> q) {
  if (q.size() != data.size()) raise(ErrorKind::kDomain, "frequency vector length differs from locus count");
  double total = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    const double term = log_binomial_pmf(data.counts[k], data.trials[k], q[k]);
    if (term == kNegInf) return kNegInf;
    total += term;
  }
  return total;
}

void McmcConfig::validate(std::size_t s_count) const {
  if (steps < 1) raise(ErrorKind::kConfig, "steps must be >= 1");
  if (burn_in < 0 || burn_in >= steps) raise(ErrorKind::kConfig, "burn_in must lie in [0, steps)");
  if (thin < 1) raise(ErrorKind::kConfig, "thin must be >= 1");
  if (retained() < 1) raise(ErrorKind::kConfig, "(steps - burn_in) / thin must be >= 1");
  if (s_window < 1) raise(ErrorKind::kConfig, "s_window must be >= 1");
  if (!(sigma_q > 0.0) || !std::isfinite(sigma_q)) raise(ErrorKind::kConfig, "sigma_q must be > 0");
  if (!prior_s.empty()) {
    if (prior_s.size() != s_count) raise(ErrorKind::kConfig, "prior_s length differs from the s grid");
    double total = 0.0;
    for (double w : prior_s) {
      if (!(w >= 0.0) || !std::isfinite(w)) raise(ErrorKind::kConfig, "prior_s weights must be >= 0");
      total += w;
    }
    if (std::fabs(total - 1.0) > 1e-9) raise(ErrorKind::kConfig, "prior_s weights must sum to 1");
  }
}

ChainState initial_state(const Dataset& data, const std::vector<GridValue>& s_values) {
  data.validate();
  if (s_values.empty()) raise(ErrorKind::kDomain, "empty s grid");
  ChainState state;
  std::int64_t best = std::numeric_limits<std::int64_t>::max();
  for (std::size_t i = 0; i < s_values.size(); ++i) {
    const std::int64_t d = std::abs(s_values[i].micros());
    if (d < best) {
      best = d;
      state.s_index = i;
    }
  }
  state.q.resize(data.size());
  for (std::size_t k = 0; k < data.size(); ++k) {
    const double q = (static_cast<double>(data.counts[k]) + 0.5) / (static_cast<double>(data.trials[k]) + 1.0);
    state.q[k] = std::clamp(q, 0.001, 0.999);
  }
  return state;
}

bool metropolis_accept(double log_target_new, double log_target_old, Rng& rng) {
  if (std::isnan(log_target_new) || log_target_new == kNegInf) return false;
  if (log_target_old == kNegInf) return true;
  const double diff = log_target_new - log_target_old;
  if (diff >= 0.0) return true;
  return std::log(rng.uniform()) < diff;
}

void mwg_step(ChainState& state, const Dataset& data, const DensityModel& density, const McmcConfig& config,
              Rng& rng, AcceptanceStats& stats) {
  const auto& grid = density.s_values();
  const std::size_t s_count = grid.size();
  const std::size_t K = data.size();
  if (state.q.size() != K) raise(ErrorKind::kDomain, "state and dataset disagree on locus count");
  if (state.s_index >= s_count) raise(ErrorKind::kMissingBank, "chain state s lies outside the density grid");
  auto log_prior_s = [&](std::size_t i) {
    return config.prior_s.empty() ? 0.0 : std::log(config.prior_s[i]);
  };

  // s-update: uniform over the 2w neighbours, current point excluded
  {
    ++stats.s_proposed;
    const auto w = static_cast<std::int64_t>(config.s_window);
    const auto j = static_cast<std::int64_t>(rng.uniform() * static_cast<double>(2 * w));
    const std::int64_t offset = j < w ? j - w : j - w + 1;
    const std::int64_t proposal = static_cast<std::int64_t>(state.s_index) + offset;
    if (proposal >= 0 && proposal < static_cast<std::int64_t>(s_count)) {
      const auto p = static_cast<std::size_t>(proposal);
      const double prior_new = log_prior_s(p);
      if (prior_new != kNegInf) {
        double log_new = prior_new;
        double log_old = log_prior_s(state.s_index);
        for (std::size_t k = 0; k < K; ++k) {
          log_new += density.log_density(state.q[k], p);
          log_old += density.log_density(state.q[k], state.s_index);
        }
        if (metropolis_accept(log_new, log_old, rng)) {
          state.s_index = p;
          ++stats.s_accepted;
        }
      }
    }
  }

  std::vector<std::size_t> order(K);
  std::iota(order.begin(), order.end(), 0);
  if (config.random_scan) {
    for (std::size_t i = K; i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform() * static_cast<double>(i));
      std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }
  }
  for (std::size_t k : order) {
    ++stats.q_proposed;
    const double current = state.q[k];
    const double proposal = current + config.sigma_q * rng.normal();
    if (!(proposal > 0.0 && proposal < 1.0)) continue;
    const double log_new = log_kernel(data.counts[k], data.trials[k], proposal) + density.log_density(proposal, state.s_index);
    const double log_old = log_kernel(data.counts[k], data.trials[k], current) + density.log_density(current, state.s_index);
    if (metropolis_accept(log_new, log_old, rng)) {
      state.q[k] = proposal;
      ++stats.q_accepted;
    }
  }
}

ExactModel::ExactModel(std::vector<GridValue> s_values, std::vector<double> prior_s, PriorQ0 prior_q,
                       MutationRates theta, double horizon, SelectionOptions options)
    : s_values_(std::move(s_values)),
      prior_s_(resolve_prior_s(prior_s, s_values_.size())),
      prior_q_(std::move(prior_q)) {
  if (s_values_.empty()) raise(ErrorKind::kDomain, "empty s grid");
  if (prior_s_.size() != s_values_.size()) raise(ErrorKind::kConfig, "prior_s length differs from the s grid");
  cdf_s_ = cumulative(prior_s_);
  cdf_q_ = cumulative(prior_q_.weights());
  const auto kernel = shared_kernel(theta);
  samplers_.reserve(s_values_.size());
  for (GridValue s : s_values_) samplers_.emplace_back(s.value(), theta, horizon, kernel, options);
}

std::size_t ExactModel::draw_s_index(Rng& rng) const { return draw_from_cdf(cdf_s_, rng); }

GridValue ExactModel::draw_q0(Rng& rng) const { return prior_q_.support()[draw_from_cdf(cdf_q_, rng)]; }

void exact_imh_step(ChainState& state, const Dataset& data, const ExactModel& model, Rng& rng,
                    AcceptanceStats& stats) {
  const std::size_t K = data.size();
  if (state.q.size() != K) raise(ErrorKind::kDomain, "state and dataset disagree on locus count");
  ++stats.s_proposed;
  stats.q_proposed += static_cast<std::int64_t>(K);
  const std::size_t s_new = model.draw_s_index(rng);
  const SelectedSampler& sampler = model.sampler(s_new);
  std::vector<double> q_new(K);
  for (std::size_t k = 0; k < K; ++k) q_new[k] = sampler.draw(model.draw_q0(rng).value(), rng).value;
  double log_new = 0.0;
  double log_old = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    log_new += log_kernel(data.counts[k], data.trials[k], q_new[k]);
    log_old += log_kernel(data.counts[k], data.trials[k], state.q[k]);
  }
  if (metropolis_accept(log_new, log_old, rng)) {
    state.s_index = s_new;
    state.q = std::move(q_new);
    ++stats.s_accepted;
    stats.q_accepted += static_cast<std::int64_t>(K);
  }
}

PosteriorSample run_chain(ChainState init, const Stepper& step, const McmcConfig& config,
                          const std::vector<GridValue>& s_values, Rng& rng) {
  config.validate(s_values.size());
  if (init.s_index >= s_values.size()) raise(ErrorKind::kDomain, "initial s outside the grid");
  PosteriorSample out;
  const auto kept = static_cast<std::size_t>(config.retained());
  out.steps.reserve(kept);
  out.s.reserve(kept);
  ChainState state = std::move(init);
  for (std::int64_t i = 1; i <= config.steps; ++i) {
    step(state, rng, out.stats);
    if (i > config.burn_in && (i - config.burn_in) % config.thin == 0) {
      out.steps.push_back(i);
      out.s.push_back(s_values[state.s_index].value());
      if (config.keep_q) out.q.push_back(state.q);
    }
  }
  out.mean_s = std::accumulate(out.s.begin(), out.s.end(), 0.0) / static_cast<double>(out.s.size());
  const double lo = s_values.front().value();
  const double hi = s_values.back().value();
  for (double edge : {lo, hi}) {
    const auto n = std::count(out.s.begin(), out.s.end(), edge);
    const double share = static_cast<double>(n) / static_cast<double>(out.s.size());
    if (share > 0.05) {
      out.warnings.push_back("posterior mass " + std::to_string(share) + " on grid boundary s=" +
                             GridValue::from_double(edge).to_string() + "; consider widening the grid");
    }
  }
  return out;
}

double sample_quantile(std::span<const double> draws, double p) {
  if (draws.empty()) raise(ErrorKind::kDomain, "quantile of an empty sample");
  if (!(p >= 0.0 && p <= 1.0)) raise(ErrorKind::kDomain, "quantile probability must lie in [0, 1]");
  std::vector<double> x(draws.begin(), draws.end());
  std::sort(x.begin(), x.end());
  const double h = static_cast<double>(x.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= x.size()) return x.back();
  return x[lo] + (h - static_cast<double>(lo)) * (x[lo + 1] - x[lo]);
}

std::pair<double, double> credible_interval(std::span<const double> draws, double level) {
  if (draws.size() < 2) raise(ErrorKind::kDomain, "credible interval needs at least two draws");
  if (!(level > 0.0 && level < 1.0)) raise(ErrorKind::kDomain, "credible level must lie in (0, 1)");
  const double tail = (1.0 - level) / 2.0;
  return {sample_quantile(draws, tail), sample_quantile(draws, 1.0 - tail)};
}

}  // namespace wfsel
