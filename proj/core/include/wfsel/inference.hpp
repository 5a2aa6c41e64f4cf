#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wfsel/density.hpp"
#include "wfsel/grid.hpp"
#include "wfsel/rng.hpp"
#include "wfsel/selection.hpp"

namespace wfsel {

struct Dataset {
  std::vector<std::int64_t> counts;
  // Sample size per locus; the usual case has every entry equal.
  std::vector<std::int64_t> trials;
  std::vector<std::string> locus_ids;

  static Dataset with_common_n(std::vector<std::int64_t> counts, std::int64_t n);
  std::size_t size() const { return counts.size(); }
  void validate() const;
};

double log_binomial_pmf(std::int64_t y, std::int64_t n, double q);
// Includes the binomial coefficients; -inf when a q contradicts its count.
double log_likelihood(const Dataset& data, std::span<const double> q);

struct ChainState {
  std::size_t s_index = 0;
  std::vector<double> q;
};

struct McmcConfig {
  std::int64_t steps = 10'000;
  std::int64_t burn_in = 1'000;
  std::int64_t thin = 10;
  int s_window = 5;
  double sigma_q = 0.05;
  // Weights over the s grid; empty means uniform.
  std::vector<double> prior_s;
  bool random_scan = false;
  bool keep_q = false;

  void validate(std::size_t s_count) const;
  std::int64_t retained() const { return (steps - burn_in) / thin; }
};

struct AcceptanceStats {
  std::int64_t s_proposed = 0;
  std::int64_t s_accepted = 0;
  std::int64_t q_proposed = 0;
  std::int64_t q_accepted = 0;

  double s_rate() const { return s_proposed ? static_cast<double>(s_accepted) / static_cast<double>(s_proposed) : 0.0; }
  double q_rate() const { return q_proposed ? static_cast<double>(q_accepted) / static_cast<double>(q_proposed) : 0.0; }
};

// s0 is the grid value nearest 0; q_k = (y_k + 0.5) / (n_k + 1) clamped to [0.001, 0.999].
ChainState initial_state(const Dataset& data, const std::vector<GridValue>& s_values);

// Metropolis test on a log ratio; -inf on both sides counts as a rejection
// unless the current state is itself impossible.
bool metropolis_accept(double log_target_new, double log_target_old, Rng& rng);

// One sweep of the approximate sampler: s first, then each q_k.
void mwg_step(ChainState& state, const Dataset& data, const DensityModel& density, const McmcConfig& config,
              Rng& rng, AcceptanceStats& stats);

// Exact samplers for every grid value of s plus the starting-frequency prior.
// Deliberately holds no density evaluator.
class ExactModel {
 public:
  ExactModel(std::vector<GridValue> s_values, std::vector<double> prior_s, PriorQ0 prior_q, MutationRates theta,
             double horizon, SelectionOptions options = {});

  const std::vector<GridValue>& s_values() const { return s_values_; }
  const std::vector<double>& prior_s() const { return prior_s_; }
  const PriorQ0& prior_q() const { return prior_q_; }
  const SelectedSampler& sampler(std::size_t s_index) const { return samplers_.at(s_index); }

  std::size_t draw_s_index(Rng& rng) const;
  GridValue draw_q0(Rng& rng) const;

 private:
  std::vector<GridValue> s_values_;
  std::vector<double> prior_s_;
  std::vector<double> cdf_s_;
  PriorQ0 prior_q_;
  std::vector<double> cdf_q_;
  std::vector<SelectedSampler> samplers_;
};

// Independence sampler proposing (s, q) from the prior model.
void exact_imh_step(ChainState& state, const Dataset& data, const ExactModel& model, Rng& rng,
                    AcceptanceStats& stats);

struct PosteriorSample {
  std::vector<std::int64_t> steps;
  std::vector<double> s;
  std::vector<std::vector<double>> q;  // filled when keep_q is set
  AcceptanceStats stats;
  double mean_s = 0.0;
  std::vector<std::string> warnings;
};

using Stepper = std::function<void(ChainState&, Rng&, AcceptanceStats&)>;

PosteriorSample run_chain(ChainState init, const Stepper& step, const McmcConfig& config,
                          const std::vector<GridValue>& s_values, Rng& rng);

// Equal-tailed interval from type-7 (linear interpolation) sample quantiles.
std::pair<double, double> credible_interval(std::span<const double> draws, double level);
double sample_quantile(std::span<const double> draws, double p);

}  // namespace wfsel
