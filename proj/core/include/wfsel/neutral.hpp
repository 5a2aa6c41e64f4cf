#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "wfsel/rng.hpp"

namespace wfsel {

// Scaled mutation rates toward allele 1 (theta1) and away from it (theta2).
class MutationRates {
 public:
  MutationRates(double theta1, double theta2);
  // theta1 = theta2 = per_type
  static MutationRates symmetric(double per_type);

  double theta1() const { return theta1_; }
  double theta2() const { return theta2_; }
  double total() const { return total_; }

  friend bool operator==(const MutationRates& a, const MutationRates& b) {
    return a.theta1_ == b.theta1_ && a.theta2_ == b.theta2_;
  }

 private:
  double theta1_;
  double theta2_;
  double total_;
};

struct NeutralTransition {
  double q0;       // starting frequency in [0, 1]
  double horizon;  // diffusion time, > 0
};

struct MixtureIndexOptions {
  int max_refinements = 10000;
  double min_horizon = 1e-6;
};

// log a_{km}. Throws kDomain for m > k, negative indices or theta_total <= 0.
double log_coeff_a(std::int64_t k, std::int64_t m, double theta_total);
double log_coeff_a(std::int64_t k, std::int64_t m, const MutationRates& theta);

// Certified enclosures lower[m] <= q_m(t) <= upper[m] for m < size(), plus a
// bound on the mass of all larger indices.
struct MixtureWeights {
  std::vector<double> lower;
  std::vector<double> upper;
  double tail_bound = 0.0;

  std::size_t size() const { return lower.size(); }
  double value(std::size_t m) const { return 0.5 * (lower[m] + upper[m]); }
};

MixtureWeights mixture_weights(double theta_total, double t, double tol = 1e-12);

// Exact draw of the ancestral lineage count at time t.
std::int64_t sample_mixture_index(const MutationRates& theta, double t, Rng& rng,
                                  const MixtureIndexOptions& options = {});

// Inverse-CDF value of the lineage count for a given uniform u; the
// alternating-series envelope decides every comparison with certified bounds
// and moves to 50-digit arithmetic when double-extended precision cannot.
std::int64_t mixture_index_from_uniform(double theta_total, double t, double u,
                                        const MixtureIndexOptions& options = {});

// Normal approximation of the lineage count for small t.
std::int64_t sample_mixture_index_asymptotic(double theta_total, double t, Rng& rng);

double sample_neutral(const NeutralTransition& transition, const MutationRates& theta, Rng& rng,
                      const MixtureIndexOptions& options = {});

// Transition density at x, truncated once the remaining mixture mass is below tol.
double neutral_pdf(double x, const NeutralTransition& transition, const MutationRates& theta,
                   double tol = 1e-12);

struct NeutralKernelOptions {
  // Below this time step the lineage count comes from the normal approximation.
  // Set to 0 to force the exact sampler everywhere.
  double asymptotic_below = 0.05;
  bool use_table = true;
  double table_min = 0.05;
  double table_max = 20.0;
  // relative node spacing is table_step * min(t, 1)
  double table_step = 0.01;
  MixtureIndexOptions index;
};

// Neutral transition sampler shared by the selection sampler. Holds a table of
// certified lineage-count CDFs; since P(M_t <= m) is nondecreasing in t, the
// CDFs at neighbouring nodes bracket the CDF at any t in between and settle
// most draws without evaluating the series. Immutable once built.
class NeutralKernel {
 public:
  explicit NeutralKernel(MutationRates theta, NeutralKernelOptions options = {});

  const MutationRates& theta() const { return theta_; }
  const NeutralKernelOptions& options() const { return options_; }

  std::int64_t sample_index(double t, Rng& rng) const;
  // Frequency after time t starting from x. t <= 0 returns x.
  double sample(double x, double t, Rng& rng) const;

  std::size_t table_nodes() const { return nodes_.size(); }

 private:
  std::int64_t index_from_table(double t, double u) const;

  MutationRates theta_;
  NeutralKernelOptions options_;
  std::vector<double> nodes_;
  std::vector<std::vector<double>> cdf_lower_;
  std::vector<std::vector<double>> cdf_upper_;
};

// Process-wide kernel with default options, built once per mutation-rate pair.
std::shared_ptr<const NeutralKernel> shared_kernel(const MutationRates& theta);

}  // namespace wfsel
