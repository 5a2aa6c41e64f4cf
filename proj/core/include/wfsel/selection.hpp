#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "wfsel/neutral.hpp"
#include "wfsel/rng.hpp"

namespace wfsel {

// Girsanov integrand of the selected diffusion against the neutral one.
double phi(double x, double s, const MutationRates& theta);

struct PhiBounds {
  double lower;
  double upper;
};

// Exact min and max of phi over [0, 1].
PhiBounds phi_bounds(double s, const MutationRates& theta);

struct SelectionOptions {
  std::int64_t max_attempts = 1'000'000;
  // Added to the upper bound; any value >= 0 leaves the law unchanged.
  double bound_inflation = 0.0;
  bool record_skeletons = false;
};

struct ExactDrawReport {
  double value = 0.0;
  std::int64_t attempts = 0;
  // Poisson skeleton size of each proposal, if requested.
  std::vector<std::int64_t> skeleton_sizes;
};

// Exact rejection sampler for the frequency at time `horizon` under selection.
// Neutral proposals are thinned by a marked Poisson process and accepted with
// the endpoint weight exp(s x - max(s, 0)).
class SelectedSampler {
 public:
  SelectedSampler(double s, MutationRates theta, double horizon,
                  std::shared_ptr<const NeutralKernel> kernel = nullptr, SelectionOptions options = {});

  double s() const { return s_; }
  double horizon() const { return horizon_; }
  const MutationRates& theta() const { return theta_; }
  const NeutralKernel& kernel() const { return *kernel_; }

  ExactDrawReport draw(double q0, Rng& rng) const;

 private:
  double s_;
  MutationRates theta_;
  double horizon_;
  std::shared_ptr<const NeutralKernel> kernel_;
  SelectionOptions options_;
  PhiBounds bounds_;
};

ExactDrawReport sample_selected(double q0, double s, const MutationRates& theta, double horizon, Rng& rng,
                                const SelectionOptions& options = {});

}  // namespace wfsel
