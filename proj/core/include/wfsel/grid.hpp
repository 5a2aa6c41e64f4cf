#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "wfsel/neutral.hpp"

namespace wfsel {

// Grid coordinate stored as an integer number of millionths, so keys compare
// exactly however the value was parsed or computed.
class GridValue {
 public:
  static constexpr std::int64_t kScale = 1'000'000;

  constexpr GridValue() = default;
  static constexpr GridValue from_micros(std::int64_t micros) {
    GridValue v;
    v.micros_ = micros;
    return v;
  }
  static GridValue from_double(double value);

  constexpr std::int64_t micros() const { return micros_; }
  double value() const { return static_cast<double>(micros_) / static_cast<double>(kScale); }
  // Shortest decimal form, e.g. "-12", "5.5", "0.01".
  std::string to_string() const;

  friend constexpr auto operator<=>(GridValue, GridValue) = default;

 private:
  std::int64_t micros_ = 0;
};

// lo, lo + step, ..., hi. Throws kConfig unless (hi - lo) / step is a whole number.
std::vector<GridValue> arithmetic_grid(double lo, double hi, double step);

struct GridSpec {
  std::vector<GridValue> s_values;
  std::vector<GridValue> q0_values;
  MutationRates theta = MutationRates::symmetric(1.0);
  double horizon = 0.1;
  std::int64_t bank_size = 10'000;

  void validate() const;
  std::optional<std::size_t> s_index(GridValue s) const;
  std::optional<std::size_t> q0_index(GridValue q0) const;
};

// Discrete prior over starting frequencies; zero-weight points are dropped.
class PriorQ0 {
 public:
  PriorQ0(std::vector<GridValue> support, std::vector<double> weights);
  static PriorQ0 uniform(const std::vector<GridValue>& grid);

  const std::vector<GridValue>& support() const { return support_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return support_.size(); }

 private:
  std::vector<GridValue> support_;
  std::vector<double> weights_;
};

// Relative frequency of each grid point after snapping the observations to the
// nearest point (ties go to the lower point, out-of-range values to the ends).
PriorQ0 discretize_prior(std::span<const double> frequencies, const std::vector<GridValue>& q0_grid);

}  // namespace wfsel
