#include "wfsel/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

#include "wfsel/error.hpp"

namespace wfsel {

GridValue GridValue::from_double(double value) {
  if (!std::isfinite(value) || std::fabs(value) > 9.0e12) {
    raise(ErrorKind::kDomain, "grid value out of range");
  }
  return from_micros(std::llround(value * static_cast<double>(kScale)));
}

std::string GridValue::to_string() const {
  const std::int64_t whole = micros_ / kScale;
  std::int64_t frac = std::llabs(micros_ % kScale);
  std::string out = (micros_ < 0 && whole == 0) ? "-0" : std::to_string(whole);
  if (frac == 0) return out;
  std::string digits = std::to_string(frac);
  digits.insert(0, 6 - digits.size(), '0');
  while (!digits.empty() && digits.back() == '0') digits.pop_back();
  return out + "." + digits;
}

std::vector<GridValue> arithmetic_grid(double lo, double hi, double step) {
  const GridValue a = GridValue::from_double(lo);
  const GridValue b = GridValue::from_double(hi);
  const GridValue d = GridValue::from_double(step);
  if (d.micros() <= 0) raise(ErrorKind::kConfig, "grid step must be > 0");
  if (b < a) raise(ErrorKind::kConfig, "grid upper end is below the lower end");
  if ((b.micros() - a.micros()) % d.micros() != 0) {
    raise(ErrorKind::kConfig, "grid range " + a.to_string() + ".." + b.to_string() +
                                  " is not a whole number of steps of " + d.to_string());
  }
  std::vector<GridValue> out;
  for (std::int64_t v = a.micros(); v <= b.micros(); v += d.micros()) out.push_back(GridValue::from_micros(v));
  return out;
}

namespace {
void check_ascending(const std::vector<GridValue>& values, const char* name) {
  if (values.empty()) raise(ErrorKind::kConfig, std::string(name) + " grid is empty");
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (!(values[i - 1] < values[i])) raise(ErrorKind::kConfig, std::string(name) + " grid must be strictly increasing");
  }
}

std::optional<std::size_t> find(const std::vector<GridValue>& values, GridValue v) {
  const auto it = std::lower_bound(values.begin(), values.end(), v);
  if (it == values.end() || *it != v) return std::nullopt;
  return static_cast<std::size_t>(it - values.begin());
}
}  // namespace

void GridSpec::validate() const {
  check_ascending(s_values, "s");
  check_ascending(q0_values, "q0");
  if (q0_values.front().micros() <= 0 || q0_values.back().micros() >= GridValue::kScale) {
    raise(ErrorKind::kConfig, "q0 grid must lie strictly inside (0, 1)");
  }
  if (!(horizon > 0.0) || !std::isfinite(horizon)) raise(ErrorKind::kConfig, "horizon must be > 0");
  if (bank_size < 2) raise(ErrorKind::kConfig, "bank size must be >= 2");
}

std::optional<std::size_t> GridSpec::s_index(GridValue s) const { return find(s_values, s); }
std::optional<std::size_t> GridSpec::q0_index(GridValue q0) const { return find(q0_values, q0); }

PriorQ0::PriorQ0(std::vector<GridValue> support, std::vector<double> weights) {
  if (support.size() != weights.size() || support.empty()) {
    raise(ErrorKind::kConfig, "prior support and weights must be non-empty and equally long");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) raise(ErrorKind::kConfig, "prior weights must be finite and >= 0");
    total += w;
  }
  if (std::fabs(total - 1.0) > 1e-12) {
    raise(ErrorKind::kConfig, "prior weights sum to " + std::to_string(total) + ", not 1");
  }
  std::vector<std::size_t> order(support.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return support[a] < support[b]; });
  for (std::size_t idx : order) {
    if (weights[idx] == 0.0) continue;
    if (!support_.empty() && support_.back() == support[idx]) {
      raise(ErrorKind::kConfig, "prior support has duplicate point " + support[idx].to_string());
    }
    support_.push_back(support[idx]);
    weights_.push_back(weights[idx]);
  }
}

PriorQ0 PriorQ0::uniform(const std::vector<GridValue>& grid) {
  if (grid.empty()) raise(ErrorKind::kConfig, "uniform prior needs a non-empty grid");
  return PriorQ0(grid, std::vector<double>(grid.size(), 1.0 / static_cast<double>(grid.size())));
}

PriorQ0 discretize_prior(std::span<const double> frequencies, const std::vector<GridValue>& q0_grid) {
  check_ascending(q0_grid, "q0");
  if (frequencies.empty()) raise(ErrorKind::kConfig, "no frequencies to discretize");
  std::vector<std::int64_t> counts(q0_grid.size(), 0);
  for (double f : frequencies) {
    if (!std::isfinite(f)) raise(ErrorKind::kDomain, "frequency must be finite");
    auto it = std::lower_bound(q0_grid.begin(), q0_grid.end(), f,
                               [](GridValue g, double x) { return g.value() < x; });
    std::size_t idx;
    if (it == q0_grid.begin()) {
      idx = 0;
    } else if (it == q0_grid.end()) {
      idx = q0_grid.size() - 1;
    } else {
      // compare in nanounits so decimal ties such as 0.015 resolve exactly
      const std::size_t upper = static_cast<std::size_t>(it - q0_grid.begin());
      const std::int64_t x = std::llround(f * 1e9);
      const std::int64_t lo = q0_grid[upper - 1].micros() * 1000;
      const std::int64_t hi = q0_grid[upper].micros() * 1000;
      idx = (2 * x > lo + hi) ? upper : upper - 1;
    }
    ++counts[idx];
  }
  std::vector<double> weights(q0_grid.size());
  const double n = static_cast<double>(frequencies.size());
  for (std::size_t i = 0; i < counts.size(); ++i) weights[i] = static_cast<double>(counts[i]) / n;
  // absorb the rounding of the division so the weights sum to 1
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  const auto top = std::max_element(counts.begin(), counts.end()) - counts.begin();
  weights[static_cast<std::size_t>(top)] += 1.0 - total;
  return PriorQ0(q0_grid, weights);
}

}  // namespace wfsel
