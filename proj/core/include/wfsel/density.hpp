#pragma once

#include <atomic>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "wfsel/bank.hpp"
#include "wfsel/grid.hpp"
#include "wfsel/kde.hpp"

namespace wfsel {

// Kernel density estimates keyed by grid cell. Immutable once constructed.
class DensityGrid {
 public:
  DensityGrid() = default;
  explicit DensityGrid(const std::vector<std::shared_ptr<const SampleBank>>& banks, bool reflect = false);

  bool contains(GridValue s, GridValue q0) const;
  // kMissingBank if the cell is absent.
  const Kde& at(GridValue s, GridValue q0) const;
  std::shared_ptr<const Kde> share(GridValue s, GridValue q0) const;
  std::size_t size() const { return kdes_.size(); }

 private:
  std::map<std::pair<GridValue, GridValue>, std::shared_ptr<const Kde>> kdes_;
};

// sum over q0 of prior(q0) * kde(q | s, q0), evaluated without truncation.
double marginal_density(double q, GridValue s, const PriorQ0& prior, const DensityGrid& grid);

// Log density of a locus frequency given the grid index of s.
class DensityModel {
 public:
  virtual ~DensityModel() = default;
  virtual const std::vector<GridValue>& s_values() const = 0;
  virtual double log_density(double q, std::size_t s_index) const = 0;
};

// Calls marginal_density directly; exact but costs one kernel per draw.
class ExactDensityModel final : public DensityModel {
 public:
  ExactDensityModel(std::vector<GridValue> s_values, PriorQ0 prior, std::shared_ptr<const DensityGrid> grid);

  const std::vector<GridValue>& s_values() const override { return s_values_; }
  double log_density(double q, std::size_t s_index) const override;

 private:
  std::vector<GridValue> s_values_;
  PriorQ0 prior_;
  std::shared_ptr<const DensityGrid> grid_;
};

struct TabulationOptions {
  std::size_t min_intervals = 4096;
  std::size_t max_intervals = 16384;
  // grid intervals per bandwidth of the narrowest kernel in a row
  double intervals_per_bandwidth = 8.0;
  // A row whose banks run out of attempts gets density 0 (every proposal to
  // it is rejected) instead of raising attempts-exhausted.
  bool skip_exhausted_rows = false;
};

// Marginal density tabulated on a uniform grid over [0, 1] per s value and
// interpolated linearly. Rows are built on first use from `RowSource`, which
// may load or build banks lazily; construction of a row is thread-safe.
class TabulatedDensityModel final : public DensityModel {
 public:
  using RowTerms = std::vector<std::pair<double, std::shared_ptr<const Kde>>>;
  using RowSource = std::function<RowTerms(GridValue s)>;

  TabulatedDensityModel(std::vector<GridValue> s_values, RowSource source, TabulationOptions options = {});

  static std::shared_ptr<TabulatedDensityModel> from_grid(std::vector<GridValue> s_values, const PriorQ0& prior,
                                                          std::shared_ptr<const DensityGrid> grid,
                                                          TabulationOptions options = {});
  // Banks missing from the store are built when `build_missing` is set,
  // otherwise they raise kMissingBank.
  static std::shared_ptr<TabulatedDensityModel> from_store(std::vector<GridValue> s_values, const PriorQ0& prior,
                                                           BankStore& store, bool build_missing,
                                                           TabulationOptions options = {});

  const std::vector<GridValue>& s_values() const override { return s_values_; }
  double log_density(double q, std::size_t s_index) const override;
  double density(double q, std::size_t s_index) const;

  // Builds every row now, using up to `threads` workers.
  void materialize(int threads) const;

  // Rows dropped under skip_exhausted_rows so far.
  std::vector<GridValue> excluded_rows() const;

 private:
  struct Row {
    std::once_flag once;
    std::vector<double> values;
    std::atomic<bool> excluded{false};
  };
  const Row& row(std::size_t s_index) const;

  std::vector<GridValue> s_values_;
  RowSource source_;
  TabulationOptions options_;
  std::vector<std::unique_ptr<Row>> rows_;
};

}  // namespace wfsel
