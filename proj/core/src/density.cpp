#include "wfsel/density.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <thread>

#include "wfsel/error.hpp"

namespace wfsel {

DensityGrid::DensityGrid(const std::vector<std::shared_ptr<const SampleBank>>& banks, bool reflect) {
  for (const auto& bank : banks) {
    if (!bank) continue;
    try {
      kdes_[{bank->key.s, bank->key.q0}] = std::make_shared<const Kde>(Kde::scott(bank->draws, reflect));
    } catch (const Error& e) {
      raise(e.kind(), "bank s=" + bank->key.s.to_string() + " q0=" + bank->key.q0.to_string() + ": " + e.what());
    }
  }
}

bool DensityGrid::contains(GridValue s, GridValue q0) const { return kdes_.count({s, q0}) != 0; }

std::shared_ptr<const Kde> DensityGrid::share(GridValue s, GridValue q0) const {
  const auto it = kdes_.find({s, q0});
  if (it == kdes_.end()) {
    raise(ErrorKind::kMissingBank, "no density for s=" + s.to_string() + " q0=" + q0.to_string());
  }
  return it->second;
}

const Kde& DensityGrid::at(GridValue s, GridValue q0) const { return *share(s, q0); }

double marginal_density(double q, GridValue s, const PriorQ0& prior, const DensityGrid& grid) {
  double total = 0.0;
  for (std::size_t i = 0; i < prior.size(); ++i) {
    const Kde& kde = grid.at(s, prior.support()[i]);
    const double h = kde.bandwidth();
    const double value = kde.reflected() ? kde_eval_reflected(q, kde.sorted(), h) : kde_eval(q, kde.sorted(), h);
    total += prior.weights()[i] * value;
  }
  return total;
}

ExactDensityModel::ExactDensityModel(std::vector<GridValue> s_values, PriorQ0 prior,
                                     std::shared_ptr<const DensityGrid> grid)
    : s_values_(std::move(s_values)), prior_(std::move(prior)), grid_(std::move(grid)) {
  for (GridValue s : s_values_) {
    for (GridValue q0 : prior_.support()) {
      if (!grid_->contains(s, q0)) {
        raise(ErrorKind::kMissingBank, "no density for s=" + s.to_string() + " q0=" + q0.to_string());
      }
    }
  }
}

double ExactDensityModel::log_density(double q, std::size_t s_index) const {
  return std::log(marginal_density(q, s_values_.at(s_index), prior_, *grid_));
}

TabulatedDensityModel::TabulatedDensityModel(std::vector<GridValue> s_values, RowSource source,
                                             TabulationOptions options)
    : s_values_(std::move(s_values)), source_(std::move(source)), options_(options) {
  if (options_.min_intervals < 2 || options_.max_intervals < options_.min_intervals) {
    raise(ErrorKind::kConfig, "invalid tabulation interval bounds");
  }
  rows_.reserve(s_values_.size());
  for (std::size_t i = 0; i < s_values_.size(); ++i) rows_.push_back(std::make_unique<Row>());
}

std::shared_ptr<TabulatedDensityModel> TabulatedDensityModel::from_grid(std::vector<GridValue> s_values,
                                                                        const PriorQ0& prior,
                                                                        std::shared_ptr<const DensityGrid> grid,
                                                                        TabulationOptions options) {
  auto source = [prior, grid](GridValue s) {
    RowTerms terms;
    for (std::size_t i = 0; i < prior.size(); ++i) terms.emplace_back(prior.weights()[i], grid->share(s, prior.support()[i]));
    return terms;
  };
  return std::make_shared<TabulatedDensityModel>(std::move(s_values), source, options);
}

std::shared_ptr<TabulatedDensityModel> TabulatedDensityModel::from_store(std::vector<GridValue> s_values,
                                                                         const PriorQ0& prior, BankStore& store,
                                                                         bool build_missing,
                                                                         TabulationOptions options) {
  auto source = [prior, &store, build_missing](GridValue s) {
    RowTerms terms;
    for (std::size_t i = 0; i < prior.size(); ++i) {
      const GridValue q0 = prior.support()[i];
      const auto bank = build_missing ? store.get_or_build(s, q0) : store.get(s, q0);
      try {
        terms.emplace_back(prior.weights()[i], std::make_shared<const Kde>(Kde::scott(bank->draws)));
      } catch (const Error& e) {
        raise(e.kind(), "bank s=" + s.to_string() + " q0=" + q0.to_string() + ": " + e.what());
      }
    }
    return terms;
  };
  return std::make_shared<TabulatedDensityModel>(std::move(s_values), source, options);
}

const TabulatedDensityModel::Row& TabulatedDensityModel::row(std::size_t s_index) const {
  Row& r = *rows_.at(s_index);
  std::call_once(r.once, [&] {
    RowTerms terms;
    try {
      terms = source_(s_values_[s_index]);
    } catch (const Error& e) {
      if (!options_.skip_exhausted_rows || e.kind() != ErrorKind::kAttemptsExhausted) throw;
      r.excluded = true;
      return;
    }
    double h_min = std::numeric_limits<double>::infinity();
    for (const auto& [w, kde] : terms) h_min = std::min(h_min, kde->bandwidth());
    std::size_t intervals = options_.min_intervals;
    while (intervals < options_.max_intervals &&
           static_cast<double>(intervals) * h_min < options_.intervals_per_bandwidth) {
      intervals *= 2;
    }
    intervals = std::min(intervals, options_.max_intervals);
    std::vector<double> values(intervals + 1, 0.0);
    for (const auto& [w, kde] : terms) kde->accumulate_on_grid(values, w);
    r.values = std::move(values);
  });
  return r;
}

double TabulatedDensityModel::density(double q, std::size_t s_index) const {
  if (!(q >= 0.0 && q <= 1.0)) return 0.0;
  const auto& v = row(s_index).values;
  if (v.empty()) return 0.0;
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto i = std::min(static_cast<std::size_t>(pos), v.size() - 2);
  const double frac = pos - static_cast<double>(i);
  return (1.0 - frac) * v[i] + frac * v[i + 1];
}

double TabulatedDensityModel::log_density(double q, std::size_t s_index) const {
  const double d = density(q, s_index);
  return d > 0.0 ? std::log(d) : -std::numeric_limits<double>::infinity();
}

std::vector<GridValue> TabulatedDensityModel::excluded_rows() const {
  std::vector<GridValue> out;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (rows_[i]->excluded) out.push_back(s_values_[i]);
  }
  return out;
}

void TabulatedDensityModel::materialize(int threads) const {
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < rows_.size(); i = next++) {
      try {
        row(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace wfsel
