#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wfsel/density.hpp"
#include "wfsel/grid.hpp"
#include "wfsel/inference.hpp"

namespace wfsel {

struct LocusRow {
  std::string locus_id;
  std::int64_t position = 0;
  std::int64_t y = 0;
  std::int64_t n = 0;

  friend bool operator==(const LocusRow&, const LocusRow&) = default;
};

struct LocusTable {
  std::vector<LocusRow> rows;

  std::size_t size() const { return rows.size(); }
  void validate(bool require_sorted_positions = false) const;
  // Loci [begin, end) as a Dataset.
  Dataset to_dataset(std::size_t begin, std::size_t end) const;
  Dataset to_dataset() const { return to_dataset(0, rows.size()); }

  friend bool operator==(const LocusTable&, const LocusTable&) = default;
};

// Headered CSV with columns locus_id, position, y, n (any column order).
LocusTable parse_locus_csv(std::string_view text);
std::string format_locus_csv(const LocusTable& table);
LocusTable read_locus_table(const std::filesystem::path& path);
void write_locus_table(const std::filesystem::path& path, const LocusTable& table);

struct SimulationSpec {
  double s_true = 0.0;
  MutationRates theta = MutationRates::symmetric(0.00014);
  double horizon = 0.1;
  std::int64_t n = 200;
  std::int64_t loci = 324;
};

struct SimulatedData {
  LocusTable table;
  std::vector<double> q0;
  std::vector<double> q;
};

// Locus k uses its own stream derived from (seed, k); starting frequencies
// are drawn from the prior or taken in turn from the explicit list.
SimulatedData simulate_dataset(const SimulationSpec& spec, const PriorQ0& q0_source, std::uint64_t seed,
                               const SelectionOptions& options = {});
SimulatedData simulate_dataset(const SimulationSpec& spec, std::span<const double> q0_values, std::uint64_t seed,
                               const SelectionOptions& options = {});

// Runs the approximate sampler from the default starting state.
PosteriorSample infer_mwg(const Dataset& data, const DensityModel& density, const McmcConfig& config,
                          std::uint64_t seed);

struct WindowSpan {
  std::size_t index;
  std::size_t begin;
  std::size_t end;
};

// Windows of `window` consecutive loci every `shift` loci; a trailing partial
// window is dropped.
std::vector<WindowSpan> window_spans(std::size_t loci, std::size_t window, std::size_t shift);

struct WindowResult {
  std::size_t window_index = 0;
  std::int64_t start_position = 0;
  std::int64_t end_position = 0;
  std::size_t loci = 0;
  double posterior_mean_s = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  bool flagged = false;
  bool failed = false;
  std::string error;
};

std::uint64_t window_seed(std::uint64_t master_seed, std::size_t window_index);

// A failing window is reported with failed=true and the scan continues.
std::vector<WindowResult> scan(const LocusTable& table, std::size_t window, std::size_t shift,
                               const DensityModel& density, const McmcConfig& config, double level,
                               std::uint64_t master_seed, int threads = 1);

std::string format_windows_csv(const std::vector<WindowResult>& results);

}  // namespace wfsel
