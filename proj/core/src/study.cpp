#include "wfsel/study.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "wfsel/error.hpp"
#include "wfsel/io.hpp"

namespace wfsel {

void LocusTable::validate(bool require_sorted_positions) const {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const LocusRow& r = rows[i];
    if (r.n < 1) raise(ErrorKind::kDomain, "locus " + r.locus_id + ": n must be >= 1");
    if (r.y < 0 || r.y > r.n) raise(ErrorKind::kDomain, "locus " + r.locus_id + ": y must lie in [0, n]");
    if (r.position < 0) raise(ErrorKind::kDomain, "locus " + r.locus_id + ": position must be >= 0");
    if (require_sorted_positions && i > 0 && r.position < rows[i - 1].position) {
      raise(ErrorKind::kDomain, "positions must be nondecreasing (locus " + r.locus_id + ")");
    }
  }
}

Dataset LocusTable::to_dataset(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > rows.size()) raise(ErrorKind::kDomain, "invalid locus range");
  Dataset d;
  for (std::size_t i = begin; i < end; ++i) {
    d.counts.push_back(rows[i].y);
    d.trials.push_back(rows[i].n);
    d.locus_ids.push_back(rows[i].locus_id);
  }
  d.validate();
  return d;
}

LocusTable parse_locus_csv(std::string_view text) {
  LocusTable table;
  std::size_t line_no = 0;
  int col_id = -1;
  int col_pos = -1;
  int col_y = -1;
  int col_n = -1;
  bool header = true;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const auto fields = split_csv_line(line);
    if (header) {
      for (std::size_t i = 0; i < fields.size(); ++i) {
        const int idx = static_cast<int>(i);
        if (fields[i] == "locus_id") col_id = idx;
        if (fields[i] == "position") col_pos = idx;
        if (fields[i] == "y") col_y = idx;
        if (fields[i] == "n") col_n = idx;
      }
      if (col_id < 0 || col_pos < 0 || col_y < 0 || col_n < 0) {
        raise(ErrorKind::kParse, "locus table header must name locus_id, position, y and n");
      }
      header = false;
      continue;
    }
    const auto need = static_cast<std::size_t>(std::max({col_id, col_pos, col_y, col_n}));
    if (fields.size() <= need) raise(ErrorKind::kParse, "line " + std::to_string(line_no) + ": too few columns");
    try {
      LocusRow r;
      r.locus_id = fields[static_cast<std::size_t>(col_id)];
      r.position = parse_int(fields[static_cast<std::size_t>(col_pos)]);
      r.y = parse_int(fields[static_cast<std::size_t>(col_y)]);
      r.n = parse_int(fields[static_cast<std::size_t>(col_n)]);
      table.rows.push_back(std::move(r));
    } catch (const Error& e) {
      raise(ErrorKind::kParse, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (header) raise(ErrorKind::kParse, "locus table is empty");
  table.validate();
  return table;
}

namespace {
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}
}  // namespace

std::string format_locus_csv(const LocusTable& table) {
  std::string out = "locus_id,position,y,n\n";
  for (const auto& r : table.rows) {
    out += csv_field(r.locus_id) + "," + std::to_string(r.position) + "," + std::to_string(r.y) + "," +
           std::to_string(r.n) + "\n";
  }
  return out;
}

LocusTable read_locus_table(const std::filesystem::path& path) { return parse_locus_csv(read_file(path)); }

void write_locus_table(const std::filesystem::path& path, const LocusTable& table) {
  atomic_write(path, format_locus_csv(table));
}

namespace {

SimulatedData simulate_impl(const SimulationSpec& spec, std::uint64_t seed, const SelectionOptions& options,
                            const std::function<double(std::size_t, Rng&)>& start) {
  if (spec.n < 1 || spec.loci < 1) raise(ErrorKind::kDomain, "simulation needs n >= 1 and loci >= 1");
  const SelectedSampler sampler(spec.s_true, spec.theta, spec.horizon, nullptr, options);
  SimulatedData out;
  const auto K = static_cast<std::size_t>(spec.loci);
  out.q0.resize(K);
  out.q.resize(K);
  out.table.rows.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    Rng rng(derive_stream(seed, {0x73696dULL, k}));
    const double q0 = start(k, rng);
    const double q = sampler.draw(q0, rng).value;
    out.q0[k] = q0;
    out.q[k] = q;
    out.table.rows[k] = LocusRow{"locus" + std::to_string(k + 1), static_cast<std::int64_t>(k + 1),
                                 rng.binomial(spec.n, q), spec.n};
  }
  return out;
}

}  // namespace

SimulatedData simulate_dataset(const SimulationSpec& spec, const PriorQ0& q0_source, std::uint64_t seed,
                               const SelectionOptions& options) {
  std::vector<double> cdf;
  double acc = 0.0;
  for (double w : q0_source.weights()) cdf.push_back(acc += w);
  return simulate_impl(spec, seed, options, [&](std::size_t, Rng& rng) {
    const double u = rng.uniform() * cdf.back();
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin()),
                                         cdf.size() - 1);
    return q0_source.support()[i].value();
  });
}

SimulatedData simulate_dataset(const SimulationSpec& spec, std::span<const double> q0_values, std::uint64_t seed,
                               const SelectionOptions& options) {
  if (q0_values.empty()) raise(ErrorKind::kDomain, "no starting frequencies given");
  for (double q0 : q0_values) {
    if (!(q0 >= 0.0 && q0 <= 1.0)) raise(ErrorKind::kDomain, "starting frequencies must lie in [0, 1]");
  }
  return simulate_impl(spec, seed, options, [&](std::size_t k, Rng&) { return q0_values[k % q0_values.size()]; });
}

PosteriorSample infer_mwg(const Dataset& data, const DensityModel& density, const McmcConfig& config,
                          std::uint64_t seed) {
  const auto& grid = density.s_values();
  Rng rng(seed);
  const Stepper step = [&](ChainState& st, Rng& r, AcceptanceStats& stats) {
    mwg_step(st, data, density, config, r, stats);
  };
  return run_chain(initial_state(data, grid), step, config, grid, rng);
}

std::vector<WindowSpan> window_spans(std::size_t loci, std::size_t window, std::size_t shift) {
  if (window < 1 || shift < 1) raise(ErrorKind::kDomain, "window size and shift must be >= 1");
  std::vector<WindowSpan> out;
  for (std::size_t begin = 0; begin + window <= loci; begin += shift) out.push_back({out.size(), begin, begin + window});
  return out;
}

std::uint64_t window_seed(std::uint64_t master_seed, std::size_t window_index) {
  return derive_stream(master_seed, {0x77696e646f77ULL, window_index});
}

std::vector<WindowResult> scan(const LocusTable& table, std::size_t window, std::size_t shift,
                               const DensityModel& density, const McmcConfig& config, double level,
                               std::uint64_t master_seed, int threads) {
  table.validate(true);
  if (table.size() < window) {
    raise(ErrorKind::kDomain, "table has " + std::to_string(table.size()) + " loci, fewer than the window size");
  }
  const auto spans = window_spans(table.size(), window, shift);
  std::vector<WindowResult> results(spans.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < spans.size(); i = next++) {
      const WindowSpan& w = spans[i];
      WindowResult& r = results[i];
      r.window_index = w.index;
      r.start_position = table.rows[w.begin].position;
      r.end_position = table.rows[w.end - 1].position;
      r.loci = w.end - w.begin;
      try {
        const PosteriorSample post = infer_mwg(table.to_dataset(w.begin, w.end), density, config,
                                               window_seed(master_seed, w.index));
        const auto [lo, hi] = credible_interval(post.s, level);
        r.posterior_mean_s = post.mean_s;
        r.ci_lo = lo;
        r.ci_hi = hi;
        r.flagged = lo > 0.0 || hi < 0.0;
      } catch (const std::exception& e) {
        r.failed = true;
        r.error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  return results;
}

std::string format_windows_csv(const std::vector<WindowResult>& results) {
  std::string out = "window_index,start_position,end_position,loci,posterior_mean_s,ci_lo,ci_hi,flagged,failed,error\n";
  for (const auto& r : results) {
    out += std::to_string(r.window_index) + "," + std::to_string(r.start_position) + "," +
           std::to_string(r.end_position) + "," + std::to_string(r.loci) + "," +
           (r.failed ? std::string() : format_double(r.posterior_mean_s)) + "," +
           (r.failed ? std::string() : format_double(r.ci_lo)) + "," +
           (r.failed ? std::string() : format_double(r.ci_hi)) + "," + (r.flagged ? "1" : "0") + "," +
           (r.failed ? "1" : "0") + "," + csv_field(r.error) + "\n";
  }
  return out;
}

}  // namespace wfsel
