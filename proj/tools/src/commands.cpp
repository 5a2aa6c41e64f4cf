#include "commands.hpp"

#include <boost/crc.hpp>
#include <cstdio>
#include <numeric>

#include "wfsel/bank.hpp"
#include "wfsel/density.hpp"
#include "wfsel/error.hpp"
#include "wfsel/inference.hpp"
#include "wfsel/io.hpp"
#include "wfsel/study.hpp"

namespace wfsel::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

std::uint32_t crc_text(const std::string& text) {
  boost::crc_32_type crc;
  crc.process_bytes(text.data(), text.size());
  return crc.checksum();
}

json base_manifest(const std::string& command, const RunConfig& c) {
  return {{"tool", "wfsel"},
          {"version", kVersion},
          {"command", command},
          {"config_hash", config_hash(c)},
          {"seeds", {{"run", c.seed}, {"banks", c.bank_seed}}},
          {"config", c.to_json()}};
}

// Writes each output atomically and records its checksum in the manifest.
void emit(json& manifest, const fs::path& dir, const std::string& name, const std::string& contents) {
  atomic_write(dir / name, contents);
  manifest["outputs"][name] = {{"crc32", crc_text(contents)}, {"bytes", contents.size()}};
}

BankStore::Settings store_settings(const RunConfig& c) {
  BankStore::Settings st;
  st.theta = make_theta(c);
  st.horizon = c.horizon;
  st.bank_size = c.bank_size;
  st.master_seed = c.bank_seed;
  return st;
}

SelectionOptions selection_options(const RunConfig& c) {
  SelectionOptions o;
  o.max_attempts = c.max_attempts;
  return o;
}

TabulationOptions tabulation(const RunConfig& c) {
  TabulationOptions o;
  o.skip_exhausted_rows = c.skip_exhausted;
  return o;
}

std::unique_ptr<BankStore> open_store(const RunConfig& c) {
  if (c.build_missing) return std::make_unique<BankStore>(c.bank_dir, store_settings(c), selection_options(c));
  auto store = std::make_unique<BankStore>(fs::path(c.bank_dir));
  const auto& have = store->settings();
  const auto want = store_settings(c);
  if (!(have.theta == want.theta) || have.horizon != want.horizon || have.bank_size != want.bank_size ||
      have.master_seed != want.master_seed) {
    raise(ErrorKind::kKeyMismatch, "bank store " + c.bank_dir + " was built with other theta, horizon, size or seed");
  }
  return store;
}

LocusTable load_data(const RunConfig& c) {
  if (c.data.empty()) raise(ErrorKind::kConfig, "no data file given (config 'data' or --data)");
  return read_locus_table(c.data);
}

json bank_list(const BankStore& store, const std::vector<GridValue>& s_values, const PriorQ0& prior) {
  json out = json::array();
  for (const auto& r : store.records()) {
    const bool used = std::binary_search(s_values.begin(), s_values.end(), r.s) &&
                      std::find(prior.support().begin(), prior.support().end(), r.q0) != prior.support().end();
    if (!used) continue;
    out.push_back({{"s", r.s.to_string()}, {"q0", r.q0.to_string()}, {"file", r.file}, {"crc32", r.checksum}});
  }
  return out;
}

std::string posterior_csv(const PosteriorSample& post, std::size_t loci) {
  std::string out = "step,s";
  if (!post.q.empty()) {
    for (std::size_t k = 0; k < loci; ++k) out += ",q" + std::to_string(k + 1);
  }
  out += "\n";
  for (std::size_t i = 0; i < post.s.size(); ++i) {
    out += std::to_string(post.steps[i]) + "," + format_double(post.s[i]);
    if (!post.q.empty()) {
      for (double q : post.q[i]) out += "," + format_double(q);
    }
    out += "\n";
  }
  return out;
}

std::string histogram_csv(const std::vector<double>& s, const std::vector<GridValue>& grid) {
  std::string out = "s,count,fraction\n";
  for (GridValue g : grid) {
    const auto n = std::count(s.begin(), s.end(), g.value());
    out += g.to_string() + "," + std::to_string(n) + "," +
           format_double(static_cast<double>(n) / static_cast<double>(s.size())) + "\n";
  }
  return out;
}

std::vector<double> read_posterior_s(const fs::path& path) {
  const std::string text = read_file(path);
  std::vector<double> s;
  std::size_t start = 0;
  int column = -1;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const auto fields = split_csv_line(std::string_view(text).substr(start, end - start));
    start = end + 1;
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (column < 0) {
      const auto it = std::find(fields.begin(), fields.end(), "s");
      if (it == fields.end()) raise(ErrorKind::kParse, path.string() + ": no 's' column");
      column = static_cast<int>(it - fields.begin());
      continue;
    }
    s.push_back(parse_double(fields.at(static_cast<std::size_t>(column))));
  }
  return s;
}

}  // namespace

RunConfig resolve_config(const std::optional<fs::path>& config_path, const Overrides& o) {
  RunConfig c = config_path ? load_config(*config_path) : default_config();
  if (!config_path) {
    c.bank_dir = fs::absolute(c.bank_dir).lexically_normal().string();
    c.out_dir = fs::absolute(c.out_dir).lexically_normal().string();
  }
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  if (o.out_dir) c.out_dir = fs::absolute(*o.out_dir).lexically_normal().string();
  if (o.s_min) c.s_min = *o.s_min;
  if (o.s_max) c.s_max = *o.s_max;
  if (o.s_step) c.s_step = *o.s_step;
  if (o.window_k) c.window_k = *o.window_k;
  if (o.window_shift) c.window_shift = *o.window_shift;
  if (o.level) c.level = *o.level;
  if (o.data) c.data = fs::absolute(*o.data).lexically_normal().string();
  validate_config(c);
  return c;
}

json run_simulate(const RunConfig& c) {
  const GridSpec grid = make_grid(c);
  const PriorQ0 source = make_prior(c.sim_q0 ? *c.sim_q0 : c.prior_q0, grid.q0_values);
  SimulationSpec spec;
  spec.s_true = c.sim_s_true;
  spec.theta = grid.theta;
  spec.horizon = c.horizon;
  spec.n = c.sim_n;
  spec.loci = c.sim_loci;
  const SimulatedData sim = simulate_dataset(spec, source, c.seed, selection_options(c));
  json manifest = base_manifest("simulate", c);
  const fs::path dir(c.out_dir);
  emit(manifest, dir, "loci.csv", format_locus_csv(sim.table));
  std::string truth = "locus_id,q0,q\n";
  for (std::size_t k = 0; k < sim.q.size(); ++k) {
    truth += sim.table.rows[k].locus_id + "," + format_double(sim.q0[k]) + "," + format_double(sim.q[k]) + "\n";
  }
  emit(manifest, dir, "truth.csv", truth);
  atomic_write(dir / "manifest.json", manifest.dump(2) + "\n");
  return {{"status", "ok"}, {"command", "simulate"}, {"loci", sim.table.size()}, {"out_dir", c.out_dir}};
}

json run_build_banks(const RunConfig& c, bool all_q0) {
  const GridSpec grid = make_grid(c);
  const PriorQ0 prior = make_prior(c.prior_q0, grid.q0_values);
  BankStore store(c.bank_dir, store_settings(c), selection_options(c));
  std::vector<std::pair<GridValue, GridValue>> cells;
  const auto& q0s = all_q0 ? grid.q0_values : prior.support();
  for (GridValue s : grid.s_values) {
    for (GridValue q0 : q0s) cells.emplace_back(s, q0);
  }
  std::size_t done = 0;
  const std::size_t missing = static_cast<std::size_t>(
      std::count_if(cells.begin(), cells.end(), [&](const auto& cell) { return !store.has(cell.first, cell.second); }));
  store.build(cells, c.threads, [&](const BankRecord& r) {
    ++done;
    std::fprintf(stderr, "[%zu/%zu] s=%s q0=%s attempts=%lld\n", done, missing, r.s.to_string().c_str(),
                 r.q0.to_string().c_str(), static_cast<long long>(r.attempts_total));
  });
  json manifest = base_manifest("build-banks", c);
  manifest["banks"] = bank_list(store, grid.s_values, all_q0 ? PriorQ0::uniform(grid.q0_values) : prior);
  atomic_write(fs::path(c.out_dir) / "manifest.json", manifest.dump(2) + "\n");
  return {{"status", "ok"}, {"command", "build-banks"}, {"cells", cells.size()}, {"built", done},
          {"bank_dir", c.bank_dir}};
}

json summarize_draws(const std::vector<double>& s, double level) {
  if (s.empty()) raise(ErrorKind::kParse, "posterior has no draws");
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
  const auto [lo, hi] = credible_interval(s, level);
  return {{"mean_s", mean}, {"ci_lo", lo}, {"ci_hi", hi}, {"level", level}, {"draws", s.size()}};
}

json run_infer(const RunConfig& c) {
  const GridSpec grid = make_grid(c);
  const PriorQ0 prior = make_prior(c.prior_q0, grid.q0_values);
  const LocusTable table = load_data(c);
  const Dataset data = table.to_dataset();
  json manifest = base_manifest("infer", c);
  manifest["inputs"]["data"] = {{"path", c.data}, {"crc32", crc_text(read_file(c.data))}};
  const std::uint64_t chain_seed = derive_stream(c.seed, {0x636861696eULL});
  manifest["seeds"]["chain_stream"] = chain_seed;

  PosteriorSample post;
  if (c.sampler == "exact") {
    const ExactModel model(grid.s_values, c.mcmc.prior_s, prior, grid.theta, c.horizon, selection_options(c));
    Rng rng(chain_seed);
    const Stepper step = [&](ChainState& st, Rng& r, AcceptanceStats& stats) {
      exact_imh_step(st, data, model, r, stats);
    };
    post = run_chain(initial_state(data, grid.s_values), step, c.mcmc, grid.s_values, rng);
  } else {
    auto store = open_store(c);
    auto density = TabulatedDensityModel::from_store(grid.s_values, prior, *store, c.build_missing, tabulation(c));
    density->materialize(c.threads);
    post = infer_mwg(data, *density, c.mcmc, chain_seed);
    for (auto s : density->excluded_rows()) post.warnings.push_back("s=" + s.to_string() + " excluded: attempt budget exhausted");
    manifest["banks"] = bank_list(*store, grid.s_values, prior);
  }

  json summary = summarize_draws(post.s, c.level);
  summary["sampler"] = c.sampler;
  summary["loci"] = data.size();
  summary["acceptance"] = {{"s", post.stats.s_rate()}, {"q", post.stats.q_rate()}};
  summary["warnings"] = post.warnings;
  const fs::path dir(c.out_dir);
  emit(manifest, dir, "posterior.csv", posterior_csv(post, data.size()));
  emit(manifest, dir, "posterior_hist.csv", histogram_csv(post.s, grid.s_values));
  emit(manifest, dir, "summary.json", summary.dump(2) + "\n");
  atomic_write(dir / "manifest.json", manifest.dump(2) + "\n");
  summary["status"] = "ok";
  return summary;
}

json run_scan(const RunConfig& c) {
  const GridSpec grid = make_grid(c);
  const PriorQ0 prior = make_prior(c.prior_q0, grid.q0_values);
  const LocusTable table = load_data(c);
  auto store = open_store(c);
  auto density = TabulatedDensityModel::from_store(grid.s_values, prior, *store, c.build_missing, tabulation(c));
  density->materialize(c.threads);
  const auto results = scan(table, static_cast<std::size_t>(c.window_k), static_cast<std::size_t>(c.window_shift),
                            *density, c.mcmc, c.level, c.seed, c.threads);
  json manifest = base_manifest("scan", c);
  manifest["inputs"]["data"] = {{"path", c.data}, {"crc32", crc_text(read_file(c.data))}};
  manifest["banks"] = bank_list(*store, grid.s_values, prior);
  emit(manifest, fs::path(c.out_dir), "windows.csv", format_windows_csv(results));
  atomic_write(fs::path(c.out_dir) / "manifest.json", manifest.dump(2) + "\n");
  const auto flagged = std::count_if(results.begin(), results.end(), [](const auto& r) { return r.flagged; });
  const auto failed = std::count_if(results.begin(), results.end(), [](const auto& r) { return r.failed; });
  return {{"status", "ok"}, {"command", "scan"}, {"windows", results.size()}, {"flagged", flagged}, {"failed", failed}};
}

json run_summarize(const RunConfig& c, const fs::path& posterior) {
  json summary = summarize_draws(read_posterior_s(posterior), c.level);
  summary["status"] = "ok";
  return summary;
}

}  // namespace wfsel::cli
