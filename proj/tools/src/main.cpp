#include <CLI11.hpp>
#include <cstdio>
#include <iostream>

#include "commands.hpp"
#include "wfsel/error.hpp"

namespace {

using wfsel::cli::Overrides;

struct CommonFlags {
  std::string config;
  Overrides overrides;
  std::optional<std::filesystem::path> config_path() const {
    if (config.empty()) return std::nullopt;
    return std::filesystem::path(config);
  }
};

void add_common(CLI::App& cmd, CommonFlags& f) {
  cmd.add_option("--config", f.config, "JSON config file or a previous run manifest");
  cmd.add_option("--seed", f.overrides.seed, "Master seed for this run");
  cmd.add_option("--threads", f.overrides.threads, "Worker threads")->check(CLI::PositiveNumber);
  cmd.add_option("--out-dir", f.overrides.out_dir, "Output directory");
  cmd.add_option("--s-min", f.overrides.s_min, "Smallest selection coefficient on the grid");
  cmd.add_option("--s-max", f.overrides.s_max, "Largest selection coefficient on the grid");
  cmd.add_option("--s-step", f.overrides.s_step, "Spacing of the selection grid");
  cmd.add_option("--window-k", f.overrides.window_k, "Loci per scan window");
  cmd.add_option("--window-shift", f.overrides.window_shift, "Loci between scan window starts");
  cmd.add_option("--level", f.overrides.level, "Credible interval level (default 0.99)");
  cmd.add_option("--data", f.overrides.data, "Locus CSV (locus_id, position, y, n)");
}

int report_error(const std::string& kind, const std::string& message) {
  const nlohmann::json report = {{"status", "error"}, {"kind", kind}, {"message", message}};
  std::cerr << report.dump(2) << std::endl;
  return kind == "config" ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian inference of Wright-Fisher selection coefficients from exact diffusion draws"};
  app.require_subcommand(1);

  CommonFlags sim_flags, bank_flags, infer_flags, scan_flags, sum_flags;
  auto* sim = app.add_subcommand("simulate", "Simulate a locus table under a given selection coefficient");
  add_common(*sim, sim_flags);
  auto* banks = app.add_subcommand("build-banks", "Build exact-draw banks for the s grid and prior support");
  add_common(*banks, bank_flags);
  bool all_q0 = false;
  banks->add_flag("--all-q0", all_q0, "Build every q0 grid point, not only the prior support");
  auto* infer = app.add_subcommand("infer", "Sample the posterior of s for one locus table");
  add_common(*infer, infer_flags);
  auto* scan = app.add_subcommand("scan", "Run inference over sliding windows of loci");
  add_common(*scan, scan_flags);
  auto* summarize = app.add_subcommand("summarize", "Recompute the summary of a posterior CSV");
  add_common(*summarize, sum_flags);
  std::string posterior;
  summarize->add_option("--posterior", posterior, "posterior.csv to summarize (default: <out-dir>/posterior.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    nlohmann::json result;
    if (*sim) {
      result = wfsel::cli::run_simulate(wfsel::cli::resolve_config(sim_flags.config_path(), sim_flags.overrides));
    } else if (*banks) {
      result = wfsel::cli::run_build_banks(
          wfsel::cli::resolve_config(bank_flags.config_path(), bank_flags.overrides), all_q0);
    } else if (*infer) {
      result = wfsel::cli::run_infer(wfsel::cli::resolve_config(infer_flags.config_path(), infer_flags.overrides));
    } else if (*scan) {
      result = wfsel::cli::run_scan(wfsel::cli::resolve_config(scan_flags.config_path(), scan_flags.overrides));
    } else if (*summarize) {
      const auto config = wfsel::cli::resolve_config(sum_flags.config_path(), sum_flags.overrides);
      const std::filesystem::path path =
          posterior.empty() ? std::filesystem::path(config.out_dir) / "posterior.csv" : std::filesystem::path(posterior);
      result = wfsel::cli::run_summarize(config, path);
    }
    std::cout << result.dump(2) << std::endl;
    return 0;
  } catch (const wfsel::Error& e) {
    return report_error(std::string(wfsel::to_string(e.kind())), e.what());
  } catch (const std::exception& e) {
    return report_error("internal", e.what());
  }
}
