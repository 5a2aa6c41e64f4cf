#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "config.hpp"

namespace wfsel::cli {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out_dir;
  std::optional<double> s_min;
  std::optional<double> s_max;
  std::optional<double> s_step;
  std::optional<std::int64_t> window_k;
  std::optional<std::int64_t> window_shift;
  std::optional<double> level;
  std::optional<std::string> data;
};

RunConfig resolve_config(const std::optional<std::filesystem::path>& config_path, const Overrides& overrides);

// Each command returns a JSON summary that the front end prints.
nlohmann::json run_simulate(const RunConfig& config);
nlohmann::json run_build_banks(const RunConfig& config, bool all_q0);
nlohmann::json run_infer(const RunConfig& config);
nlohmann::json run_scan(const RunConfig& config);
nlohmann::json run_summarize(const RunConfig& config, const std::filesystem::path& posterior_csv);

// Equal-tailed summary of the s column of a posterior CSV.
nlohmann::json summarize_draws(const std::vector<double>& s, double level);

}  // namespace wfsel::cli
