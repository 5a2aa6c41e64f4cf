#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wfsel/grid.hpp"
#include "wfsel/inference.hpp"

namespace wfsel::cli {

struct PriorSpec {
  std::string kind = "uniform";  // uniform | weights | frequencies
  std::vector<double> support;
  std::vector<double> weights;
  std::vector<double> values;
  std::string file;
};

struct RunConfig {
  double theta1 = 0.00014;
  double theta2 = 0.00014;
  double horizon = 0.1;

  double s_min = -12.0;
  double s_max = 17.0;
  double s_step = 0.5;
  double q0_min = 0.01;
  double q0_max = 0.99;
  double q0_step = 0.01;

  std::string bank_dir = "banks";
  std::int64_t bank_size = 10'000;
  std::uint64_t bank_seed = 1;
  bool build_missing = false;
  bool skip_exhausted = false;
  std::int64_t max_attempts = 1'000'000;

  PriorSpec prior_q0;

  std::string sampler = "mwg";  // mwg | exact
  McmcConfig mcmc;

  std::string data;
  std::uint64_t seed = 1;
  double level = 0.99;
  int threads = 1;
  std::string out_dir = "out";

  double sim_s_true = 0.0;
  std::int64_t sim_n = 200;
  std::int64_t sim_loci = 324;
  std::optional<PriorSpec> sim_q0;

  std::int64_t window_k = 500;
  std::int64_t window_shift = 250;

  nlohmann::json to_json() const;
};

// Reads every field it knows, collecting all problems before throwing a single
// kConfig error that lists them. Relative paths resolve against `base_dir`.
// A run manifest (an object with a "config" member) is accepted as well.
RunConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_config(const std::filesystem::path& path);
RunConfig default_config();

// Checks cross-field constraints; lists every violation at once.
void validate_config(const RunConfig& config);

GridSpec make_grid(const RunConfig& config);
MutationRates make_theta(const RunConfig& config);
PriorQ0 make_prior(const PriorSpec& spec, const std::vector<GridValue>& q0_grid);

std::string config_hash(const RunConfig& config);

}  // namespace wfsel::cli
