#include "config.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "wfsel/error.hpp"
#include "wfsel/io.hpp"

namespace wfsel::cli {

using nlohmann::json;

namespace {

class Reader {
 public:
  explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

  // Reports keys of `obj` outside `known`.
  void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> known) {
    std::set<std::string> names(known.begin(), known.end());
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (!names.count(it.key())) errors_.push_back(where + it.key() + ": unknown key");
    }
  }

  void number(const json& obj, const char* key, double& out, const std::string& where) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_number()) {
      errors_.push_back(where + key + ": expected a number");
      return;
    }
    out = v.get<double>();
  }

  template <class Int>
  void integer(const json& obj, const char* key, Int& out, const std::string& where) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) {
      errors_.push_back(where + key + ": expected an integer");
      return;
    }
    if constexpr (std::is_unsigned_v<Int>) {
      if (v.is_number_unsigned() || v.get<std::int64_t>() >= 0) {
        out = v.get<Int>();
      } else {
        errors_.push_back(where + key + ": expected a nonnegative integer");
      }
    } else {
      out = v.get<Int>();
    }
  }

  void boolean(const json& obj, const char* key, bool& out, const std::string& where) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_boolean()) {
      errors_.push_back(where + key + ": expected true or false");
      return;
    }
    out = v.get<bool>();
  }

  void string(const json& obj, const char* key, std::string& out, const std::string& where) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_string()) {
      errors_.push_back(where + key + ": expected a string");
      return;
    }
    out = v.get<std::string>();
  }

  void numbers(const json& obj, const char* key, std::vector<double>& out, const std::string& where) {
    if (!obj.contains(key)) return;
    const json& v = obj.at(key);
    if (!v.is_array()) {
      errors_.push_back(where + key + ": expected an array of numbers");
      return;
    }
    out.clear();
    for (const auto& x : v) {
      if (!x.is_number()) {
        errors_.push_back(where + key + ": expected an array of numbers");
        return;
      }
      out.push_back(x.get<double>());
    }
  }

  bool object(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) return false;
    if (!obj.at(key).is_object()) {
      errors_.push_back(where + key + ": expected an object");
      return false;
    }
    return true;
  }

 private:
  std::vector<std::string>& errors_;
};

std::string resolve(const std::string& path, const std::filesystem::path& base) {
  if (path.empty()) return path;
  std::filesystem::path p(path);
  if (p.is_relative()) p = base / p;
  return p.lexically_normal().string();
}

PriorSpec read_prior(Reader& r, const json& obj, const std::string& where, const std::filesystem::path& base) {
  PriorSpec p;
  r.check_keys(obj, where, {"kind", "support", "weights", "values", "file"});
  r.string(obj, "kind", p.kind, where);
  r.numbers(obj, "support", p.support, where);
  r.numbers(obj, "weights", p.weights, where);
  r.numbers(obj, "values", p.values, where);
  r.string(obj, "file", p.file, where);
  p.file = resolve(p.file, base);
  return p;
}

json prior_json(const PriorSpec& p) {
  json j = {{"kind", p.kind}};
  if (!p.support.empty()) j["support"] = p.support;
  if (!p.weights.empty()) j["weights"] = p.weights;
  if (!p.values.empty()) j["values"] = p.values;
  if (!p.file.empty()) j["file"] = p.file;
  return j;
}

void validate_prior(const PriorSpec& p, const std::string& where, std::vector<std::string>& errors) {
  if (p.kind == "uniform") return;
  if (p.kind == "weights") {
    if (p.support.empty() || p.support.size() != p.weights.size()) {
      errors.push_back(where + "support and weights must be non-empty and equally long");
    }
    double total = 0.0;
    for (double w : p.weights) {
      if (!(w >= 0.0)) errors.push_back(where + "weights must be >= 0");
      total += w;
    }
    if (!p.weights.empty() && std::fabs(total - 1.0) > 1e-12) errors.push_back(where + "weights must sum to 1");
    return;
  }
  if (p.kind == "frequencies") {
    if (p.values.empty() && p.file.empty()) errors.push_back(where + "frequencies need 'values' or 'file'");
    return;
  }
  errors.push_back(where + "kind must be uniform, weights or frequencies");
}

std::vector<double> read_frequency_file(const std::string& path) {
  std::vector<double> out;
  const std::string text = read_file(path);
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(start, end - start);
    start = end + 1;
    const auto fields = split_csv_line(line);
    if (fields.empty() || fields[0].empty()) continue;
    try {
      out.push_back(parse_double(fields[0]));
    } catch (const Error&) {
      if (!out.empty()) throw;  // only a header line may be non-numeric
    }
  }
  return out;
}

}  // namespace

RunConfig default_config() { return RunConfig{}; }

RunConfig parse_config(const json& input, const std::filesystem::path& base_dir) {
  if (!input.is_object()) raise(ErrorKind::kConfig, "config must be a JSON object");
  const json& j = input.contains("config") && input.at("config").is_object() ? input.at("config") : input;
  RunConfig c;
  std::vector<std::string> errors;
  Reader r(errors);
  r.check_keys(j, "", {"theta1", "theta2", "horizon", "grid", "banks", "prior_q0", "mcmc", "data", "seed", "level",
                       "threads", "out_dir", "simulate", "scan"});
  r.number(j, "theta1", c.theta1, "");
  r.number(j, "theta2", c.theta2, "");
  r.number(j, "horizon", c.horizon, "");
  if (r.object(j, "grid", "")) {
    const json& g = j.at("grid");
    r.check_keys(g, "grid.", {"s_min", "s_max", "s_step", "q0_min", "q0_max", "q0_step"});
    r.number(g, "s_min", c.s_min, "grid.");
    r.number(g, "s_max", c.s_max, "grid.");
    r.number(g, "s_step", c.s_step, "grid.");
    r.number(g, "q0_min", c.q0_min, "grid.");
    r.number(g, "q0_max", c.q0_max, "grid.");
    r.number(g, "q0_step", c.q0_step, "grid.");
  }
  if (r.object(j, "banks", "")) {
    const json& b = j.at("banks");
    r.check_keys(b, "banks.", {"dir", "size", "seed", "build_missing", "skip_exhausted", "max_attempts"});
    r.string(b, "dir", c.bank_dir, "banks.");
    r.integer(b, "size", c.bank_size, "banks.");
    r.integer(b, "seed", c.bank_seed, "banks.");
    r.boolean(b, "build_missing", c.build_missing, "banks.");
    r.boolean(b, "skip_exhausted", c.skip_exhausted, "banks.");
    r.integer(b, "max_attempts", c.max_attempts, "banks.");
  }
  if (r.object(j, "prior_q0", "")) c.prior_q0 = read_prior(r, j.at("prior_q0"), "prior_q0.", base_dir);
  if (r.object(j, "mcmc", "")) {
    const json& m = j.at("mcmc");
    r.check_keys(m, "mcmc.", {"sampler", "steps", "burn_in", "thin", "s_window", "sigma_q", "prior_s", "random_scan",
                              "keep_q"});
    r.string(m, "sampler", c.sampler, "mcmc.");
    r.integer(m, "steps", c.mcmc.steps, "mcmc.");
    r.integer(m, "burn_in", c.mcmc.burn_in, "mcmc.");
    r.integer(m, "thin", c.mcmc.thin, "mcmc.");
    r.integer(m, "s_window", c.mcmc.s_window, "mcmc.");
    r.number(m, "sigma_q", c.mcmc.sigma_q, "mcmc.");
    r.numbers(m, "prior_s", c.mcmc.prior_s, "mcmc.");
    r.boolean(m, "random_scan", c.mcmc.random_scan, "mcmc.");
    r.boolean(m, "keep_q", c.mcmc.keep_q, "mcmc.");
  }
  r.string(j, "data", c.data, "");
  r.integer(j, "seed", c.seed, "");
  r.number(j, "level", c.level, "");
  r.integer(j, "threads", c.threads, "");
  r.string(j, "out_dir", c.out_dir, "");
  if (r.object(j, "simulate", "")) {
    const json& s = j.at("simulate");
    r.check_keys(s, "simulate.", {"s_true", "n", "loci", "q0"});
    r.number(s, "s_true", c.sim_s_true, "simulate.");
    r.integer(s, "n", c.sim_n, "simulate.");
    r.integer(s, "loci", c.sim_loci, "simulate.");
    if (r.object(s, "q0", "simulate.")) c.sim_q0 = read_prior(r, s.at("q0"), "simulate.q0.", base_dir);
  }
  if (r.object(j, "scan", "")) {
    const json& s = j.at("scan");
    r.check_keys(s, "scan.", {"window_k", "window_shift"});
    r.integer(s, "window_k", c.window_k, "scan.");
    r.integer(s, "window_shift", c.window_shift, "scan.");
  }
  c.data = resolve(c.data, base_dir);
  c.bank_dir = resolve(c.bank_dir, base_dir);
  c.out_dir = resolve(c.out_dir, base_dir);
  if (!errors.empty()) {
    std::string msg = std::to_string(errors.size()) + " problem(s) in config:";
    for (const auto& e : errors) msg += "\n  " + e;
    raise(ErrorKind::kConfig, msg);
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    raise(ErrorKind::kConfig, path.string() + ": " + e.what());
  }
  const auto base = std::filesystem::absolute(path).parent_path();
  return parse_config(j, base);
}

void validate_config(const RunConfig& c) {
  std::vector<std::string> errors;
  if (!(c.theta1 > 0.0) || !std::isfinite(c.theta1)) errors.push_back("theta1 must be > 0");
  if (!(c.theta2 > 0.0) || !std::isfinite(c.theta2)) errors.push_back("theta2 must be > 0");
  if (!(c.horizon > 0.0) || !std::isfinite(c.horizon)) errors.push_back("horizon must be > 0");
  try {
    arithmetic_grid(c.s_min, c.s_max, c.s_step);
  } catch (const Error& e) {
    errors.push_back(std::string("grid (s): ") + e.what());
  }
  try {
    const auto q = arithmetic_grid(c.q0_min, c.q0_max, c.q0_step);
    if (q.front().micros() <= 0 || q.back().micros() >= GridValue::kScale) {
      errors.push_back("grid (q0): values must lie strictly inside (0, 1)");
    }
  } catch (const Error& e) {
    errors.push_back(std::string("grid (q0): ") + e.what());
  }
  if (c.bank_size < 2) errors.push_back("banks.size must be >= 2");
  if (c.max_attempts < 1) errors.push_back("banks.max_attempts must be >= 1");
  validate_prior(c.prior_q0, "prior_q0: ", errors);
  if (c.sim_q0) validate_prior(*c.sim_q0, "simulate.q0: ", errors);
  if (c.sampler != "mwg" && c.sampler != "exact") errors.push_back("mcmc.sampler must be mwg or exact");
  if (c.mcmc.steps < 1) errors.push_back("mcmc.steps must be >= 1");
  if (c.mcmc.burn_in < 0 || c.mcmc.burn_in >= c.mcmc.steps) errors.push_back("mcmc.burn_in must lie in [0, steps)");
  if (c.mcmc.thin < 1) errors.push_back("mcmc.thin must be >= 1");
  if (c.mcmc.steps >= 1 && c.mcmc.thin >= 1 && c.mcmc.burn_in >= 0 && c.mcmc.retained() < 1) {
    errors.push_back("mcmc: (steps - burn_in) / thin must be >= 1");
  }
  if (c.mcmc.s_window < 1) errors.push_back("mcmc.s_window must be >= 1");
  if (!(c.mcmc.sigma_q > 0.0)) errors.push_back("mcmc.sigma_q must be > 0");
  if (!c.mcmc.prior_s.empty()) {
    try {
      const auto s = arithmetic_grid(c.s_min, c.s_max, c.s_step);
      if (s.size() != c.mcmc.prior_s.size()) errors.push_back("mcmc.prior_s must have one weight per s grid value");
    } catch (const Error&) {
    }
    double total = 0.0;
    for (double w : c.mcmc.prior_s) total += w;
    if (std::fabs(total - 1.0) > 1e-9) errors.push_back("mcmc.prior_s must sum to 1");
  }
  if (!(c.level > 0.0 && c.level < 1.0)) errors.push_back("level must lie in (0, 1)");
  if (c.threads < 1) errors.push_back("threads must be >= 1");
  if (c.sim_n < 1) errors.push_back("simulate.n must be >= 1");
  if (c.sim_loci < 1) errors.push_back("simulate.loci must be >= 1");
  if (c.window_k < 1) errors.push_back("scan.window_k must be >= 1");
  if (c.window_shift < 1) errors.push_back("scan.window_shift must be >= 1");
  if (!errors.empty()) {
    std::string msg = std::to_string(errors.size()) + " problem(s) in config:";
    for (const auto& e : errors) msg += "\n  " + e;
    raise(ErrorKind::kConfig, msg);
  }
}

json RunConfig::to_json() const {
  json j = {{"theta1", theta1},
            {"theta2", theta2},
            {"horizon", horizon},
            {"grid",
             {{"s_min", s_min}, {"s_max", s_max}, {"s_step", s_step}, {"q0_min", q0_min}, {"q0_max", q0_max},
              {"q0_step", q0_step}}},
            {"banks",
             {{"dir", bank_dir}, {"size", bank_size}, {"seed", bank_seed}, {"build_missing", build_missing},
              {"skip_exhausted", skip_exhausted},
              {"max_attempts", max_attempts}}},
            {"prior_q0", prior_json(prior_q0)},
            {"mcmc",
             {{"sampler", sampler}, {"steps", mcmc.steps}, {"burn_in", mcmc.burn_in}, {"thin", mcmc.thin},
              {"s_window", mcmc.s_window}, {"sigma_q", mcmc.sigma_q}, {"prior_s", mcmc.prior_s},
              {"random_scan", mcmc.random_scan}, {"keep_q", mcmc.keep_q}}},
            {"data", data},
            {"seed", seed},
            {"level", level},
            {"threads", threads},
            {"out_dir", out_dir},
            {"simulate", {{"s_true", sim_s_true}, {"n", sim_n}, {"loci", sim_loci}}},
            {"scan", {{"window_k", window_k}, {"window_shift", window_shift}}}};
  if (sim_q0) j["simulate"]["q0"] = prior_json(*sim_q0);
  return j;
}

GridSpec make_grid(const RunConfig& c) {
  GridSpec g;
  g.s_values = arithmetic_grid(c.s_min, c.s_max, c.s_step);
  g.q0_values = arithmetic_grid(c.q0_min, c.q0_max, c.q0_step);
  g.theta = make_theta(c);
  g.horizon = c.horizon;
  g.bank_size = c.bank_size;
  g.validate();
  return g;
}

MutationRates make_theta(const RunConfig& c) { return MutationRates(c.theta1, c.theta2); }

PriorQ0 make_prior(const PriorSpec& spec, const std::vector<GridValue>& q0_grid) {
  if (spec.kind == "uniform") return PriorQ0::uniform(q0_grid);
  if (spec.kind == "weights") {
    std::vector<GridValue> support;
    for (double v : spec.support) {
      const GridValue g = GridValue::from_double(v);
      if (!std::binary_search(q0_grid.begin(), q0_grid.end(), g)) {
        raise(ErrorKind::kConfig, "prior support point " + g.to_string() + " is not on the q0 grid");
      }
      support.push_back(g);
    }
    return PriorQ0(support, spec.weights);
  }
  if (spec.kind == "frequencies") {
    std::vector<double> values = spec.values;
    if (!spec.file.empty()) {
      const auto more = read_frequency_file(spec.file);
      values.insert(values.end(), more.begin(), more.end());
    }
    return discretize_prior(values, q0_grid);
  }
  raise(ErrorKind::kConfig, "unknown prior kind '" + spec.kind + "'");
}

std::string config_hash(const RunConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : c.to_json().dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace wfsel::cli
