#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wfsel/grid.hpp"
#include "wfsel/neutral.hpp"
#include "wfsel/selection.hpp"

namespace wfsel {

struct BankKey {
  GridValue s;
  GridValue q0;
  MutationRates theta;
  double horizon;

  friend bool operator==(const BankKey& a, const BankKey& b) {
    return a.s == b.s && a.q0 == b.q0 && a.theta == b.theta && a.horizon == b.horizon;
  }
};

struct SampleBank {
  BankKey key;
  std::vector<double> draws;
  std::uint64_t stream_id = 0;
  std::int64_t attempts_total = 0;
};

inline constexpr std::uint32_t kBankFormatVersion = 1;

std::uint32_t crc32(std::span<const unsigned char> bytes);
// CRC-32 of the little-endian payload as written to disk.
std::uint32_t bank_checksum(const std::vector<double>& draws);

std::uint64_t bank_stream_id(std::uint64_t master_seed, GridValue s, GridValue q0);

// Draws `size` exact samples of the time-horizon frequency for one grid cell.
SampleBank build_bank(const BankKey& key, std::int64_t size, std::uint64_t stream_id,
                      std::shared_ptr<const NeutralKernel> kernel = nullptr,
                      const SelectionOptions& options = {});

std::string encode_bank(const SampleBank& bank);
SampleBank decode_bank(std::string_view bytes, const std::string& origin = "bank");

void persist_bank(const std::filesystem::path& path, const SampleBank& bank);
SampleBank load_bank(const std::filesystem::path& path);
// Also throws kKeyMismatch when the file holds a different cell.
SampleBank load_bank(const std::filesystem::path& path, const BankKey& expected);

std::string bank_file_name(GridValue s, GridValue q0);

struct BankRecord {
  GridValue s;
  GridValue q0;
  std::string file;
  std::uint32_t checksum = 0;
  std::int64_t attempts_total = 0;
  std::uint64_t stream_id = 0;
};

// Directory of bank files plus manifest.json. Banks are keyed by cell, so a
// store can grow lazily; builds run cheapest cells first.
class BankStore {
 public:
  struct Settings {
    MutationRates theta = MutationRates::symmetric(1.0);
    double horizon = 0.1;
    std::int64_t bank_size = 10'000;
    std::uint64_t master_seed = 0;
  };

  // Opens the store, creating it if absent. An existing manifest with other
  // settings is a kKeyMismatch.
  BankStore(std::filesystem::path dir, Settings settings, SelectionOptions options = {});
  // Opens an existing store; kMissingBank if there is no manifest.
  explicit BankStore(std::filesystem::path dir);

  BankStore(const BankStore&) = delete;
  BankStore& operator=(const BankStore&) = delete;

  const Settings& settings() const { return settings_; }
  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path manifest_path() const { return dir_ / "manifest.json"; }

  BankKey key(GridValue s, GridValue q0) const;
  bool has(GridValue s, GridValue q0) const;
  std::vector<BankRecord> records() const;

  // Loads a listed bank; kMissingBank if it was never built.
  std::shared_ptr<const SampleBank> get(GridValue s, GridValue q0) const;
  std::shared_ptr<const SampleBank> get_or_build(GridValue s, GridValue q0);

  // Cells whose build ran out of attempts under a budget at least as large as
  // the current one. They are remembered in the manifest and not retried.
  bool exhausted(GridValue s, GridValue q0) const;

  // Builds every listed cell not yet in the store using `threads` workers.
  void build(std::vector<std::pair<GridValue, GridValue>> cells, int threads,
             const std::function<void(const BankRecord&)>& progress = {});

  // Relative cost guess used to order builds.
  static double cost_estimate(double s, double q0);

 private:
  std::shared_ptr<const SampleBank> build_one(GridValue s, GridValue q0, bool flush_manifest);
  void write_manifest_locked() const;

  std::filesystem::path dir_;
  Settings settings_;
  SelectionOptions options_;
  mutable std::mutex mutex_;
  std::map<std::pair<GridValue, GridValue>, BankRecord> records_;
  struct Exhausted {
    std::int64_t max_attempts;
    std::string message;
  };
  std::map<std::pair<GridValue, GridValue>, Exhausted> exhausted_;
  mutable std::map<std::pair<GridValue, GridValue>, std::shared_ptr<const SampleBank>> cache_;
};

}  // namespace wfsel
