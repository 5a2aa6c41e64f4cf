#include "wfsel/bank.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <boost/crc.hpp>
#include <cmath>
#include <cstring>
#include <exception>
#include <nlohmann/json.hpp>
#include <thread>

#include "wfsel/error.hpp"
#include "wfsel/io.hpp"

namespace wfsel {

namespace {

constexpr char kMagic[8] = {'W', 'F', 'S', 'B', 'A', 'N', 'K', '\0'};
constexpr std::size_t kHeaderSize = 88;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}
void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u64(std::string_view in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(in[at + static_cast<std::size_t>(i)]);
  return v;
}
std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(in[at + static_cast<std::size_t>(i)]);
  return v;
}
double get_f64(std::string_view in, std::size_t at) { return std::bit_cast<double>(get_u64(in, at)); }

std::string encode_payload(const std::vector<double>& draws) {
  std::string out;
  out.reserve(draws.size() * 8);
  for (double d : draws) put_f64(out, d);
  return out;
}

std::uint32_t crc_of(std::string_view bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

std::string describe(const BankKey& key) {
  return "s=" + key.s.to_string() + " q0=" + key.q0.to_string();
}

}  // namespace

std::uint32_t crc32(std::span<const unsigned char> bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

std::uint32_t bank_checksum(const std::vector<double>& draws) { return crc_of(encode_payload(draws)); }

std::uint64_t bank_stream_id(std::uint64_t master_seed, GridValue s, GridValue q0) {
  return derive_stream(master_seed, {0x62616e6bULL, static_cast<std::uint64_t>(s.micros()),
                                     static_cast<std::uint64_t>(q0.micros())});
}

SampleBank build_bank(const BankKey& key, std::int64_t size, std::uint64_t stream_id,
                      std::shared_ptr<const NeutralKernel> kernel, const SelectionOptions& options) {
  if (size < 1) raise(ErrorKind::kDomain, "bank size must be >= 1");
  const double q0 = key.q0.value();
  if (!(q0 > 0.0 && q0 < 1.0)) raise(ErrorKind::kDomain, "bank q0 must lie in (0, 1)");
  if (!kernel) kernel = shared_kernel(key.theta);
  const SelectedSampler sampler(key.s.value(), key.theta, key.horizon, std::move(kernel), options);
  Rng rng(stream_id);
  SampleBank bank{key, {}, stream_id, 0};
  bank.draws.reserve(static_cast<std::size_t>(size));
  for (std::int64_t i = 0; i < size; ++i) {
    const ExactDrawReport r = sampler.draw(q0, rng);
    bank.draws.push_back(r.value);
    bank.attempts_total += r.attempts;
  }
  return bank;
}

std::string encode_bank(const SampleBank& bank) {
  const std::string payload = encode_payload(bank.draws);
  std::string out(kMagic, kMagic + 8);
  put_u32(out, kBankFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(kHeaderSize));
  put_f64(out, bank.key.s.value());
  put_f64(out, bank.key.theta.theta1());
  put_f64(out, bank.key.theta.theta2());
  put_f64(out, bank.key.q0.value());
  put_f64(out, bank.key.horizon);
  put_u64(out, bank.draws.size());
  put_u64(out, bank.stream_id);
  put_u64(out, static_cast<std::uint64_t>(bank.attempts_total));
  put_u32(out, crc_of(payload));
  put_u32(out, 0);
  return out + payload;
}

SampleBank decode_bank(std::string_view bytes, const std::string& origin) {
  if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    raise(ErrorKind::kChecksumMismatch, origin + ": not a bank file or header truncated");
  }
  const std::uint32_t version = get_u32(bytes, 8);
  if (version != kBankFormatVersion) {
    raise(ErrorKind::kVersionMismatch, origin + ": format version " + std::to_string(version) +
                                           ", expected " + std::to_string(kBankFormatVersion));
  }
  const std::uint64_t count = get_u64(bytes, 56);
  if (count > (bytes.size() - kHeaderSize) / 8 || bytes.size() != kHeaderSize + count * 8) {
    raise(ErrorKind::kChecksumMismatch, origin + ": payload length does not match header");
  }
  const std::string_view payload = bytes.substr(kHeaderSize);
  if (crc_of(payload) != get_u32(bytes, 80)) {
    raise(ErrorKind::kChecksumMismatch, origin + ": payload checksum mismatch");
  }
  SampleBank bank{BankKey{GridValue::from_double(get_f64(bytes, 16)), GridValue::from_double(get_f64(bytes, 40)),
                          MutationRates(get_f64(bytes, 24), get_f64(bytes, 32)), get_f64(bytes, 48)},
                  {}, get_u64(bytes, 64), static_cast<std::int64_t>(get_u64(bytes, 72))};
  bank.draws.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) bank.draws[i] = get_f64(payload, i * 8);
  return bank;
}

void persist_bank(const std::filesystem::path& path, const SampleBank& bank) {
  atomic_write(path, encode_bank(bank));
}

SampleBank load_bank(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) raise(ErrorKind::kMissingBank, path.string() + " does not exist");
  return decode_bank(read_file(path), path.string());
}

SampleBank load_bank(const std::filesystem::path& path, const BankKey& expected) {
  SampleBank bank = load_bank(path);
  if (!(bank.key == expected)) {
    raise(ErrorKind::kKeyMismatch, path.string() + " holds " + describe(bank.key) + ", expected " + describe(expected));
  }
  return bank;
}

std::string bank_file_name(GridValue s, GridValue q0) {
  return "bank_s" + s.to_string() + "_q" + q0.to_string() + ".wfb";
}

namespace {

nlohmann::json settings_json(const BankStore::Settings& st) {
  return {{"theta1", st.theta.theta1()}, {"theta2", st.theta.theta2()}, {"horizon", st.horizon},
          {"bank_size", st.bank_size}, {"master_seed", st.master_seed}};
}

BankStore::Settings settings_from_json(const nlohmann::json& j) {
  BankStore::Settings st;
  st.theta = MutationRates(j.at("theta1").get<double>(), j.at("theta2").get<double>());
  st.horizon = j.at("horizon").get<double>();
  st.bank_size = j.at("bank_size").get<std::int64_t>();
  st.master_seed = j.at("master_seed").get<std::uint64_t>();
  return st;
}

}  // namespace

BankStore::BankStore(std::filesystem::path dir, Settings settings, SelectionOptions options)
    : dir_(std::move(dir)), settings_(settings), options_(options) {
  if (settings_.bank_size < 2) raise(ErrorKind::kConfig, "bank size must be >= 2");
  if (!(settings_.horizon > 0.0)) raise(ErrorKind::kConfig, "horizon must be > 0");
  if (std::filesystem::exists(manifest_path())) {
    const BankStore existing(dir_);
    const Settings& o = existing.settings_;
    if (!(o.theta == settings_.theta) || o.horizon != settings_.horizon || o.bank_size != settings_.bank_size ||
        o.master_seed != settings_.master_seed) {
      raise(ErrorKind::kKeyMismatch, "bank store " + dir_.string() + " was built with different settings");
    }
    records_ = existing.records_;
    exhausted_ = existing.exhausted_;
  } else {
    const std::lock_guard<std::mutex> lock(mutex_);
    write_manifest_locked();
  }
}

BankStore::BankStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  const auto path = manifest_path();
  if (!std::filesystem::exists(path)) raise(ErrorKind::kMissingBank, "no bank manifest at " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
    settings_ = settings_from_json(j.at("settings"));
    for (const auto& b : j.at("banks")) {
      BankRecord r;
      r.s = GridValue::from_micros(b.at("s_micros").get<std::int64_t>());
      r.q0 = GridValue::from_micros(b.at("q0_micros").get<std::int64_t>());
      r.file = b.at("file").get<std::string>();
      r.checksum = b.at("crc32").get<std::uint32_t>();
      r.attempts_total = b.at("attempts_total").get<std::int64_t>();
      r.stream_id = b.at("stream_id").get<std::uint64_t>();
      records_[{r.s, r.q0}] = r;
    }
    for (const auto& e : j.value("exhausted", nlohmann::json::array())) {
      exhausted_[{GridValue::from_micros(e.at("s_micros").get<std::int64_t>()),
                  GridValue::from_micros(e.at("q0_micros").get<std::int64_t>())}] = {
          e.at("max_attempts").get<std::int64_t>(), e.at("message").get<std::string>()};
    }
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorKind::kParse, "bank manifest " + path.string() + ": " + e.what());
  }
  if (j.value("version", 0u) != kBankFormatVersion) {
    raise(ErrorKind::kVersionMismatch, "bank manifest " + path.string() + " has an unsupported version");
  }
}

BankKey BankStore::key(GridValue s, GridValue q0) const {
  return BankKey{s, q0, settings_.theta, settings_.horizon};
}

bool BankStore::has(GridValue s, GridValue q0) const {
  const std::lock_guard<std::mutex> lock(mutex_);
  return records_.count({s, q0}) != 0;
}

std::vector<BankRecord> BankStore::records() const {
  const std::lock_guard<std::mutex> lock(mutex_);
  std::vector<BankRecord> out;
  out.reserve(records_.size());
  for (const auto& [k, r] : records_) out.push_back(r);
  return out;
}

std::shared_ptr<const SampleBank> BankStore::get(GridValue s, GridValue q0) const {
  BankRecord record;
  {
    const std::lock_guard<std::mutex> lock(mutex_);
    if (auto it = cache_.find({s, q0}); it != cache_.end()) return it->second;
    auto it = records_.find({s, q0});
    if (it == records_.end()) {
      raise(ErrorKind::kMissingBank, "no bank for s=" + s.to_string() + " q0=" + q0.to_string() + " in " +
                                         dir_.string());
    }
    record = it->second;
  }
  auto bank = std::make_shared<const SampleBank>(load_bank(dir_ / record.file, key(s, q0)));
  if (bank_checksum(bank->draws) != record.checksum) {
    raise(ErrorKind::kChecksumMismatch, record.file + " does not match the checksum in the manifest");
  }
  if (static_cast<std::int64_t>(bank->draws.size()) != settings_.bank_size) {
    raise(ErrorKind::kKeyMismatch, record.file + " has the wrong number of draws");
  }
  const std::lock_guard<std::mutex> lock(mutex_);
  return cache_.emplace(std::make_pair(s, q0), std::move(bank)).first->second;
}

bool BankStore::exhausted(GridValue s, GridValue q0) const {
  const std::lock_guard<std::mutex> lock(mutex_);
  auto it = exhausted_.find({s, q0});
  return it != exhausted_.end() && it->second.max_attempts >= options_.max_attempts;
}

std::shared_ptr<const SampleBank> BankStore::build_one(GridValue s, GridValue q0, bool flush_manifest) {
  const BankKey k = key(s, q0);
  const std::uint64_t stream = bank_stream_id(settings_.master_seed, s, q0);
  std::shared_ptr<const SampleBank> bank;
  try {
    bank = std::make_shared<const SampleBank>(build_bank(k, settings_.bank_size, stream, nullptr, options_));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kAttemptsExhausted) throw;
    const std::lock_guard<std::mutex> lock(mutex_);
    exhausted_[{s, q0}] = {options_.max_attempts, e.what()};
    write_manifest_locked();
    throw;
  }
  BankRecord r{s, q0, bank_file_name(s, q0), bank_checksum(bank->draws), bank->attempts_total, stream};
  persist_bank(dir_ / r.file, *bank);
  const std::lock_guard<std::mutex> lock(mutex_);
  records_[{s, q0}] = r;
  cache_[{s, q0}] = bank;
  if (flush_manifest) write_manifest_locked();
  return bank;
}

std::shared_ptr<const SampleBank> BankStore::get_or_build(GridValue s, GridValue q0) {
  if (has(s, q0)) return get(s, q0);
  if (exhausted(s, q0)) {
    const std::lock_guard<std::mutex> lock(mutex_);
    raise(ErrorKind::kAttemptsExhausted, "s=" + s.to_string() + " q0=" + q0.to_string() +
                                             " exhausted its attempt budget earlier: " + exhausted_.at({s, q0}).message);
  }
  return build_one(s, q0, true);
}

double BankStore::cost_estimate(double s, double q0) {
  const double reject = s > 0.0 ? s * (1.0 - q0) : -s * q0;
  return std::exp(reject) * (1.0 + 0.1 * s * s);
}

void BankStore::build(std::vector<std::pair<GridValue, GridValue>> cells, int threads,
                      const std::function<void(const BankRecord&)>& progress) {
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
  std::erase_if(cells, [&](const auto& c) { return has(c.first, c.second); });
  std::stable_sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) {
    return cost_estimate(a.first.value(), a.second.value()) < cost_estimate(b.first.value(), b.second.value());
  });
  std::atomic<std::size_t> next{0};
  // rewriting the manifest after every bank would be quadratic in store size
  auto last_flush = std::chrono::steady_clock::now();
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      if (failed) return;
      const std::size_t i = next++;
      if (i >= cells.size()) return;
      try {
        build_one(cells[i].first, cells[i].second, false);
        {
          const std::lock_guard<std::mutex> lock(mutex_);
          const auto now = std::chrono::steady_clock::now();
          if (now - last_flush > std::chrono::seconds(5)) {
            write_manifest_locked();
            last_flush = now;
          }
        }
        if (progress) {
          BankRecord r;
          {
            const std::lock_guard<std::mutex> lock(mutex_);
            r = records_.at(cells[i]);
          }
          const std::lock_guard<std::mutex> lock(error_mutex);
          progress(r);
        }
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
        return;
      }
    }
  };
  const int n = std::max(1, threads);
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  {
    const std::lock_guard<std::mutex> lock(mutex_);
    write_manifest_locked();
  }
  if (error) std::rethrow_exception(error);
}

void BankStore::write_manifest_locked() const {
  nlohmann::json banks = nlohmann::json::array();
  std::vector<GridValue> s_values;
  std::vector<GridValue> q0_values;
  for (const auto& [k, r] : records_) {
    banks.push_back({{"s", r.s.to_string()},
                     {"q0", r.q0.to_string()},
                     {"s_micros", r.s.micros()},
                     {"q0_micros", r.q0.micros()},
                     {"file", r.file},
                     {"crc32", r.checksum},
                     {"attempts_total", r.attempts_total},
                     {"stream_id", r.stream_id}});
    s_values.push_back(r.s);
    q0_values.push_back(r.q0);
  }
  auto distinct = [](std::vector<GridValue> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    nlohmann::json out = nlohmann::json::array();
    for (GridValue g : v) out.push_back(g.to_string());
    return out;
  };
  nlohmann::json j = {{"format", "wfsel-bank-store"},
                      {"version", kBankFormatVersion},
                      {"settings", settings_json(settings_)},
                      {"grid", {{"s", distinct(s_values)}, {"q0", distinct(q0_values)}}},
                      {"banks", banks}};
  if (!exhausted_.empty()) {
    auto& out = j["exhausted"] = nlohmann::json::array();
    for (const auto& [k, e] : exhausted_) {
      out.push_back({{"s", k.first.to_string()},
                     {"q0", k.second.to_string()},
                     {"s_micros", k.first.micros()},
                     {"q0_micros", k.second.micros()},
                     {"max_attempts", e.max_attempts},
                     {"message", e.message}});
    }
  }
  atomic_write(manifest_path(), j.dump(2) + "\n");
}

}  // namespace wfsel
