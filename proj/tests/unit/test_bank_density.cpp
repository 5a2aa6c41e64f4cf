#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "wfsel/bank.hpp"
#include "wfsel/density.hpp"
#include "wfsel/error.hpp"
#include "wfsel/io.hpp"
#include "wfsel/kde.hpp"

using namespace wfsel;
namespace wt = wfsel::testing;
namespace fs = std::filesystem;

namespace {

const MutationRates kTheta = MutationRates::symmetric(0.00014);

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("wfsel_" + name);
  fs::remove_all(p);
  return p;
}

BankKey key(double s, double q0) {
  return {GridValue::from_double(s), GridValue::from_double(q0), kTheta, 0.1};
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kDomain;
}

}  // namespace

TEST(Scott, Formula) {
  std::vector<double> x(10'000);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = (i % 2) ? 1.0 : -1.0;
  // sample sd of +-1 with n-1 is sqrt(n/(n-1))
  const double sd = std::sqrt(10'000.0 / 9'999.0);
  EXPECT_NEAR(scott_bandwidth(x), sd * std::pow(10'000.0, -0.2), 1e-15);
  EXPECT_NEAR(std::pow(10'000.0, -0.2), 0.158489, 1e-6);
}

TEST(Scott, Degenerate) {
  std::vector<double> one{0.5};
  EXPECT_EQ(kind_of([&] { scott_bandwidth(one); }), ErrorKind::kDegenerateBank);
  std::vector<double> same(10, 0.3);
  EXPECT_EQ(kind_of([&] { scott_bandwidth(same); }), ErrorKind::kDegenerateBank);
}

TEST(Kde, GaussianPeak) {
  std::vector<double> one{0.5};
  EXPECT_NEAR(kde_eval(0.5, one, 1.0), 1.0 / std::sqrt(2 * std::numbers::pi), 1e-15);
}

TEST(Kde, IntegratesToOne) {
  Rng r(1);
  std::vector<double> x(500);
  for (auto& v : x) v = r.beta(0.5, 2.0);
  const double h = scott_bandwidth(x);
  const double area = wt::integrate([&](double q) { return kde_eval(q, x, h); }, -2.0, 3.0);
  EXPECT_NEAR(area, 1.0, 1e-6);
  const double refl = wt::integrate([&](double q) { return kde_eval_reflected(q, x, h); }, 0.0, 1.0);
  EXPECT_NEAR(refl, 1.0, 1e-6);
}

TEST(Kde, WindowedMatchesDirect) {
  Rng r(2);
  std::vector<double> x(2000);
  for (auto& v : x) v = r.beta(0.3, 0.3);
  Kde k = Kde::scott(x);
  Kde kr = Kde::scott(x, true);
  for (double q = -0.1; q <= 1.1; q += 0.0137) {
    EXPECT_NEAR(k(q), kde_eval(q, x, k.bandwidth()), 1e-12 * std::max(1.0, k(q)));
    EXPECT_NEAR(kr(q), kde_eval_reflected(q, x, kr.bandwidth()), 1e-12 * std::max(1.0, kr(q)));
  }
  std::vector<double> grid(101, 0.0);
  k.accumulate_on_grid(grid, 0.5);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(grid[i], 0.5 * k(i / 100.0), 1e-12);
}

TEST(Kde, NeutralBankAgainstTruncatedSeries) {
  const MutationRates th = MutationRates::symmetric(1.0);
  const int m = 10'000;
  Rng r(3);
  std::vector<double> x(m);
  for (auto& v : x) v = sample_neutral({0.5, 1.0}, th, r);
  Kde k = Kde::scott(x);
  double worst = 0.0;
  for (int i = 1; i <= 50; ++i) {
    // stay a few bandwidths inside: no boundary correction
    const double q = 0.1 + 0.8 * (i - 1) / 49.0;
    worst = std::max(worst, std::abs(k(q) - neutral_pdf(q, {0.5, 1.0}, th)));
  }
  EXPECT_LT(worst, 5 * std::pow(m, -0.4));
}

TEST(Bank, BuildDeterministicAndBitwiseBandwidth) {
  auto a = build_bank(key(0.0, 0.5), 2000, 77);
  auto b = build_bank(key(0.0, 0.5), 2000, 77);
  EXPECT_EQ(a.draws, b.draws);
  EXPECT_EQ(a.attempts_total, 2000);
  auto c = build_bank(key(0.0, 0.5), 2000, 78);
  EXPECT_NE(a.draws, c.draws);
  for (double v : a.draws) {
    ASSERT_GE(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
  auto dir = scratch("bank_h");
  persist_bank(dir / "b.wfb", a);
  auto back = load_bank(dir / "b.wfb");
  EXPECT_EQ(scott_bandwidth(back.draws), scott_bandwidth(a.draws));
  fs::remove_all(dir);
}

TEST(Bank, NeutralCellMatchesNeutralSampler) {
  auto bank = build_bank(key(0.0, 0.3), 20'000, 5);
  Rng r(6);
  std::vector<double> neu(20'000);
  for (auto& v : neu) v = sample_neutral({0.3, 0.1}, kTheta, r);
  EXPECT_LT(wt::ks_two_sample(bank.draws, neu), 1.95 * std::sqrt(2.0 / 20'000));
}

TEST(Bank, EncodeDecodeRoundTrip) {
  auto bank = build_bank(key(1.5, 0.2), 300, 9);
  auto bytes = encode_bank(bank);
  EXPECT_EQ(bytes.size(), 88u + 300 * 8);
  auto back = decode_bank(bytes);
  EXPECT_EQ(back.key, bank.key);
  EXPECT_EQ(back.draws, bank.draws);
  EXPECT_EQ(back.stream_id, bank.stream_id);
  EXPECT_EQ(back.attempts_total, bank.attempts_total);
}

TEST(Bank, CorruptionIsDetected) {
  auto bank = build_bank(key(0.5, 0.4), 200, 10);
  auto bytes = encode_bank(bank);
  EXPECT_EQ(kind_of([&] { decode_bank(bytes.substr(0, bytes.size() - 3)); }), ErrorKind::kChecksumMismatch);
  EXPECT_EQ(kind_of([&] { decode_bank(bytes.substr(0, 40)); }), ErrorKind::kChecksumMismatch);
  auto flipped = bytes;
  flipped[200] ^= 0x01;
  EXPECT_EQ(kind_of([&] { decode_bank(flipped); }), ErrorKind::kChecksumMismatch);
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_EQ(kind_of([&] { decode_bank(magic); }), ErrorKind::kChecksumMismatch);
  auto version = bytes;
  version[8] = 9;
  EXPECT_EQ(kind_of([&] { decode_bank(version); }), ErrorKind::kVersionMismatch);
}

TEST(Bank, TruncatedFileAndKeyMismatch) {
  auto dir = scratch("bank_files");
  auto bank = build_bank(key(-1.0, 0.6), 100, 11);
  persist_bank(dir / "a.wfb", bank);
  EXPECT_EQ(load_bank(dir / "a.wfb", bank.key).draws, bank.draws);
  EXPECT_EQ(kind_of([&] { load_bank(dir / "a.wfb", key(-1.0, 0.7)); }), ErrorKind::kKeyMismatch);
  auto bytes = read_file(dir / "a.wfb");
  atomic_write(dir / "a.wfb", bytes.substr(0, bytes.size() / 2));
  EXPECT_EQ(kind_of([&] { load_bank(dir / "a.wfb"); }), ErrorKind::kChecksumMismatch);
  EXPECT_EQ(kind_of([&] { load_bank(dir / "none.wfb"); }), ErrorKind::kMissingBank);
  fs::remove_all(dir);
}

TEST(Crc32, KnownVector) {
  const std::string s = "123456789";
  EXPECT_EQ(crc32({reinterpret_cast<const unsigned char*>(s.data()), s.size()}), 0xCBF43926u);
}

TEST(BankStore, LazyBuildPersistAndReopen) {
  auto dir = scratch("store");
  BankStore::Settings st{kTheta, 0.1, 200, 1234};
  const auto s0 = GridValue::from_double(0.0), s1 = GridValue::from_double(1.0);
  const auto q = GridValue::from_double(0.3);
  std::vector<double> first;
  {
    BankStore store(dir, st);
    EXPECT_FALSE(store.has(s0, q));
    EXPECT_EQ(kind_of([&] { store.get(s0, q); }), ErrorKind::kMissingBank);
    first = store.get_or_build(s0, q)->draws;
    store.build({{s1, q}, {s0, q}}, 2);
    EXPECT_EQ(store.records().size(), 2u);
  }
  BankStore again(dir);
  EXPECT_EQ(again.settings().bank_size, 200);
  EXPECT_EQ(again.get(s0, q)->draws, first);
  EXPECT_EQ(again.get(s0, q)->stream_id, bank_stream_id(1234, s0, q));

  BankStore::Settings other = st;
  other.master_seed = 99;
  EXPECT_EQ(kind_of([&] { BankStore(dir, other); }), ErrorKind::kKeyMismatch);

  // bank file edited behind the manifest's back
  auto file = dir / bank_file_name(s1, q);
  auto bank = load_bank(file);
  bank.draws[0] = 0.123;
  persist_bank(file, bank);
  BankStore third(dir);
  EXPECT_EQ(kind_of([&] { third.get(s1, q); }), ErrorKind::kChecksumMismatch);

  EXPECT_EQ(kind_of([&] { BankStore(dir / "nothing"); }), ErrorKind::kMissingBank);
  fs::remove_all(dir);
}

TEST(BankStore, ExhaustedCellIsRememberedPerBudget) {
  auto dir = scratch("store_exhausted");
  BankStore::Settings st{kTheta, 0.1, 50, 5};
  SelectionOptions tight;
  tight.max_attempts = 2;
  const auto s = GridValue::from_double(9.0), q = GridValue::from_double(0.1);
  {
    BankStore store(dir, st, tight);
    EXPECT_EQ(kind_of([&] { store.get_or_build(s, q); }), ErrorKind::kAttemptsExhausted);
    EXPECT_TRUE(store.exhausted(s, q));
    EXPECT_FALSE(store.has(s, q));
    EXPECT_FALSE(fs::exists(dir / bank_file_name(s, q)));
  }
  BankStore reopened(dir, st, tight);
  EXPECT_TRUE(reopened.exhausted(s, q));
  EXPECT_EQ(kind_of([&] { reopened.get_or_build(s, q); }), ErrorKind::kAttemptsExhausted);
  // a larger budget retries the cell
  SelectionOptions wider;
  wider.max_attempts = 100;
  EXPECT_FALSE(BankStore(dir, st, wider).exhausted(s, q));
  fs::remove_all(dir);
}

TEST(TabulatedDensity, ExhaustedRowsAreSkippedOnlyWhenAsked) {
  auto dir = scratch("store_skip");
  SelectionOptions tight;
  tight.max_attempts = 2;
  BankStore store(dir, {kTheta, 0.1, 50, 5}, tight);
  const auto s_values = arithmetic_grid(0, 9, 9);
  const PriorQ0 prior({GridValue::from_double(0.1)}, {1.0});

  auto strict = TabulatedDensityModel::from_store(s_values, prior, store, true);
  EXPECT_EQ(kind_of([&] { strict->log_density(0.5, 1); }), ErrorKind::kAttemptsExhausted);

  TabulationOptions skip;
  skip.skip_exhausted_rows = true;
  auto lenient = TabulatedDensityModel::from_store(s_values, prior, store, true, skip);
  EXPECT_TRUE(lenient->excluded_rows().empty());
  EXPECT_EQ(lenient->density(0.5, 1), 0.0);
  EXPECT_EQ(lenient->log_density(0.5, 1), -std::numeric_limits<double>::infinity());
  EXPECT_GT(lenient->density(0.12, 0), 0.0);
  ASSERT_EQ(lenient->excluded_rows().size(), 1u);
  EXPECT_EQ(lenient->excluded_rows()[0], s_values[1]);
  fs::remove_all(dir);
}

TEST(BankStore, CheapestCellsFirst) {
  EXPECT_LT(BankStore::cost_estimate(0.0, 0.5), BankStore::cost_estimate(5.5, 0.5));
  EXPECT_LT(BankStore::cost_estimate(5.5, 0.3), BankStore::cost_estimate(11.0, 0.3));
}

namespace {

std::shared_ptr<const DensityGrid> small_grid(std::vector<double> s_list, std::vector<double> q_list, int size) {
  std::vector<std::shared_ptr<const SampleBank>> banks;
  std::uint64_t id = 100;
  for (double s : s_list)
    for (double q : q_list) banks.push_back(std::make_shared<SampleBank>(build_bank(key(s, q), size, ++id)));
  return std::make_shared<DensityGrid>(banks);
}

}  // namespace

TEST(MarginalDensity, PointMassAndLinearity) {
  auto grid = small_grid({0.0, 1.0}, {0.2, 0.5, 0.8}, 400);
  const auto s = GridValue::from_double(1.0);
  const auto a = GridValue::from_double(0.2), b = GridValue::from_double(0.8), c = GridValue::from_double(0.5);
  PriorQ0 point({a}, {1.0});
  PriorQ0 half({a, b}, {0.5, 0.5});
  PriorQ0 mix({a, c, b}, {0.2, 0.3, 0.5});
  for (double q : {0.05, 0.2, 0.51, 0.9}) {
    const auto& ka = grid->at(s, a);
    EXPECT_EQ(marginal_density(q, s, point, *grid), kde_eval(q, ka.sorted(), ka.bandwidth()));
    EXPECT_NEAR(marginal_density(q, s, half, *grid), 0.5 * (grid->at(s, a)(q) + grid->at(s, b)(q)), 1e-14);
    const double sup = 0.2 * marginal_density(q, s, PriorQ0({a}, {1.0}), *grid) +
                       0.3 * marginal_density(q, s, PriorQ0({c}, {1.0}), *grid) +
                       0.5 * marginal_density(q, s, PriorQ0({b}, {1.0}), *grid);
    EXPECT_NEAR(marginal_density(q, s, mix, *grid), sup, 1e-13);
  }
  EXPECT_EQ(kind_of([&] { marginal_density(0.5, GridValue::from_double(2.0), point, *grid); }),
            ErrorKind::kMissingBank);
}

TEST(MarginalDensity, BruteForceOverFullSupport) {
  // 99-point prior, independent summation in long double
  auto q_grid = arithmetic_grid(0.01, 0.99, 0.01);
  std::vector<double> qs;
  for (auto g : q_grid) qs.push_back(g.value());
  auto grid = small_grid({0.0}, qs, 50);
  std::vector<double> w(99);
  double tot = 0.0;
  for (int i = 0; i < 99; ++i) tot += (w[i] = 1.0 + (i % 7));
  for (auto& v : w) v /= tot;
  PriorQ0 prior(q_grid, w);
  for (double q : {0.013, 0.25, 0.5, 0.97}) {
    long double acc = 0.0L;
    for (int i = 0; i < 99; ++i) {
      const auto& kde = grid->at(GridValue{}, q_grid[i]);
      long double f = 0.0L;
      for (double d : kde.sorted()) {
        const long double z = (static_cast<long double>(q) - d) / kde.bandwidth();
        f += std::exp(-0.5L * z * z);
      }
      f /= kde.sorted().size() * kde.bandwidth() * std::sqrt(2.0L * std::numbers::pi_v<long double>);
      acc += static_cast<long double>(w[i]) * f;
    }
    EXPECT_NEAR(marginal_density(q, GridValue{}, prior, *grid), static_cast<double>(acc), 1e-12 * static_cast<double>(acc));
  }
}

TEST(TabulatedDensity, CloseToExactAndFloorsAtZero) {
  auto grid = small_grid({-1.0, 0.0, 1.0}, {0.3, 0.6}, 1000);
  auto s_values = arithmetic_grid(-1, 1, 1);
  PriorQ0 prior(arithmetic_grid(0.3, 0.6, 0.3), {0.4, 0.6});
  auto tab = TabulatedDensityModel::from_grid(s_values, prior, grid);
  ExactDensityModel exact(s_values, prior, grid);
  tab->materialize(2);
  for (std::size_t i = 0; i < 3; ++i) {
    for (double q = 0.01; q < 1.0; q += 0.0123) {
      const double e = std::exp(exact.log_density(q, i));
      EXPECT_NEAR(tab->density(q, i), e, 2e-3 * std::max(1.0, e)) << i << " " << q;
    }
  }
  EXPECT_EQ(exact.s_values().size(), 3u);
}

TEST(DensityModel, MissingCellsSurfaceAsMissingBank) {
  auto dir = scratch("store_missing");
  BankStore store(dir, {kTheta, 0.1, 100, 1});
  auto s_values = arithmetic_grid(0, 1, 1);
  PriorQ0 prior({GridValue::from_double(0.5)}, {1.0});
  auto lazy = TabulatedDensityModel::from_store(s_values, prior, store, false);
  EXPECT_EQ(kind_of([&] { lazy->log_density(0.5, 1); }), ErrorKind::kMissingBank);
  auto build = TabulatedDensityModel::from_store(s_values, prior, store, true);
  EXPECT_TRUE(std::isfinite(build->log_density(0.5, 1)));
  EXPECT_TRUE(store.has(GridValue::from_double(1), GridValue::from_double(0.5)));
  fs::remove_all(dir);
}

// Integrated squared error against the truncated series shrinks with M. The
// mutation rates make the density vanish at 0 and 1, so the uncorrected
// kernel has no boundary bias.
TEST(Kde, IntegratedErrorFallsWithBankSize) {
  const MutationRates th = MutationRates::symmetric(3.0);
  const NeutralTransition tr{0.5, 1.0};
  std::vector<double> grid(201), truth(201);
  for (int i = 0; i <= 200; ++i) {
    grid[i] = 0.0025 + 0.995 * i / 200.0;
    truth[i] = neutral_pdf(grid[i], tr, th);
  }
  auto ise = [&](int m, std::uint64_t seed) {
    Rng r(seed);
    std::vector<double> x(m);
    for (auto& v : x) v = sample_neutral(tr, th, r);
    Kde k = Kde::scott(x);
    double acc = 0.0;
    for (int i = 0; i <= 200; ++i) acc += std::pow(k(grid[i]) - truth[i], 2);
    return acc * 0.995 / 200.0;
  };
  double small = 0.0, large = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    small += ise(100, seed);
    large += ise(3000, 100 + seed);
  }
  EXPECT_GT(small / large, 5.0);
}
