#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "wfsel/error.hpp"
#include "wfsel/inference.hpp"

using namespace wfsel;
namespace wt = wfsel::testing;

namespace {

// Piecewise-constant density: bins of equal width over (0, 1), one row per s.
class BinnedDensity final : public DensityModel {
 public:
  BinnedDensity(std::vector<GridValue> s, std::vector<std::vector<double>> rows, double log_scale = 0.0)
      : s_(std::move(s)), rows_(std::move(rows)), log_scale_(log_scale) {}
  const std::vector<GridValue>& s_values() const override { return s_; }
  double log_density(double q, std::size_t i) const override {
    const auto& r = rows_[i];
    const auto b = std::min(r.size() - 1, static_cast<std::size_t>(q * static_cast<double>(r.size())));
    return std::log(r[b]) + log_scale_;
  }

 private:
  std::vector<GridValue> s_;
  std::vector<std::vector<double>> rows_;
  double log_scale_;
};

std::vector<std::vector<double>> frozen_rows(std::size_t s_count, std::size_t bins) {
  std::vector<std::vector<double>> rows(s_count, std::vector<double>(bins));
  for (std::size_t i = 0; i < s_count; ++i) {
    double tot = 0.0;
    for (std::size_t b = 0; b < bins; ++b) tot += (rows[i][b] = 1.0 + std::sin(0.7 * b + 1.3 * i) * 0.8);
    for (auto& v : rows[i]) v *= static_cast<double>(bins) / tot;
  }
  return rows;
}

}  // namespace

TEST(Likelihood, SmallExamples) {
  auto one = Dataset::with_common_n({1}, 2);
  EXPECT_NEAR(std::exp(log_likelihood(one, std::vector<double>{0.5})), 0.5, 1e-15);
  auto two = Dataset::with_common_n({3, 7}, 10);
  std::vector<double> q{0.2, 0.6};
  EXPECT_NEAR(log_likelihood(two, q), log_binomial_pmf(3, 10, 0.2) + log_binomial_pmf(7, 10, 0.6), 1e-14);
}

TEST(Likelihood, ExtendedPrecisionOracle) {
  // binomial product at 60 digits (mpmath), seed 7 instance
  auto d = Dataset::with_common_n({10, 4, 12, 20, 1, 2, 17, 3, 11, 18}, 20);
  std::vector<double> q{0.075679, 0.507138, 0.055996, 0.4363, 0.087061, 0.107084, 0.427538, 0.813778, 0.13885, 0.234309};
  EXPECT_NEAR(log_likelihood(d, q), -126.02665814634116491, 1e-10);
}

TEST(Likelihood, BoundaryConflicts) {
  auto d = Dataset::with_common_n({0, 5}, 5);
  EXPECT_TRUE(std::isfinite(log_likelihood(d, std::vector<double>{0.0, 1.0})));
  EXPECT_EQ(log_likelihood(d, std::vector<double>{0.5, 0.0}), -INFINITY);
  EXPECT_THROW(Dataset::with_common_n({6}, 5), Error);
  EXPECT_THROW(log_likelihood(d, std::vector<double>{0.5}), Error);
}

TEST(Chain, InitialState) {
  auto d = Dataset::with_common_n({0, 2000, 50}, 2000);
  auto s = arithmetic_grid(-12, 17, 0.5);
  auto st = initial_state(d, s);
  EXPECT_EQ(s[st.s_index].value(), 0.0);
  EXPECT_NEAR(st.q[0], 0.001, 1e-15);
  EXPECT_NEAR(st.q[1], 0.999, 1e-15);
  EXPECT_NEAR(st.q[2], 50.5 / 2001, 1e-15);
}

TEST(Chain, MetropolisEdges) {
  Rng r(1);
  EXPECT_TRUE(metropolis_accept(0.0, -1.0, r));
  EXPECT_FALSE(metropolis_accept(-INFINITY, -1.0, r));
  EXPECT_TRUE(metropolis_accept(-5.0, -INFINITY, r));
  EXPECT_FALSE(metropolis_accept(NAN, 0.0, r));
  int acc = 0;
  for (int i = 0; i < 100'000; ++i) acc += metropolis_accept(std::log(0.3), 0.0, r);
  EXPECT_NEAR(acc / 1e5, 0.3, 0.005);
}

TEST(Chain, RetainedCounts) {
  auto s = arithmetic_grid(-1, 1, 1);
  auto noop = [](ChainState&, Rng&, AcceptanceStats&) {};
  McmcConfig c;
  Rng r(2);
  EXPECT_EQ(run_chain({1, {0.5}}, noop, c, s, r).s.size(), 900u);
  c.steps = 37;
  c.burn_in = 0;
  c.thin = 1;
  EXPECT_EQ(run_chain({1, {0.5}}, noop, c, s, r).s.size(), 37u);
  c.burn_in = 37;
  EXPECT_THROW(run_chain({1, {0.5}}, noop, c, s, r), Error);
}

TEST(Chain, BoundaryWarning) {
  auto s = arithmetic_grid(-1, 1, 1);
  auto stay = [](ChainState&, Rng&, AcceptanceStats&) {};
  McmcConfig c;
  c.steps = 200;
  c.burn_in = 0;
  c.thin = 1;
  Rng r(3);
  EXPECT_EQ(run_chain({0, {0.5}}, stay, c, s, r).warnings.size(), 1u);
  EXPECT_TRUE(run_chain({1, {0.5}}, stay, c, s, r).warnings.empty());
}

TEST(CredibleInterval, Quantiles) {
  std::vector<double> same(10, 2.5);
  auto ci = credible_interval(same, 0.99);
  EXPECT_EQ(ci.first, 2.5);
  EXPECT_EQ(ci.second, 2.5);
  std::vector<double> g;
  for (auto v : arithmetic_grid(-12, 17, 0.5)) g.push_back(v.value());
  auto c = credible_interval(g, 0.99);
  // type 7: h = 58 * 0.005 = 0.29
  EXPECT_NEAR(c.first, -12.0 + 0.29 * 0.5, 1e-12);
  EXPECT_NEAR(c.second, 17.0 - 0.29 * 0.5, 1e-12);
  EXPECT_EQ(sample_quantile(std::vector<double>{3, 1, 2}, 0.5), 2.0);
  EXPECT_THROW(credible_interval(std::vector<double>{1.0}, 0.9), Error);
}

TEST(Mwg, FlatDensityRecoversPrior) {
  auto s = arithmetic_grid(-3, 3, 1);
  BinnedDensity flat(s, std::vector<std::vector<double>>(s.size(), std::vector<double>(4, 1.0)));
  auto d = Dataset::with_common_n({3, 8}, 10);
  McmcConfig c;
  c.steps = 200'000;
  c.burn_in = 1000;
  c.thin = 5;
  c.s_window = 2;
  c.prior_s = {0.05, 0.1, 0.2, 0.3, 0.2, 0.1, 0.05};
  Rng r(4);
  auto post = run_chain(initial_state(d, s), [&](ChainState& st, Rng& g, AcceptanceStats& a) { mwg_step(st, d, flat, c, g, a); },
                        c, s, r);
  std::vector<std::int64_t> counts(s.size(), 0);
  for (double v : post.s) ++counts[static_cast<std::size_t>(v + 3)];
  // thinning by 5 leaves some autocorrelation; compare with a loose band
  for (std::size_t i = 0; i < s.size(); ++i)
    EXPECT_NEAR(counts[i] / static_cast<double>(post.s.size()), c.prior_s[i], 0.01) << i;
}

// One locus, three s values, density frozen on 20 bins: the chain's joint
// (s, bin) occupancy must match pi(s) f(q|s) g(y|q) integrated over each bin.
TEST(Mwg, DetailedBalanceOnTinyInstance) {
  auto s = arithmetic_grid(-1, 1, 1);
  const std::size_t bins = 20;
  auto rows = frozen_rows(s.size(), bins);
  BinnedDensity model(s, rows);
  auto d = Dataset::with_common_n({4}, 10);
  McmcConfig c;
  c.prior_s = {0.5, 0.3, 0.2};
  c.sigma_q = 0.15;
  std::vector<double> target(s.size() * bins);
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t b = 0; b < bins; ++b)
      target[i * bins + b] = c.prior_s[i] * rows[i][b] *
                             wt::integrate([&](double q) { return std::exp(log_binomial_pmf(4, 10, q)); },
                                           static_cast<double>(b) / bins, static_cast<double>(b + 1) / bins);
  const double z = std::accumulate(target.begin(), target.end(), 0.0);
  for (auto& t : target) t /= z;

  ChainState st{1, {0.4}};
  Rng r(5);
  AcceptanceStats stats;
  std::vector<std::int64_t> counts(target.size(), 0);
  // every 10th state of 1e6 sweeps, so the chi-square sees roughly independent draws
  for (int i = 0; i < 1'000'000; ++i) {
    mwg_step(st, d, model, c, r, stats);
    if (i % 10 == 0) ++counts[st.s_index * bins + std::min(bins - 1, static_cast<std::size_t>(st.q[0] * bins))];
  }
  EXPECT_GT(wt::chi_square_pvalue(counts, target), 0.001);
}

TEST(Mwg, LogScaleInvariance) {
  auto s = arithmetic_grid(-2, 2, 1);
  auto rows = frozen_rows(s.size(), 20);
  BinnedDensity a(s, rows), b(s, rows, 3.0);
  auto d = Dataset::with_common_n({2, 9, 5}, 10);
  McmcConfig c;
  c.steps = 3000;
  c.burn_in = 0;
  c.thin = 1;
  c.keep_q = true;
  Rng ra(6), rb(6);
  auto pa = run_chain(initial_state(d, s), [&](ChainState& st, Rng& g, AcceptanceStats& x) { mwg_step(st, d, a, c, g, x); },
                      c, s, ra);
  auto pb = run_chain(initial_state(d, s), [&](ChainState& st, Rng& g, AcceptanceStats& x) { mwg_step(st, d, b, c, g, x); },
                      c, s, rb);
  EXPECT_EQ(pa.s, pb.s);
  EXPECT_EQ(pa.q, pb.q);
}

TEST(Mwg, ProposalSymmetryBetweenNeighbours) {
  // flat target with uniform prior on a wide grid: i -> j and j -> i moves occur equally often
  auto s = arithmetic_grid(-10, 10, 1);
  BinnedDensity flat(s, std::vector<std::vector<double>>(s.size(), std::vector<double>(1, 1.0)));
  auto d = Dataset::with_common_n({1}, 2);
  McmcConfig c;
  ChainState st{10, {0.5}};
  Rng r(7);
  AcceptanceStats stats;
  std::int64_t up = 0, down = 0;
  for (int i = 0; i < 400'000; ++i) {
    const auto before = st.s_index;
    mwg_step(st, d, flat, c, r, stats);
    if (before == 8 && st.s_index == 11) ++up;
    if (before == 11 && st.s_index == 8) ++down;
  }
  EXPECT_GT(up, 1000);
  EXPECT_NEAR(static_cast<double>(up), static_cast<double>(down), 4 * std::sqrt(static_cast<double>(up + down)));
  // from the centre every proposal is a different, in-grid point and is accepted
  for (int i = 0; i < 1000; ++i) {
    st.s_index = 10;
    mwg_step(st, d, flat, c, r, stats);
    EXPECT_NE(st.s_index, 10u);
  }
}

TEST(Mwg, OutOfGridProposalsAreRejected) {
  auto s = arithmetic_grid(-1, 1, 1);
  BinnedDensity flat(s, std::vector<std::vector<double>>(s.size(), std::vector<double>(1, 1.0)));
  auto d = Dataset::with_common_n({1}, 2);
  McmcConfig c;  // window 5, so 8 of 10 proposals from the edge fall off the grid
  Rng r(8);
  AcceptanceStats stats;
  ChainState st{0, {0.5}};
  std::int64_t stays = 0;
  const int n = 100'000;
  for (int i = 0; i < n; ++i) {
    st.s_index = 0;
    mwg_step(st, d, flat, c, r, stats);
    stays += st.s_index == 0;
  }
  EXPECT_NEAR(stays / static_cast<double>(n), 0.8, 0.01);
}

TEST(ExactImh, PriorDrawsAndPosterior) {
  // n = 1, y = 1: the s posterior is pi(s) E_s[Q], with E_s[Q] from exact draws
  const auto theta = MutationRates::symmetric(0.00014);
  auto s = arithmetic_grid(-4, 4, 4);
  PriorQ0 pq(arithmetic_grid(0.3, 0.5, 0.2), {0.5, 0.5});
  std::vector<double> ps{0.2, 0.5, 0.3};
  ExactModel model(s, ps, pq, theta, 0.1);

  std::vector<double> post(3);
  Rng r0(9);
  for (std::size_t i = 0; i < 3; ++i) {
    double acc = 0.0;
    const int n = 100'000;
    for (int j = 0; j < n; ++j) acc += model.sampler(i).draw(model.draw_q0(r0).value(), r0).value;
    post[i] = ps[i] * acc / n;
  }
  const double z = post[0] + post[1] + post[2];
  for (auto& p : post) p /= z;

  auto d = Dataset::with_common_n({1}, 1);
  McmcConfig c;
  c.steps = 101'000;
  c.burn_in = 1000;
  c.thin = 10;
  Rng r(10);
  auto res = run_chain(initial_state(d, s), [&](ChainState& st, Rng& g, AcceptanceStats& a) { exact_imh_step(st, d, model, g, a); },
                       c, s, r);
  std::vector<std::int64_t> counts(3, 0);
  for (double v : res.s) ++counts[static_cast<std::size_t>((v + 4) / 4)];
  EXPECT_GT(wt::chi_square_pvalue(counts, post), 0.001);
}

TEST(ExactImh, IdenticalProposalAlwaysAccepted) {
  Rng r(11);
  const double l = std::log(0.2);
  for (int i = 0; i < 1000; ++i) EXPECT_TRUE(metropolis_accept(l, l, r));
}
