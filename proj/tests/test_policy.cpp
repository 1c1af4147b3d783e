#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "lkb/error.hpp"
#include "lkb/graph.hpp"
#include "lkb/policy.hpp"
#include "lkb/schedule.hpp"

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using lkb::Prediction;

MatrixXd unit_pool(int m, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  MatrixXd x(m, d);
  for (int i = 0; i < m; ++i) {
    for (int k = 0; k < d; ++k) x(i, k) = normal(rng);
    x.row(i).normalize();
  }
  return x;
}

// Scripted stream: users, candidate sets and rewards from a fixed seed.
struct Script {
  std::vector<int> users;
  std::vector<std::vector<int>> candidates;
  std::vector<double> rewards;  // reward table users x arms, flattened
  int arms = 0;
};

Script make_script(int users, int arms, int per_round, int rounds, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick_user(0, users - 1);
  std::normal_distribution<double> normal;
  Script s;
  s.arms = arms;
  for (int i = 0; i < users * arms; ++i) s.rewards.push_back(normal(rng));
  std::vector<int> deck(static_cast<std::size_t>(arms));
  for (int t = 0; t < rounds; ++t) {
    s.users.push_back(pick_user(rng));
    std::iota(deck.begin(), deck.end(), 0);
    std::shuffle(deck.begin(), deck.end(), rng);
    s.candidates.emplace_back(deck.begin(), deck.begin() + per_round);
  }
  return s;
}

std::vector<int> play(lkb::Policy& p, const Script& s) {
  std::vector<int> arms;
  for (std::size_t t = 0; t < s.users.size(); ++t) {
    const lkb::RoundView view{static_cast<int>(t), s.users[t], s.candidates[t]};
    const std::size_t c = p.select(view);
    EXPECT_LT(c, s.candidates[t].size());
    const int arm = s.candidates[t][c];
    arms.push_back(arm);
    p.learn(view, c, s.rewards[static_cast<std::size_t>(s.users[t] * s.arms + arm)]);
  }
  return arms;
}

lkb::GridKernel grid_for(const MatrixXd& pool, MatrixXd user_kernel) {
  return lkb::GridKernel(
      lkb::MultiUserKernel(lkb::BaseKernel::squared_exponential(1.0), std::move(user_kernel)), pool);
}

lkb::Exploration tuned(double scale) {
  lkb::Exploration e;
  e.scale = scale;
  return e;
}

lkb::RidgeSchedule fixed_ridge(double lambda) {
  lkb::RidgeSchedule r;
  r.enabled = false;
  r.lambda_base = lambda;
  return r;
}

TEST(Argmax, LowestIndexWinsTies) {
  const std::vector<double> s{1.0, 3.0, 3.0, 2.0};
  EXPECT_EQ(lkb::argmax_lowest(s), 1u);
  EXPECT_THROW(lkb::argmax_lowest(std::vector<double>{}), lkb::ProtocolError);
}

TEST(SelectUcb, HandBuiltState) {
  const std::vector<Prediction> p{{1.0, 0.01, 0.1}, {0.5, 1.0, 1.0}, {0.0, 0.0, 0.0}};
  EXPECT_EQ(lkb::select_ucb(p, 1.0), 1u);
  EXPECT_EQ(lkb::select_ucb(p, 0.0), 0u);
  const std::vector<Prediction> prior(4, Prediction{0.0, 1.0, 1.0});
  EXPECT_EQ(lkb::select_ucb(prior, 2.0), 0u);
  EXPECT_THROW(lkb::select_ucb(std::vector<Prediction>{}, 1.0), lkb::ProtocolError);
}

TEST(SelectUcb, ShiftInvariant) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<Prediction> p, shifted;
    for (int i = 0; i < 6; ++i) {
      const double sd = std::abs(normal(rng));
      p.push_back({normal(rng), sd * sd, sd});
      shifted.push_back({p.back().mean + 3.0, sd * sd, sd});
    }
    EXPECT_EQ(lkb::select_ucb(p, 1.5), lkb::select_ucb(shifted, 1.5));
  }
}

TEST(SelectTs, ZeroNuOrZeroSigmaIsGreedy) {
  const std::vector<Prediction> p{{0.2, 1.0, 1.0}, {0.9, 1.0, 1.0}, {0.5, 1.0, 1.0}};
  lkb::Rng rng(3);
  EXPECT_EQ(lkb::select_ts(p, 0.0, rng), 1u);
  const std::vector<Prediction> flat{{0.2, 0.0, 0.0}, {0.9, 0.0, 0.0}, {0.5, 0.0, 0.0}};
  for (int i = 0; i < 20; ++i) EXPECT_EQ(lkb::select_ts(flat, 5.0, rng), 1u);
}

TEST(SelectTs, MatchesScriptedNormalReplay) {
  const std::vector<Prediction> p{{0.1, 0.25, 0.5}, {0.0, 1.0, 1.0}, {0.3, 0.04, 0.2}};
  lkb::Rng rng(77);
  lkb::Rng replay(77);
  for (int round = 0; round < 30; ++round) {
    std::normal_distribution<double> normal;
    double best = -1e300;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double score = p[i].mean + 2.0 * normal(replay) * p[i].sigma;
      if (score > best) {
        best = score;
        arg = i;
      }
    }
    EXPECT_EQ(lkb::select_ts(p, 2.0, rng), arg);
  }
}

TEST(TheoreticalBeta, ClosedForms) {
  lkb::ConfidenceParams cp;
  cp.b_rho = 1.0;
  cp.delta = 1.0;
  cp.sigma_sub = 0.3;
  EXPECT_DOUBLE_EQ(lkb::theoretical_beta(cp, 0.1, 0.0), 1.0);
  cp.b_rho = 0.0;
  cp.delta = std::exp(-0.5);
  cp.sigma_sub = 1.0;
  EXPECT_NEAR(lkb::theoretical_beta(cp, 1.0, 0.0), 1.0, 1e-15);
  cp.delta = 0.0;
  EXPECT_THROW(lkb::theoretical_beta(cp, 1.0, 0.0), lkb::ParameterError);
}

TEST(TheoreticalBeta, TracksDenseLogDetAndNeverDecreases) {
  const MatrixXd pool = unit_pool(6, 3, 2);
  const lkb::LaplacianSpectrum spec(lkb::gen_erdos_renyi(4, 0.5, 2), 0.5);
  lkb::Exploration e;
  e.mode = lkb::ExplorationMode::theoretical;
  e.confidence = {1.0, 0.2, 0.1};
  lkb::KernelPolicy p("lk", grid_for(pool, spec.inv_reg()), lkb::DecisionRule::ucb, e,
                      fixed_ridge(0.1), 1);
  const Script s = make_script(4, 6, 3, 20, 4);
  double prev = p.current_scale();
  std::vector<std::pair<int, int>> seen;
  for (std::size_t t = 0; t < 20; ++t) {
    const lkb::RoundView view{static_cast<int>(t), s.users[t], s.candidates[t]};
    const std::size_t c = p.select(view);
    seen.emplace_back(s.candidates[t][c], s.users[t]);
    p.learn(view, c, 0.5);
    EXPECT_GE(p.current_scale(), prev);
    prev = p.current_scale();
  }
  MatrixXd kt(20, 20);
  const lkb::GridKernel& k = p.posterior().kernel();
  for (int a = 0; a < 20; ++a) {
    for (int b = 0; b < 20; ++b) {
      kt(a, b) = k({seen[a].first, seen[a].second}, {seen[b].first, seen[b].second});
    }
  }
  const double logdet = std::log((MatrixXd::Identity(20, 20) + kt / 0.1).determinant());
  const double expected = 1.0 + std::sqrt(0.04 / 0.1 * (2.0 * std::log(10.0) + logdet));
  EXPECT_NEAR(p.current_scale(), expected, 1e-8);
}

TEST(LambdaSchedule, Values) {
  EXPECT_DOUBLE_EQ(lkb::lambda_schedule(0.05, 1.0, 1000, 0), 0.05);
  EXPECT_DOUBLE_EQ(lkb::lambda_schedule(1.0, 1.0, 1000, 0), 0.1);
  EXPECT_DOUBLE_EQ(lkb::lambda_schedule(1e-9, 1.0, 1000, 0), 1e-6);
  EXPECT_DOUBLE_EQ(lkb::lambda_schedule(0.05, 1.0, 1000, 1000), 0.025);
  EXPECT_NEAR(lkb::lambda_schedule(0.05, 1.0 / 3.0, 3000, 600), 0.05 / 3.0 * 3000.0 / 3600.0,
              1e-17);
  EXPECT_NEAR(lkb::lambda_schedule(0.05, 1.0 / 3.0, 3000, 600), 0.0138888888888889, 1e-15);
}

TEST(LambdaSchedule, EpochBoundaries) {
  for (const int t : {200, 400, 800, 1600, 3200, 6400}) EXPECT_TRUE(lkb::is_epoch_boundary(t));
  for (const int t : {0, 1, 199, 201, 600, 1000, 1200, 2400}) EXPECT_FALSE(lkb::is_epoch_boundary(t));
}

TEST(LambdaSchedule, AppliesOnlyLargeChangesAtBoundaries) {
  lkb::LambdaScheduler s(0.05, 1.0, 1000);
  EXPECT_DOUBLE_EQ(s.initial(), 0.05);
  std::vector<int> applied;
  for (int t = 0; t <= 1000; ++t) {
    if (const auto l = s.on_round(t)) {
      applied.push_back(t);
      EXPECT_DOUBLE_EQ(*l, lkb::lambda_schedule(0.05, 1.0, 1000, t));
    }
  }
  // t=200 is a 16.7% drop (skipped); t=400 is 28.6%, t=800 is 22.2%.
  EXPECT_EQ(applied, (std::vector<int>{400, 800}));
}

TEST(KernelPolicy, ScheduleTriggersRebuild) {
  const MatrixXd pool = unit_pool(5, 3, 1);
  lkb::RidgeSchedule r;
  r.lambda_base = 0.05;
  r.s_spec = 1.0;
  r.horizon = 500;
  lkb::KernelPolicy p("lk", grid_for(pool, MatrixXd::Identity(2, 2)), lkb::DecisionRule::ucb,
                      tuned(1.0), r, 1);
  EXPECT_DOUBLE_EQ(p.posterior().lambda(), 0.05);
  const Script s = make_script(2, 5, 3, 401, 2);
  play(p, s);
  EXPECT_DOUBLE_EQ(p.posterior().lambda(), lkb::lambda_schedule(0.05, 1.0, 500, 400));
  EXPECT_EQ(p.rebuild_count(), 2);
}

TEST(KernelPolicy, GpUcbEqualsLaplacianOnEdgelessGraph) {
  const MatrixXd pool = unit_pool(8, 3, 5);
  const lkb::LaplacianSpectrum spec(lkb::UserGraph::empty(4), 1.0);
  lkb::KernelPolicy lk("lk", grid_for(pool, spec.inv_reg()), lkb::DecisionRule::ucb, tuned(1.0),
                       fixed_ridge(0.1), 1);
  lkb::KernelPolicy gp("gp", grid_for(pool, MatrixXd::Identity(4, 4)), lkb::DecisionRule::ucb,
                       tuned(1.0), fixed_ridge(0.1), 1);
  const Script s = make_script(4, 8, 4, 80, 6);
  EXPECT_EQ(play(lk, s), play(gp, s));
}

TEST(KernelPolicy, CoopLaplacianInverseEqualsLk) {
  const MatrixXd pool = unit_pool(8, 3, 7);
  const auto spectrum =
      std::make_shared<const lkb::LaplacianSpectrum>(lkb::gen_erdos_renyi(5, 0.4, 7), 0.1);
  lkb::AgentKernel a;
  a.kind = lkb::AgentKernel::Kind::laplacian_inv;
  a.rho = 0.1;
  lkb::KernelPolicy lk("lk", grid_for(pool, spectrum->inv_reg()), lkb::DecisionRule::ucb,
                       tuned(2.0), fixed_ridge(0.05), 1);
  lkb::KernelPolicy coop("coop", grid_for(pool, lkb::agent_kernel_matrix(a, *spectrum)),
                         lkb::DecisionRule::ucb, tuned(2.0), fixed_ridge(0.05), 1, std::nullopt,
                         lkb::AgentRefresh{a, spectrum, 3});
  const Script s = make_script(5, 8, 4, 60, 8);
  EXPECT_EQ(play(lk, s), play(coop, s));
}

TEST(KernelPolicy, CoopHeatAtZeroFactorizesPerUser) {
  const MatrixXd pool = unit_pool(6, 3, 9);
  const lkb::LaplacianSpectrum spec(lkb::gen_erdos_renyi(3, 0.7, 9), 0.1);
  lkb::AgentKernel a;
  a.kind = lkb::AgentKernel::Kind::heat;
  a.tau = 0.0;
  lkb::KernelPolicy coop("coop", grid_for(pool, lkb::agent_kernel_matrix(a, spec)),
                         lkb::DecisionRule::ucb, tuned(1.0), fixed_ridge(0.1), 1);
  // Independent single-user GP-UCB per user on the same sub-streams.
  std::vector<std::unique_ptr<lkb::KernelPolicy>> singles;
  for (int u = 0; u < 3; ++u) {
    singles.push_back(std::make_unique<lkb::KernelPolicy>(
        "single", grid_for(pool, MatrixXd::Identity(1, 1)), lkb::DecisionRule::ucb, tuned(1.0),
        fixed_ridge(0.1), 1));
  }
  const Script s = make_script(3, 6, 3, 60, 10);
  for (std::size_t t = 0; t < s.users.size(); ++t) {
    const int u = s.users[t];
    const lkb::RoundView view{static_cast<int>(t), u, s.candidates[t]};
    const lkb::RoundView single_view{static_cast<int>(t), 0, s.candidates[t]};
    auto& single = *singles[static_cast<std::size_t>(u)];
    // Prior ties make argmax sensitive to roundoff in exp(0 L), so compare scores.
    for (const int arm : s.candidates[t]) {
      const auto a = coop.posterior().predict(lkb::GridPoint{arm, u});
      const auto b = single.posterior().predict(lkb::GridPoint{arm, 0});
      ASSERT_NEAR(a.mean, b.mean, 1e-9) << "round " << t;
      ASSERT_NEAR(a.sigma, b.sigma, 1e-9) << "round " << t;
    }
    const std::size_t c = single.select(single_view);
    const double y = s.rewards[static_cast<std::size_t>(u * 6 + s.candidates[t][c])];
    coop.learn(view, c, y);
    single.learn(single_view, c, y);
  }
}

TEST(KernelPolicy, CoopAllOnesSharesPosteriorAcrossUsers) {
  const MatrixXd pool = unit_pool(5, 3, 11);
  lkb::KernelPolicy coop("coop", grid_for(pool, MatrixXd::Ones(2, 2)), lkb::DecisionRule::ucb,
                         tuned(1.0), fixed_ridge(0.1), 1);
  const Script s = make_script(2, 5, 3, 30, 12);
  play(coop, s);
  for (int arm = 0; arm < 5; ++arm) {
    const auto a = coop.posterior().predict(lkb::GridPoint{arm, 0});
    const auto b = coop.posterior().predict(lkb::GridPoint{arm, 1});
    EXPECT_NEAR(a.mean, b.mean, 1e-12);
    EXPECT_NEAR(a.sigma, b.sigma, 1e-12);
  }
}

TEST(KernelPolicy, LearnedMmdRefreshesOnSchedule) {
  const MatrixXd pool = unit_pool(6, 3, 13);
  const auto spectrum =
      std::make_shared<const lkb::LaplacianSpectrum>(lkb::gen_erdos_renyi(3, 0.5, 13), 0.1);
  lkb::AgentKernel a;
  a.update_interval = 25;
  a.feature_dim = 64;
  lkb::KernelPolicy coop("coop", grid_for(pool, MatrixXd::Identity(3, 3)), lkb::DecisionRule::ucb,
                         tuned(1.0), fixed_ridge(0.1), 1, std::nullopt,
                         lkb::AgentRefresh{a, spectrum, 3});
  const Script s = make_script(3, 6, 3, 101, 14);
  play(coop, s);
  EXPECT_EQ(coop.rebuild_count(), 4);
  EXPECT_EQ(coop.refresh_bandwidths().size(), 4u);
  const MatrixXd& kz = coop.posterior().kernel().kernel().user_kernel();
  for (int u = 0; u < 3; ++u) EXPECT_DOUBLE_EQ(kz(u, u), 1.0);
  EXPECT_LT(kz(0, 1), 1.0);
  EXPECT_GT(kz(0, 1), 0.0);
}

TEST(KernelPolicy, TsIsReproducibleForEqualSeeds) {
  const MatrixXd pool = unit_pool(6, 3, 15);
  const lkb::LaplacianSpectrum spec(lkb::gen_erdos_renyi(3, 0.5, 15), 0.1);
  auto make = [&](std::uint64_t seed) {
    return lkb::KernelPolicy("ts", grid_for(pool, spec.inv_reg()), lkb::DecisionRule::ts,
                             tuned(1.0), fixed_ridge(0.1), seed);
  };
  auto a = make(5), b = make(5), c = make(6);
  const Script s = make_script(3, 6, 4, 60, 16);
  const auto ra = play(a, s);
  EXPECT_EQ(ra, play(b, s));
  EXPECT_NE(ra, play(c, s));
}

TEST(LinUcb, PriorPicksFirstCandidate) {
  const MatrixXd pool = unit_pool(5, 3, 1);
  lkb::LinUcbPolicy p("lin", lkb::LinearDesign::per_user, pool, 2, 0.0);
  const std::vector<int> cand{3, 1, 4};
  EXPECT_EQ(p.select({0, 1, cand}), 0u);
}

TEST(LinUcb, PooledEqualsPerUserForOneUser) {
  const MatrixXd pool = unit_pool(7, 4, 2);
  lkb::LinUcbPolicy pooled("pooled", lkb::LinearDesign::pooled, pool, 1, 1.0);
  lkb::LinUcbPolicy per("per", lkb::LinearDesign::per_user, pool, 1, 1.0);
  const Script s = make_script(1, 7, 3, 50, 3);
  EXPECT_EQ(play(pooled, s), play(per, s));
}

TEST(LinUcb, GraphOnEdgelessUnitRhoEqualsPerUser) {
  const MatrixXd pool = unit_pool(8, 4, 4);
  const lkb::UserGraph g = lkb::UserGraph::empty(5);
  const MatrixXd reg = g.laplacian() + MatrixXd::Identity(5, 5);
  lkb::LinUcbPolicy graph("graph", lkb::LinearDesign::graph, pool, 5, 1.0, reg);
  lkb::LinUcbPolicy per("per", lkb::LinearDesign::per_user, pool, 5, 1.0);
  const Script s = make_script(5, 8, 4, 50, 5);
  EXPECT_EQ(play(graph, s), play(per, s));
}

TEST(LinUcb, ShermanMorrisonMatchesDirectInverse) {
  const MatrixXd pool = unit_pool(6, 3, 6);
  const lkb::UserGraph g = lkb::gen_erdos_renyi(3, 0.7, 6);
  const MatrixXd reg = g.laplacian() + 0.1 * MatrixXd::Identity(3, 3);
  lkb::LinUcbPolicy p("graph", lkb::LinearDesign::graph, pool, 3, 1.0, reg);
  const Script s = make_script(3, 6, 3, 40, 7);
  MatrixXd m = lkb::kronecker(reg, MatrixXd::Identity(3, 3));
  for (std::size_t t = 0; t < s.users.size(); ++t) {
    const lkb::RoundView view{static_cast<int>(t), s.users[t], s.candidates[t]};
    const std::size_t c = p.select(view);
    VectorXd phi = VectorXd::Zero(9);
    phi.segment(s.users[t] * 3, 3) = pool.row(s.candidates[t][c]).transpose();
    m += phi * phi.transpose();
    p.learn(view, c, 1.0);
  }
  EXPECT_LE((p.inverse(0) - m.inverse()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(LinUcb, GraphDimensionCap) {
  const MatrixXd pool = unit_pool(3, 50, 8);
  const MatrixXd reg = MatrixXd::Identity(81, 81);
  EXPECT_THROW(lkb::LinUcbPolicy("g", lkb::LinearDesign::graph, pool, 81, 1.0, reg),
               lkb::ParameterError);
  EXPECT_THROW(lkb::LinUcbPolicy("g", lkb::LinearDesign::graph, pool, 2, 1.0),
               lkb::ParameterError);
}

TEST(LinUcb, RejectsEmptyCandidates) {
  const MatrixXd pool = unit_pool(3, 2, 9);
  lkb::LinUcbPolicy p("lin", lkb::LinearDesign::pooled, pool, 2, 1.0);
  EXPECT_THROW(p.select({0, 0, std::span<const int>{}}), lkb::ProtocolError);
}

}  // namespace
