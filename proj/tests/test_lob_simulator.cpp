#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include <lobqueue/fluid.hpp>
#include <lobqueue/lob_simulator.hpp>
#include <lobqueue/statistics.hpp>

using namespace lobqueue;

namespace {
SimConfig only_type(int j, double size, double qb, double qa, double z) {
  std::array<double, 6> p{};
  p[j] = 1.0;
  SimConfig c;
  c.marks = constant_marks({size, size, size, size, size, size}, p);
  c.n = 1.0;
  c.qb0 = qb;
  c.qa0 = qa;
  c.z0 = z;
  c.horizon = 100.0;
  return c;
}

SimConfig baseline(double n, std::uint64_t path) {
  const auto f = baseline_params();
  SimConfig c;
  c.marks = marks_for_mean(f.vbar);
  c.n = n;
  c.qb0 = c.qa0 = c.z0 = 100.0;
  c.horizon = 200.0;
  c.seed = 21;
  c.path_index = path;
  c.continue_after_stop = false;
  return c;
}
}  // namespace

TEST(Simulator, MarketOrdersOnly) {
  auto c = only_type(1, 1.0, 3.0, 5.0, 2.0);
  const auto p = simulate_path(c);
  ASSERT_GE(p.events.size(), 2u);
  EXPECT_EQ(p.tau_z, p.events[1].time);
  EXPECT_EQ(p.tau, p.tau_z);
  EXPECT_EQ(p.qb, 1.0);
  EXPECT_EQ(p.qa, 5.0);
  EXPECT_EQ(p.z, 0.0);
  EXPECT_TRUE(std::isinf(p.tau_b));
}

TEST(Simulator, UniformCancellationProportional) {
  auto c = only_type(2, 1.0, 4.0, 5.0, 2.0);
  c.horizon = 1e9;
  c.continue_after_stop = false;
  const auto p = simulate_path(c);
  ASSERT_FALSE(p.events.empty());
  double qb = 4.0, z = 2.0;
  for (const auto& e : p.events) {
    EXPECT_NEAR((qb - e.qb) / qb, (z - e.z) / z, 1e-15);
    qb = e.qb;
    z = e.z;
  }
  // Z stays proportional, so both hit zero together
  EXPECT_EQ(p.tau_b, p.tau_z);
}

TEST(Simulator, OvershootKeptAndFrozen) {
  auto c = only_type(1, 3.0, 5.0, 5.0, 2.0);
  const auto p = simulate_path(c);
  EXPECT_EQ(p.z, -1.0);
  EXPECT_EQ(p.qb, 2.0);
  const auto s = state_at(p, p.tau + 50.0);
  EXPECT_EQ(s.z, -1.0);
  EXPECT_EQ(s.qb, 2.0);
}

TEST(Simulator, EmptyStartStopsAtZero) {
  auto c = only_type(0, 1.0, 0.0, 5.0, 0.0);
  const auto p = simulate_path(c);
  EXPECT_EQ(p.tau, 0.0);
  EXPECT_EQ(p.tau_b, 0.0);
  EXPECT_EQ(p.qb, 0.0);
}

TEST(Simulator, ValidationRejectsZAboveQueue) {
  auto c = only_type(0, 1.0, 1.0, 1.0, 2.0);
  EXPECT_THROW(simulate_path(c), std::invalid_argument);
}

TEST(Simulator, Reproducible) {
  const auto a = simulate_path(baseline(100.0, 3));
  const auto b = simulate_path(baseline(100.0, 3));
  ASSERT_EQ(a.events.size(), b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) EXPECT_EQ(a.events[i].time, b.events[i].time);
}

TEST(Simulator, ExecutionTimeBand) {
  // tau_z = 100 for the fluid limit; the spread at n = 10^3 is about 22/sqrt(1000)
  int inside = 0;
  const int paths = 40;
  for (int p = 0; p < paths; ++p) {
    const auto path = simulate_path(baseline(1e3, p));
    inside += path.tau_z >= 90.0 && path.tau_z <= 110.0;
    EXPECT_LE(path.tau_z, path.tau_b);
  }
  EXPECT_GE(inside, 38);
}

TEST(Simulator, LemmaPerEvent) {
  for (int p = 0; p < 20; ++p) {
    const auto path = simulate_path(baseline(10.0, p));
    for (const auto& e : path.events) {
      if (e.time >= std::min(path.tau_z, path.tau_a)) break;
      ASSERT_LE(e.z, e.qb);
    }
    EXPECT_LE(path.tau_z, path.tau_b);
    double prev = path.z0;
    for (const auto& e : path.events) {
      EXPECT_LE(e.z, prev);
      prev = e.z;
    }
  }
}

TEST(Simulator, CustomCancellationSlowsPosition) {
  // profile x^2 cancels less ahead of the order than the uniform rule
  auto c = baseline(100.0, 0);
  c.horizon = 50.0;
  const auto uni = simulate_path(c);
  c.cancellation = CancellationRule::custom([](double x) { return x * x; }, 2.0);
  const auto sq = simulate_path(c);
  EXPECT_GE(state_at(sq, 50.0).z, state_at(uni, 50.0).z);
  EXPECT_THROW(validate(CancellationRule::custom([](double x) { return 3.0 * x; }, 1.0)), std::invalid_argument);
}

TEST(Simulator, StateDependentReducesToPoisson) {
  auto c = baseline(100.0, 4);
  c.horizon = 20.0;
  const auto a = simulate_path(c);
  c.arrival = LinearStateDependent{1.0, 0.0, 0.0};
  const auto b = simulate_state_dependent(c);
  ASSERT_EQ(a.events.size(), b.events.size());
  for (std::size_t i = 0; i < a.events.size(); ++i) EXPECT_EQ(a.events[i].time, b.events[i].time);
  EXPECT_THROW(simulate_state_dependent(baseline(1.0, 0)), std::invalid_argument);
}

TEST(Simulator, StateDependentMatchesFluid) {
  const auto f = baseline_params();
  const double alpha = 0.01, beta = 0.01;
  const auto target = fluid_linear_intensity(f, alpha, beta, 1.0);
  std::vector<double> qb;
  for (int p = 0; p < 200; ++p) {
    auto c = baseline(1e3, p);
    c.arrival = LinearStateDependent{1.0, alpha, beta};
    c.horizon = 1.0;
    qb.push_back(state_at(simulate_state_dependent(c), 1.0).qb);
  }
  EXPECT_NEAR(mean(qb), target.qb, 5.0 * std::sqrt(variance(qb) / qb.size()));
}

TEST(Flows, EmptyAndSingle) {
  QueuePath empty;
  empty.n = 4.0;
  Vec6 vbar = Vec6::Constant(1.0 / 6);
  const auto f = extract_flows(empty, 1.0, vbar);
  EXPECT_LT((f.c_at(2.0)).norm(), 1e-15);
  EXPECT_LT((f.psi_at(2.0) + vbar * 2.0 * 2.0).norm(), 1e-14);

  QueuePath one;
  one.n = 1.0;
  one.events.push_back({0.5, 3, 4.0, 1, 1, 1});
  const auto g = extract_flows(one, 1.0, vbar);
  Vec6 jump = Vec6::Zero();
  jump[3] = 4.0;
  EXPECT_LT((g.c_at(0.6) - jump).norm(), 1e-15);
  EXPECT_LT(g.c_at(0.4).norm(), 1e-15);
}

TEST(Flows, CovarianceOfPsi) {
  SimConfig c;
  c.marks = constant_marks({1, 1, 1, 1, 1, 1});
  c.n = 1e3;
  c.qb0 = c.qa0 = c.z0 = 1.0;
  c.horizon = 1.0;
  c.seed = 31;
  const Vec6 vbar = mean_vector(c.marks);
  const int paths = 3000;
  std::vector<double> psi1(paths);
  for (int p = 0; p < paths; ++p) {
    c.path_index = p;
    psi1[p] = extract_flows(simulate_path(c), 1.0, vbar).psi_at(1.0)[0];
  }
  const double se = batched_statistic_se(paths, 50, [&](std::size_t s, std::size_t len) {
    return variance(std::span<const double>(psi1).subspan(s, len));
  });
  EXPECT_NEAR(variance(psi1), 1.0 / 6, 5 * se);
}

TEST(Flows, CsvSchemas) {
  auto c = only_type(3, 4.0, 1.0, 9.0, 1.0);
  c.horizon = 1.5;
  const auto p = simulate_path(c);
  std::ostringstream a, b;
  write_path_csv(a, p);
  write_flows_csv(b, extract_flows(p, 1.0, mean_vector(c.marks)));
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "time,type,size,qb,qa,z");
  EXPECT_EQ(b.str().substr(0, b.str().find('\n')), "time,c1,c2,c3,c4,c5,c6,psi1,psi2,psi3,psi4,psi5,psi6");
}

TEST(MarkChain, AgreesWithEventSimulation) {
  // same marks stream, so the event count to the stop must match the full simulator
  const auto f = baseline_params();
  const MarkSampler sampler(marks_for_mean(f.vbar));
  for (int p = 0; p < 5; ++p) {
    auto c = baseline(50.0, p);
    const auto path = simulate_path(c);
    Rng rng(c.seed, stream_id(StreamTag::marks, c.path_index));
    const auto stop = run_mark_chain(sampler, rng, c.n, 100, 100, 100, CancellationRule::uniform(),
                                     ChainTarget::truncated, 1u << 30);
    std::size_t k = 0;
    while (k < path.events.size() && path.events[k].time < path.tau) ++k;
    EXPECT_EQ(stop.events, k + 1);
    EXPECT_TRUE(stop.lemma_ok);
  }
}
