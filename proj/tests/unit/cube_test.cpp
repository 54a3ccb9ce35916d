#include <gtest/gtest.h>

#include <cmath>

#include "stratcube/cube.hpp"
#include "test_support.hpp"

namespace stratcube {
namespace {

using testing::frame_of;
using testing::sigma_band;

// Largest lambda with pi + lambda * u inside the unit cube, by bisection.
double line_search(const std::vector<double>& pi, const std::vector<double>& u) {
  auto feasible = [&](double lambda) {
    for (std::size_t k = 0; k < pi.size(); ++k) {
      const double v = pi[k] + lambda * u[k];
      if (v < -1e-15 || v > 1.0 + 1e-15) return false;
    }
    return true;
  };
  double lo = 0.0, hi = 1e6;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? lo : hi) = mid;
  }
  return lo;
}

std::vector<double> negate(std::vector<double> v) {
  for (double& x : v) x = -x;
  return v;
}

TEST(FlightStep, SymmetricPair) {
  const double s = 1.0 / std::sqrt(2.0);
  const std::vector<double> pi = {0.5, 0.5};
  const std::vector<double> u = {s, -s};
  EXPECT_NEAR(line_search(pi, u), 0.5 * std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(line_search(pi, negate(u)), 0.5 * std::sqrt(2.0), 1e-12);
  Rng rng(1);
  int first = 0;
  const int reps = 20000;
  for (int i = 0; i < reps; ++i) {
    const auto next = flight_step(pi, u, rng);
    ASSERT_TRUE((next == std::vector<double>{1, 0}) || (next == std::vector<double>{0, 1}));
    first += next[0] == 1.0;
  }
  EXPECT_NEAR(first / double(reps), 0.5, 3.5 * sigma_band(0.5, reps));
}

TEST(FlightStep, MatchesBruteForceLineSearch) {
  const double s = 1.0 / std::sqrt(2.0);
  const std::vector<double> pi = {0.2, 0.8};
  const std::vector<double> u = {s, -s};
  const double up = line_search(pi, u);
  const double down = line_search(pi, negate(u));
  EXPECT_NEAR(up, 0.8 * std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(down, 0.2 * std::sqrt(2.0), 1e-12);
  Rng rng(2);
  int ups = 0;
  const int reps = 20000;
  for (int i = 0; i < reps; ++i) {
    const auto next = flight_step(pi, u, rng);
    if (next == std::vector<double>{1, 0}) {
      ++ups;
    } else {
      ASSERT_EQ(next, (std::vector<double>{0, 1}));
    }
  }
  // Moves up with probability down / (up + down) = 0.2.
  EXPECT_NEAR(ups / double(reps), 0.2, 3.5 * sigma_band(0.2, reps));
}

TEST(FlightStep, RandomDirectionsAgainstLineSearch) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> pi(5), u(5);
    for (auto& v : pi) v = 0.05 + 0.9 * rng.uniform();
    for (auto& v : u) v = rng.uniform() - 0.5;
    const double up = line_search(pi, u);
    const double down = line_search(pi, negate(u));
    const auto next = flight_step(pi, u, rng);
    std::size_t big = 0;
    for (std::size_t k = 1; k < 5; ++k) {
      if (std::abs(u[k]) > std::abs(u[big])) big = k;
    }
    const double lambda = std::abs(next[big] - pi[big]) / std::abs(u[big]);
    EXPECT_TRUE(std::abs(lambda - up) < 1e-8 || std::abs(lambda - down) < 1e-8);
    int boundary = 0;
    for (double v : next) boundary += (v == 0.0 || v == 1.0);
    EXPECT_GE(boundary, 1);
  }
}

TEST(FlightStep, Martingale) {
  const std::vector<double> pi = {0.3, 0.55, 0.71, 0.12, 0.5};
  const std::vector<double> u = {0.4, -0.2, 0.1, 0.3, -0.6};
  Rng rng(4);
  const int reps = 100000;
  std::vector<double> sum(5, 0.0), sumsq(5, 0.0);
  for (int i = 0; i < reps; ++i) {
    const auto next = flight_step(pi, u, rng);
    for (std::size_t k = 0; k < 5; ++k) {
      sum[k] += next[k];
      sumsq[k] += next[k] * next[k];
    }
  }
  for (std::size_t k = 0; k < 5; ++k) {
    const double mean = sum[k] / reps;
    const double var = sumsq[k] / reps - mean * mean;
    EXPECT_NEAR(mean, pi[k], 3.0 * std::sqrt(var / reps) + 1e-12) << "coordinate " << k;
  }
}

TEST(FlightStep, RejectsBadInput) {
  Rng rng(5);
  EXPECT_THROW(flight_step(std::vector<double>{0.5, 0.5}, std::vector<double>{0, 0}, rng),
               std::invalid_argument);
  EXPECT_THROW(flight_step(std::vector<double>{0.5, 1.0}, std::vector<double>{1, -1}, rng),
               std::invalid_argument);
  EXPECT_THROW(flight_step(std::vector<double>{0.5}, std::vector<double>{1, -1}, rng),
               std::invalid_argument);
}

TEST(FlightPhase, NoConstraintsIsPoisson) {
  const std::vector<double> pi = {0.1, 0.35, 0.5, 0.8};
  const auto system = build_system(frame_of({"a", "a", "a", "a"}, pi));
  const int reps = 10000;
  std::vector<int> hits(4, 0);
  for (int r = 0; r < reps; ++r) {
    Rng rng = Rng::stream(6, r);
    const auto state = flight_phase(system, rng);
    ASSERT_TRUE(state.resolved());
    for (std::size_t k = 0; k < 4; ++k) hits[k] += state.pi[k] == 1.0;
  }
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_NEAR(hits[k] / double(reps), pi[k], 3.5 * sigma_band(pi[k], reps));
  }
}

TEST(FlightPhase, FixedSizeConstraint) {
  const auto system =
      build_system(frame_of({"a", "a", "a", "a", "a", "a"}, std::vector<double>(6, 0.5), 1,
                            std::vector<double>(6, 0.5)));
  for (int r = 0; r < 10000; ++r) {
    Rng rng = Rng::stream(7, r);
    const auto state = flight_phase(system, rng);
    ASSERT_TRUE(state.resolved());
    int n = 0;
    for (double v : state.pi) n += v == 1.0;
    ASSERT_EQ(n, 3) << "run " << r;
  }
}

TEST(FlightPhase, AlreadyResolved) {
  const auto system = build_system(frame_of({"a", "a", "b"}, {0.0, 1.0, 1.0}, 1, {1, 2, 3}));
  Rng rng(8);
  const auto state = flight_phase(system, rng);
  EXPECT_TRUE(state.resolved());
  EXPECT_EQ(state.steps, 0u);
  EXPECT_EQ(state.pi, (std::vector<double>{0, 1, 1}));
}

TEST(FlightPhase, PreservesBalanceAtEveryStep) {
  const auto frame = testing::random_stratified_frame(1, 40, 13.7, 4, 9);
  const auto system = build_system(frame);
  const auto cols = aux_columns(system);
  auto aux_totals = [&](const std::vector<double>& v) {
    std::vector<double> t(cols.size(), 0.0);
    for (std::size_t k = 0; k < v.size(); ++k)
      for (std::size_t j = 0; j < cols.size(); ++j) t[j] += system.a(k, j) * v[k];
    return t;
  };
  const auto target = aux_totals(system.pi);
  double scale = 0.0;
  for (double t : target) scale = std::max(scale, std::abs(t));

  Rng rng(10);
  std::size_t observed = 0;
  const auto state = flight_phase(system, rng, {}, [&](const FlightState& s) {
    ++observed;
    const auto now = aux_totals(s.pi);
    for (std::size_t j = 0; j < now.size(); ++j) {
      ASSERT_LE(std::abs(now[j] - target[j]), 1e-6 * scale);
    }
  });
  EXPECT_EQ(observed, state.steps);
  EXPECT_LE(state.steps, system.size());
  EXPECT_LE(state.active.size(), system.num_aux());
}

TEST(Landing, NothingLeft) {
  const auto system = build_system(frame_of({"a", "a"}, {1.0, 0.0}, 1, {1, 1}));
  Rng rng(11);
  const auto result = landing_suppression(FlightState::from(system), system,
                                          default_drop_order(system), rng);
  EXPECT_EQ(result.a, (std::vector<double>{1, 0}));
  EXPECT_TRUE(result.dropped_constraints.empty());
}

TEST(Landing, SingleUnitUnsatisfiableConstraint) {
  const auto system = build_system(frame_of({"a"}, {0.3}, 1, {1.0}));
  const int reps = 10000;
  int hits = 0;
  for (int r = 0; r < reps; ++r) {
    Rng rng = Rng::stream(12, r);
    auto state = flight_phase(system, rng);
    ASSERT_EQ(state.active.size(), 1u);
    const auto result = landing_suppression(std::move(state), system, aux_columns(system), rng);
    ASSERT_EQ(result.dropped_constraints, (std::vector<std::size_t>{1}));
    hits += result.a[0] == 1.0;
  }
  EXPECT_NEAR(hits / double(reps), 0.3, 3.5 * sigma_band(0.3, reps));
}

TEST(Landing, NonIntegerFixedSizeRoundsUpOrDown) {
  const auto system = build_system(
      frame_of({"a", "a", "a", "a"}, std::vector<double>(4, 0.6), 1, std::vector<double>(4, 0.6)));
  const int reps = 10000;
  int total = 0;
  for (int r = 0; r < reps; ++r) {
    Rng rng = Rng::stream(13, r);
    const auto result = cube_method(system, rng);
    const auto n = result.sample_size();
    ASSERT_TRUE(n == 2 || n == 3) << n;
    total += static_cast<int>(n);
  }
  // E[n] = 2.4, n is 2 or 3 so Var[n] = 0.24.
  EXPECT_NEAR(total / double(reps), 2.4, 3.5 * std::sqrt(0.24 / reps));
}

TEST(Landing, RejectsBadDropOrder) {
  const auto system = build_system(frame_of({"a", "a"}, {0.5, 0.5}, 1, {1, 1}));
  Rng rng(14);
  EXPECT_THROW(landing_suppression(FlightState::from(system), system, {0, 0}, rng),
               ValidationError);
  EXPECT_THROW(landing_suppression(FlightState::from(system), system, {5}, rng),
               ValidationError);
}

TEST(CubeMethod, InclusionProbabilitiesPreserved) {
  Rng gen(15);
  std::vector<double> pi(12), aux(24);
  for (auto& p : pi) p = 0.1 + 0.8 * gen.uniform();
  for (auto& x : aux) x = gen.uniform() * 5.0;
  const auto system = build_system(frame_of(std::vector<std::string>(12, "s"), pi, 2, aux));
  const std::size_t reps = 10000;
  std::vector<int> hits(12, 0);
  for (std::size_t r = 0; r < reps; ++r) {
    Rng rng = Rng::stream(16, r);
    const auto result = cube_method(system, rng);
    for (std::size_t k = 0; k < 12; ++k) {
      ASSERT_TRUE(result.a[k] == 0.0 || result.a[k] == 1.0);
      hits[k] += result.a[k] == 1.0;
    }
  }
  for (std::size_t k = 0; k < 12; ++k) {
    EXPECT_NEAR(hits[k] / double(reps), pi[k], 3.5 * sigma_band(pi[k], reps)) << "unit " << k;
  }
}

TEST(CubeMethod, SameSeedSameSample) {
  const auto system = build_system(testing::random_stratified_frame(1, 30, 7.5, 3, 17));
  Rng a(18), b(18);
  const auto ra = cube_method(system, a);
  const auto rb = cube_method(system, b);
  EXPECT_EQ(ra.a, rb.a);
  EXPECT_EQ(ra.balance_residual, rb.balance_residual);
  EXPECT_EQ(ra.dropped_constraints, rb.dropped_constraints);
}

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  Rng a = Rng::stream(1, 0), b = Rng::stream(1, 0), c = Rng::stream(1, 1);
  const double x = a.uniform();
  EXPECT_EQ(x, b.uniform());
  EXPECT_NE(x, c.uniform());
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

}  // namespace
}  // namespace stratcube
