#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "saht/saht.hpp"
#include "support/toy_mdp.hpp"

using namespace saht;

namespace {

ConstraintSpec ones() {
  return ConstraintSpec::from_function("one", [](StateId, const ActionProfile&) { return 1.0; }, 1.0, 0.1, 0.0);
}

ConstraintSpec zeros() {
  return ConstraintSpec::from_function("zero", [](StateId, const ActionProfile&) { return 0.0; }, 1.0, 0.1, 0.0);
}

Trajectory two_state_traj() {
  Trajectory t;
  t.steps.push_back({0, {0, {0}}, 1, 0.0});
  t.steps.push_back({1, {1, {0}}, 0, 0.0});
  return t;
}

}  // namespace

TEST(IS, CandidateEqualsBehavior) {
  const auto b = TabularPolicy("b", 2, 2, {0.3, 0.7, 0.6, 0.4});
  const auto t = two_state_traj();
  EXPECT_DOUBLE_EQ(is_estimate(t, b, b, ones(), 0.9), g_return(t, ones(), 0.9));
}

TEST(IS, SingleFactor) {
  Trajectory t;
  t.steps.push_back({0, {0, {0}}, 0, 0.0});
  const auto b = TabularPolicy("b", 1, 2, {0.4, 0.6});
  const auto c = TabularPolicy("c", 1, 2, {0.8, 0.2});
  EXPECT_DOUBLE_EQ(is_estimate(t, b, c, ones(), 1.0), 2.0);
}

TEST(IS, ZeroCandidateProbability) {
  const auto b = TabularPolicy::uniform("b", 2, 2);
  const auto c = TabularPolicy("c", 2, 2, {0.0, 1.0, 0.5, 0.5});
  EXPECT_EQ(is_estimate(two_state_traj(), b, c, ones(), 1.0), 0.0);
}

TEST(IS, SupportViolation) {
  const auto b = TabularPolicy("b", 2, 2, {0.0, 1.0, 0.5, 0.5});
  const auto c = TabularPolicy::uniform("c", 2, 2);
  EXPECT_THROW(is_estimate(two_state_traj(), b, c, ones(), 1.0), SupportViolation);
  EXPECT_THROW(pdis_estimate(two_state_traj(), b, c, ones(), 1.0), SupportViolation);
  EXPECT_THROW(dr_estimate(two_state_traj(), b, c, ones(), QVTables::zeros(2, 2), 1.0), SupportViolation);
}

TEST(PDIS, CandidateEqualsBehavior) {
  const auto b = TabularPolicy("b", 2, 2, {0.3, 0.7, 0.6, 0.4});
  const auto t = two_state_traj();
  EXPECT_DOUBLE_EQ(pdis_estimate(t, b, b, ones(), 0.7), g_return(t, ones(), 0.7));
}

TEST(PDIS, TwoStepHandComputation) {
  // Ratios 2 then 0.5: 2 * 1 + (2 * 0.5) * 1 = 3.
  const auto b = TabularPolicy("b", 2, 2, {0.25, 0.75, 0.5, 0.5});
  const auto c = TabularPolicy("c", 2, 2, {0.5, 0.5, 0.75, 0.25});
  EXPECT_DOUBLE_EQ(pdis_estimate(two_state_traj(), b, c, ones(), 1.0), 3.0);
}

TEST(PDIS, ZeroSignal) {
  const auto b = TabularPolicy::uniform("b", 2, 2);
  const auto c = TabularPolicy("c", 2, 2, {0.9, 0.1, 0.2, 0.8});
  EXPECT_EQ(pdis_estimate(two_state_traj(), b, c, zeros(), 0.9), 0.0);
}

TEST(DR, ZeroTablesReduceToPDIS) {
  const auto inst = toy::make_instance(12, 5);
  Rng rng(6);
  const auto b = toy::random_policy("b", rng, 0.2, 0.8);
  const auto c = toy::random_policy("c", rng, 0.1, 0.9);
  std::vector<PolicyPtr> mates{inst.teammate};
  const auto d = collect_dataset(*inst.env, b, "b", mates, 200, 7);
  const auto zero = QVTables::zeros(3, 2);
  for (const auto& e : d.entries)
    EXPECT_NEAR(dr_estimate(e.trajectory, *b, *c, inst.constraint, zero, 0.9),
                pdis_estimate(e.trajectory, *b, *c, inst.constraint, 0.9), 1e-12);
}

TEST(DR, SingleStepExpansion) {
  Trajectory t;
  t.steps.push_back({1, {0, {1}}, 0, 0.0});
  const auto b = TabularPolicy::uniform("b", 2, 2);
  auto qv = QVTables::zeros(2, 2);
  qv.q = {0.0, 0.0, 0.3, 0.9};
  qv.v = {0.0, 0.6};
  const auto g = ConstraintSpec::from_function("g", [](StateId, const ActionProfile&) { return 0.8; }, 1.0, 0.1, 0.0);
  EXPECT_NEAR(dr_estimate(t, b, b, g, qv, 0.9), 0.8 - 0.3 + 0.6, 1e-15);
}

TEST(DR, UnbiasedWithExactTablesOnBehavior) {
  const auto inst = toy::make_instance(8, 41);
  Rng rng(42);
  const auto b = toy::random_policy("b", rng, 0.3, 0.7);
  std::vector<PolicyPtr> mates{inst.teammate};
  const double gamma = 0.8;
  const auto qv = toy::as_tables(toy::stationary_qv(inst, *b, gamma), gamma);
  const auto d = collect_dataset(*inst.env, b, "b", mates, 10000, 43);
  const auto batch = estimate_batch(d, *b, inst.constraint, EstimatorKind::dr, gamma, &qv);
  const auto mom = sample_moments(batch.values);
  const double truth = toy::finite_horizon_value(inst, *b, gamma);
  EXPECT_LE(std::abs(mom.mean - truth), 3.0 * mom.stdev / 100.0);
}

TEST(DR, UnderflowedWeightKeepsOnlyEarlierTerms) {
  Trajectory t;
  for (int i = 0; i < 4; ++i) t.steps.push_back({0, {i == 1 ? ActionId{1} : ActionId{0}, {0}}, 0, 0.0});
  const auto b = TabularPolicy::uniform("b", 1, 2);
  const auto c = TabularPolicy("c", 1, 2, {1.0, 0.0});
  auto qv = QVTables::zeros(1, 2);
  qv.q = {0.5, 0.2};
  qv.v = {0.5};
  const auto g = ones();
  // t=0: w0 = 2, term = 1 * V + 2 (1 - 0.5) = 1.5. t=1: w1 = 0, term = 2 * V = 1. Later terms vanish.
  EXPECT_NEAR(dr_estimate(t, b, c, g, qv, 1.0), 2.5, 1e-15);
}

TEST(Shift, ConstantFormula) {
  EXPECT_DOUBLE_EQ(nonneg_shift_constant(200, 1.0, 100.0), 40200.0);
}

TEST(Shift, ZeroBatchBecomesShift) {
  EstimateBatch b;
  b.values.assign(5, 0.0);
  const auto s = shift_nonneg(b, 200, 1.0, 100.0);
  for (double v : s.values) EXPECT_DOUBLE_EQ(v, 40200.0);
  EXPECT_DOUBLE_EQ(s.shift, 40200.0);
  EXPECT_DOUBLE_EQ(batch_mean(s), 0.0);
}

TEST(Shift, NonnegativeWhenWeightsStayBelowOne) {
  // The bound on |min| assumes every running weight lies in [0, 1].
  Rng rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t L = 1 + rng.below(15);
    Trajectory t;
    std::vector<double> bprobs, cprobs;
    for (std::size_t s = 0; s < L; ++s) {
      const double p0 = 0.05 + 0.9 * rng.uniform();
      bprobs.insert(bprobs.end(), {p0, 1.0 - p0});
      const double scale = rng.uniform();
      cprobs.insert(cprobs.end(), {p0 * scale, 1.0 - p0 * scale});
      t.steps.push_back({s, {0, {0}}, s, 0.0});
    }
    const TabularPolicy b("b", L, 2, bprobs), c("c", L, 2, cprobs);
    const double vmax = 1.0 + 9.0 * rng.uniform();
    auto qv = QVTables::zeros(L, 2);
    for (std::size_t s = 0; s < L; ++s) {
      qv.q[s * 2] = vmax * rng.uniform();
      qv.q[s * 2 + 1] = vmax * rng.uniform();
      qv.v[s] = c(s, 0) * qv.q[s * 2] + c(s, 1) * qv.q[s * 2 + 1];
    }
    const auto g = ConstraintSpec::from_function("g", [](StateId, const ActionProfile&) { return 0.0; }, 1.0, 0.1, 0.0);
    EstimateBatch batch;
    batch.values.push_back(dr_estimate(t, b, c, g, qv, 1.0));
    EXPECT_GE(shift_nonneg(batch, L, 1.0, vmax).values[0], 0.0);
  }
}

TEST(Shift, LargeWeightsCanBreakTheConstant) {
  // With ratios above one the Q correction grows with the weight and the shift is no longer enough.
  const std::size_t L = 10;
  Trajectory t;
  for (std::size_t s = 0; s < L; ++s) t.steps.push_back({0, {0, {0}}, 0, 0.0});
  const TabularPolicy b("b", 1, 2, {0.1, 0.9}), c("c", 1, 2, {1.0, 0.0});
  auto qv = QVTables::zeros(1, 2);
  qv.q = {1.0, 1.0};
  qv.v = {1.0};
  const auto g = zeros();
  EstimateBatch batch;
  batch.values.push_back(dr_estimate(t, b, c, g, qv, 1.0));
  EXPECT_LT(shift_nonneg(batch, L, 1.0, 1.0).values[0], 0.0);
}

TEST(Clip, ClampsValues) {
  EstimateBatch b;
  b.values = {-5.0, 3.0, 50.0};
  EXPECT_EQ(clip_batch(b, 0.0, 10.0).values, (std::vector<double>{0.0, 3.0, 10.0}));
}

TEST(Clip, InfiniteRangeIsIdentity) {
  EstimateBatch b;
  b.values = {-5.0, 3.0, 50.0};
  const double inf = std::numeric_limits<double>::infinity();
  EXPECT_EQ(clip_batch(b, -inf, inf).values, b.values);
}

TEST(Clip, InsideRangeIsIdentity) {
  EstimateBatch b;
  b.values = {1.0, 2.0};
  EXPECT_EQ(clip_batch(b, 0.0, 10.0).values, b.values);
}

TEST(Clip, MustPrecedeShift) {
  EstimateBatch b;
  b.values = {1.0};
  EXPECT_THROW(clip_batch(shift_nonneg(b, 1, 1.0, 1.0), 0.0, 1.0), ConfigError);
  EXPECT_THROW(clip_batch(b, 2.0, 1.0), ConfigError);
}

TEST(Batch, CsvExport) {
  EstimateBatch b;
  b.values = {1.5};
  b.final_weights = {0.25};
  std::ostringstream os;
  b.write_csv(os);
  EXPECT_EQ(os.str(), "traj_index,value,weight_final\n0,1.5,0.25\n");
}

// Unbiasedness and variance ordering on the toy MDP against the finite-horizon DP value.
class ToyPairs : public ::testing::Test {
 protected:
  static constexpr double kGamma = 0.6;
  static constexpr std::size_t kEpisodes = 10000;

  struct PairStats {
    double truth;
    SampleMoments is, pdis, dr;
  };

  static PairStats run_pair(std::uint64_t seed) {
    const auto inst = toy::make_instance(8, 500 + seed);
    Rng rng(600 + seed);
    const auto b = toy::random_policy("b", rng, 0.3, 0.7);
    const auto c = toy::random_policy("c", rng, 0.15, 0.85);
    std::vector<PolicyPtr> mates{inst.teammate};
    const auto d = collect_dataset(*inst.env, b, "b", mates, kEpisodes, 700 + seed);
    const auto qv = toy::as_tables(toy::stationary_qv(inst, *c, kGamma), kGamma);
    PairStats out;
    out.truth = toy::finite_horizon_value(inst, *c, kGamma);
    out.is = sample_moments(estimate_batch(d, *c, inst.constraint, EstimatorKind::is, kGamma).values);
    out.pdis = sample_moments(estimate_batch(d, *c, inst.constraint, EstimatorKind::pdis, kGamma).values);
    out.dr = sample_moments(estimate_batch(d, *c, inst.constraint, EstimatorKind::dr, kGamma, &qv).values);
    return out;
  }
};

TEST_F(ToyPairs, AllEstimatorsUnbiased) {
  const double root_m = std::sqrt(static_cast<double>(kEpisodes));
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto s = run_pair(seed);
    EXPECT_LE(std::abs(s.is.mean - s.truth), 3.0 * s.is.stdev / root_m) << "pair " << seed;
    EXPECT_LE(std::abs(s.pdis.mean - s.truth), 3.0 * s.pdis.stdev / root_m) << "pair " << seed;
    EXPECT_LE(std::abs(s.dr.mean - s.truth), 3.0 * s.dr.stdev / root_m) << "pair " << seed;
  }
}

TEST_F(ToyPairs, VarianceOrdering) {
  int ordered = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto s = run_pair(seed);
    ordered += s.dr.stdev <= s.pdis.stdev && s.pdis.stdev <= s.is.stdev;
  }
  EXPECT_GE(ordered, 4);
}
