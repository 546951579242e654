#include "navfilter/measurement.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "navfilter/errors.hpp"
#include "navfilter/rng.hpp"
#include "oracles.hpp"

using navfilter::Landmark;
using navfilter::LandmarkObservation;
using navfilter::Mat3;
using navfilter::NavState;
using navfilter::ObservationNoise;
using navfilter::Vec3;

namespace {

class MeasurementTest : public ::testing::Test {
 protected:
  navfilter::Rng rng{42};

  Vec3 random_vec(double scale = 1.0) {
    return {rng.uniform(-scale, scale), rng.uniform(-scale, scale), rng.uniform(-scale, scale)};
  }

  std::vector<Landmark> random_cloud(int n, double scale = 3.0) {
    std::vector<Landmark> lms;
    for (int i = 0; i < n; ++i) lms.push_back({i, random_vec(scale), rng.uniform(0.5, 2.0)});
    return lms;
  }

  static std::vector<LandmarkObservation> perfect_obs(const std::vector<Landmark>& lms,
                                                      const NavState& x) {
    std::vector<LandmarkObservation> obs;
    for (const auto& lm : lms)
      obs.push_back({lm.id, x.rot.transpose() * (lm.p - x.pos), 0.0});
    return obs;
  }
};

TEST_F(MeasurementTest, StatsUnitBasisCloud) {
  const std::vector<Landmark> lms = {
      {0, Vec3(1, 0, 0), 1.0}, {1, Vec3(0, 1, 0), 1.0}, {2, Vec3(0, 0, 1), 1.0}};
  const auto st = navfilter::landmark_stats(lms);
  EXPECT_NEAR(st.total_weight, 3.0, 1e-15);
  EXPECT_LT((st.centroid - Vec3::Constant(1.0 / 3.0)).norm(), 1e-15);
  const Mat3 expected = Mat3::Identity() - Mat3::Constant(1.0 / 3.0);
  EXPECT_LT((st.gram - expected).norm(), 1e-14);
}

TEST_F(MeasurementTest, StatsWeightedCloud) {
  const std::vector<Landmark> lms = {
      {7, Vec3(1, 0, 0), 2.0}, {8, Vec3(0, 1, 0), 1.0}, {9, Vec3(0, 0, 1), 1.0}};
  const auto st = navfilter::landmark_stats(lms);
  EXPECT_NEAR(st.total_weight, 4.0, 1e-15);
  EXPECT_LT((st.centroid - Vec3(0.5, 0.25, 0.25)).norm(), 1e-15);
  Mat3 expected;
  expected << 1.0, -0.5, -0.5, -0.5, 0.75, -0.25, -0.5, -0.25, 0.75;
  EXPECT_LT((st.gram - expected).norm(), 1e-14);
}

TEST_F(MeasurementTest, StatsMatchCenteredForm) {
  // sum s_i p_i p_i^T - s_T p_c p_c^T equals sum s_i (p_i-p_c)(p_i-p_c)^T.
  for (int trial = 0; trial < 50; ++trial) {
    const auto lms = random_cloud(6);
    const auto st = navfilter::landmark_stats(lms);
    Mat3 centered = Mat3::Zero();
    for (const auto& lm : lms)
      centered += lm.s * (lm.p - st.centroid) * (lm.p - st.centroid).transpose();
    EXPECT_LT((st.gram - centered).norm(), 1e-12);
    // Gram matrix is symmetric positive semidefinite.
    EXPECT_LT((st.gram - st.gram.transpose()).norm(), 1e-13);
    Eigen::SelfAdjointEigenSolver<Mat3> es(st.gram);
    EXPECT_GE(es.eigenvalues()(0), -1e-12);
  }
}

TEST_F(MeasurementTest, StatsEmptyThrows) {
  EXPECT_THROW(navfilter::landmark_stats({}), navfilter::EmptyLandmarkSet);
}

TEST_F(MeasurementTest, NoncollinearPredicate) {
  const std::vector<Landmark> basis = {
      {0, Vec3(1, 0, 0), 1.0}, {1, Vec3(0, 1, 0), 1.0}, {2, Vec3(0, 0, 1), 1.0}};
  EXPECT_TRUE(navfilter::check_noncollinear(basis));
  const std::vector<Landmark> line = {
      {0, Vec3(0, 0, 0), 1.0}, {1, Vec3(1, 1, 1), 1.0}, {2, Vec3(2, 2, 2), 1.0}};
  EXPECT_FALSE(navfilter::check_noncollinear(line));
  const std::vector<Landmark> pair = {{0, Vec3(0, 0, 0), 1.0}, {1, Vec3(1, 0, 0), 1.0}};
  EXPECT_FALSE(navfilter::check_noncollinear(pair));
  EXPECT_FALSE(navfilter::check_noncollinear({}));
  // Coplanar but spread points are fine (rank 2 is enough).
  const std::vector<Landmark> plane = {{0, Vec3(0, 0, 0), 1.0},
                                       {1, Vec3(1, 0, 0), 1.0},
                                       {2, Vec3(0, 1, 0), 1.0},
                                       {3, Vec3(1, 1, 0), 1.0}};
  EXPECT_TRUE(navfilter::check_noncollinear(plane));
}

TEST_F(MeasurementTest, BundleReconstructsErrorQuantities) {
  for (int trial = 0; trial < 100; ++trial) {
    auto lms = random_cloud(5 + trial % 4);
    if (!navfilter::check_noncollinear(lms)) continue;
    NavState truth;
    truth.rot = oracles::random_rotation(rng);
    truth.pos = random_vec(10.0);
    NavState est;
    est.rot = oracles::random_rotation(rng);
    est.pos = random_vec(10.0);

    const auto obs = perfect_obs(lms, truth);
    const auto b = navfilter::build_bundle(lms, obs, est.rot, est.pos);

    const Mat3 rt = truth.rot * est.rot.transpose();
    EXPECT_LT((b.gram_rot - b.gram * rt).norm(), 1e-10);

    const Vec3 ptilde = truth.pos - rt * est.pos;
    const Vec3 expected =
        rt.transpose() * (ptilde - (Mat3::Identity() - rt) * b.centroid);
    EXPECT_LT((b.mean_residual - expected).norm(), 1e-10);

    // Scalar attitude error from the bundle matches the direct functional,
    // and respects the provable upper bound (lambda2+lambda3)/2.
    const double e1 = navfilter::weighted_rotation_distance(b.gram, b.gram_rot);
    const double direct = 0.25 * (b.gram * (Mat3::Identity() - rt)).trace();
    EXPECT_NEAR(e1, direct, 1e-10);
    Eigen::SelfAdjointEigenSolver<Mat3> es(b.gram);
    EXPECT_LE(e1, 0.5 * (es.eigenvalues()(1) + es.eigenvalues()(2)) + 1e-9);
    EXPECT_GE(e1, -1e-12);
  }
}

TEST_F(MeasurementTest, BundlePerfectEstimateGivesZeroErrors) {
  const auto lms = random_cloud(8);
  NavState x;
  x.rot = oracles::random_rotation(rng);
  x.pos = random_vec(5.0);
  const auto obs = perfect_obs(lms, x);
  const auto b = navfilter::build_bundle(lms, obs, x.rot, x.pos);
  EXPECT_LT((b.gram_rot - b.gram).norm(), 1e-11);
  EXPECT_LT(b.mean_residual.norm(), 1e-11);
  EXPECT_NEAR(navfilter::weighted_rotation_distance(b.gram, b.gram_rot), 0.0, 1e-12);
}

TEST_F(MeasurementTest, BundleRejectsBadInput) {
  const auto lms = random_cloud(5);
  NavState x;
  const auto obs = perfect_obs(lms, x);

  std::vector<LandmarkObservation> unknown = obs;
  unknown[2].id = 99;
  EXPECT_THROW(navfilter::build_bundle(lms, unknown, x.rot, x.pos),
               navfilter::UnknownLandmarkId);

  std::vector<LandmarkObservation> two(obs.begin(), obs.begin() + 2);
  EXPECT_THROW(navfilter::build_bundle(lms, two, x.rot, x.pos),
               navfilter::InsufficientFeatures);

  EXPECT_THROW(navfilter::build_bundle({}, obs, x.rot, x.pos), navfilter::EmptyLandmarkSet);

  // Observed subset collinear even though the full set is not.
  std::vector<Landmark> mixed = {{0, Vec3(0, 0, 0), 1.0}, {1, Vec3(1, 0, 0), 1.0},
                                 {2, Vec3(2, 0, 0), 1.0}, {3, Vec3(0, 1, 0), 1.0}};
  std::vector<LandmarkObservation> line_obs;
  for (int id : {0, 1, 2}) line_obs.push_back({id, mixed[id].p, 0.0});
  EXPECT_THROW(navfilter::build_bundle(mixed, line_obs, Mat3::Identity(), Vec3::Zero()),
               navfilter::InsufficientFeatures);
}

TEST_F(MeasurementTest, SynthesizeObservationExactWithoutNoise) {
  NavState x;
  x.rot = oracles::random_rotation(rng);
  x.pos = random_vec(4.0);
  const Landmark lm{3, random_vec(6.0), 1.5};
  navfilter::Rng noise_rng(7);
  const auto obs = navfilter::synthesize_observation(lm, x, ObservationNoise{}, noise_rng);
  EXPECT_EQ(obs.id, 3);
  EXPECT_LT((obs.y - x.rot.transpose() * (lm.p - x.pos)).norm(), 1e-13);
}

TEST_F(MeasurementTest, SynthesizeObservationAppliesBiasAndNoise) {
  NavState x;
  const Landmark lm{0, Vec3(1, 2, 3), 1.0};
  ObservationNoise noise;
  noise.bias[0] = Vec3(0.5, -0.5, 0.25);
  navfilter::Rng noise_rng(7);
  const auto obs = navfilter::synthesize_observation(lm, x, noise, noise_rng);
  EXPECT_LT((obs.y - (lm.p + noise.bias[0])).norm(), 1e-13);

  // Empirical standard deviation of the white part.
  noise.bias.clear();
  noise.sigma = 0.02;
  navfilter::Rng mc(123);
  double sum = 0.0, sumsq = 0.0;
  const int n = 30000;
  for (int i = 0; i < n; ++i) {
    const auto o = navfilter::synthesize_observation(lm, x, noise, mc);
    for (int k = 0; k < 3; ++k) {
      const double d = o.y(k) - lm.p(k);
      sum += d;
      sumsq += d * d;
    }
  }
  const double mean = sum / (3.0 * n);
  const double stddev = std::sqrt(sumsq / (3.0 * n) - mean * mean);
  EXPECT_NEAR(stddev, noise.sigma, 0.05 * noise.sigma);
}

TEST_F(MeasurementTest, SynthesizeObservationDeterministicPerSeed) {
  NavState x;
  const Landmark lm{0, Vec3(1, 2, 3), 1.0};
  ObservationNoise noise;
  noise.sigma = 0.1;
  navfilter::Rng a(99), b(99);
  for (int i = 0; i < 100; ++i) {
    const auto oa = navfilter::synthesize_observation(lm, x, noise, a);
    const auto ob = navfilter::synthesize_observation(lm, x, noise, b);
    EXPECT_EQ(oa.y.x(), ob.y.x());
    EXPECT_EQ(oa.y.y(), ob.y.y());
    EXPECT_EQ(oa.y.z(), ob.y.z());
  }
}

}  // namespace
