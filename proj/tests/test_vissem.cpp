#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "adsrank/vissem.hpp"
#include "adsrank/synth.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace adsrank;
using adsrank::testing::vec;

TEST(AggregatePatches, MeanThenConcat) {
  VisualFeatures f;
  f.object_patches = {vec({2, 0}), vec({0, 2})};
  f.symbol_patches = {vec({4})};
  EXPECT_EQ(aggregate_patches(f), vec({1, 1, 4}));
  EXPECT_EQ(aggregate_patches(f, 2, 1), vec({1, 1, 4}));
}

TEST(AggregatePatches, EmptyChannelIsZeroBlock) {
  VisualFeatures f;
  f.symbol_patches = {vec({4})};
  EXPECT_EQ(aggregate_patches(f, 2, 1), vec({0, 0, 4}));
}

TEST(AggregatePatches, InconsistentLengths) {
  VisualFeatures f;
  f.object_patches = {vec({1, 2}), vec({1, 2, 3})};
  EXPECT_THROW(aggregate_patches(f), DimensionError);
  EXPECT_THROW(aggregate_patches(f, 2, 0), DimensionError);
}

namespace {

ProjectionModel identity_model(ProjectionMode mode, std::size_t visual, std::size_t word,
                               std::size_t embed) {
  ProjectionModel m;
  m.mode = mode;
  m.dims = {visual, 0, word, embed};
  if (mode != ProjectionMode::partitioned) m.visual_proj = Eigen::MatrixXd::Identity(embed, visual);
  if (mode == ProjectionMode::fused) m.fusion_proj = Eigen::MatrixXd::Identity(embed, embed + word);
  return m;
}

}  // namespace

TEST(EmbedImage, PlainIdentityNormalizes) {
  auto m = identity_model(ProjectionMode::plain, 2, 2, 2);
  auto z = embed_image(m, vec({3, 4})).joint;
  EXPECT_NEAR(z[0], 0.6, 1e-15);
  EXPECT_NEAR(z[1], 0.8, 1e-15);
}

// c = [P_v v ; t] = (1, 0, 0, 1); identity fusion keeps c, normalization
// divides by sqrt(2).
TEST(EmbedImage, FusedConcatThenNormalize) {
  ProjectionModel m;
  m.mode = ProjectionMode::fused;
  m.dims = {2, 0, 2, 4};
  m.visual_proj = Eigen::MatrixXd::Zero(4, 2);
  m.visual_proj(0, 0) = 1.0;  // P_v v = (1,0,0,0) for v = (1,0)
  m.fusion_proj = Eigen::MatrixXd::Zero(4, 6);
  m.fusion_proj(0, 0) = 1.0;  // picks (P_v v)_0
  m.fusion_proj(3, 5) = 1.0;  // picks t_1
  auto z = embed_image(m, vec({1, 0}), vec({0, 1})).joint;
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(z[0], r, 1e-15);
  EXPECT_NEAR(z[1], 0.0, 1e-15);
  EXPECT_NEAR(z[2], 0.0, 1e-15);
  EXPECT_NEAR(z[3], r, 1e-15);
}

TEST(EmbedImage, FusedMissingTextIsZeroBlock) {
  Rng rng(5);
  auto m = init_model(ProjectionMode::fused, {3, 2, 4, 4}, 0.2, {});
  auto v = oracle::random_vector(rng, 5);
  auto with_zero = embed_image(m, v, SemVector(SemVector::Zero(4))).joint;
  auto without = embed_image(m, v, std::nullopt).joint;
  EXPECT_TRUE(with_zero.isApprox(without, 1e-15));
}

TEST(EmbedImage, PartitionedEqualHeadsGiveEqualEmbeddings) {
  auto m = init_model(ProjectionMode::partitioned, {3, 2, 4, 4}, 0.2, {});
  m.reason_proj = m.action_proj;
  auto e = embed_image(m, vec({1, -2, 0.5, 3, 1}));
  EXPECT_EQ(e.action, e.reason);
}

TEST(EmbedImage, DimensionMismatch) {
  auto m = init_model(ProjectionMode::fused, {3, 2, 4, 4}, 0.2, {});
  EXPECT_THROW(embed_image(m, vec({1, 2, 3})), DimensionError);
  EXPECT_THROW(embed_image(m, vec({1, 2, 3, 4, 5}), vec({1, 2})), DimensionError);
}

TEST(EmbedImage, UnitNormAllModes) {
  Rng rng(9);
  for (auto mode : {ProjectionMode::plain, ProjectionMode::fused, ProjectionMode::partitioned,
                    ProjectionMode::partitioned_fused}) {
    for (int trial = 0; trial < 50; ++trial) {
      TrainConfig cfg;
      cfg.seed = rng.next_u64();
      auto m = init_model(mode, {4, 3, 5, 5}, 0.2, cfg);
      auto e = embed_image(m, oracle::random_vector(rng, 7, 10.0), oracle::random_vector(rng, 5));
      if (is_partitioned(mode)) {
        EXPECT_NEAR(e.action.norm(), 1.0, 1e-9);
        EXPECT_NEAR(e.reason.norm(), 1.0, 1e-9);
      } else {
        EXPECT_NEAR(e.joint.norm(), 1.0, 1e-9);
      }
    }
  }
}

TEST(TripletLoss, SatisfiedMargin) {
  EXPECT_EQ(triplet_loss(vec({1, 0}), vec({1, 0}), {vec({0, 1})}, 0.2), 0.0);
}

TEST(TripletLoss, ActiveHinge) {
  EXPECT_NEAR(triplet_loss(vec({1, 0}), vec({0, 1}), {vec({1, 0})}, 0.2), std::sqrt(2.0) + 0.2,
              1e-15);
  EXPECT_NEAR(triplet_loss(vec({1, 0}), vec({0, 1}), {vec({1, 0})}, 0.2), 1.6142135624, 1e-9);
}

TEST(TripletLoss, DegenerateTieEqualsMargin) {
  EXPECT_DOUBLE_EQ(triplet_loss(vec({1, 0}), vec({1, 0}), {vec({1, 0})}, 0.2), 0.2);
}

TEST(TripletLoss, AveragesOverNegatives) {
  const double l = triplet_loss(vec({1, 0}), vec({1, 0}), {vec({1, 0}), vec({0, 1})}, 0.2);
  EXPECT_DOUBLE_EQ(l, 0.1);
}

TEST(TripletLoss, NoNegativesIsError) {
  EXPECT_THROW(triplet_loss(vec({1, 0}), vec({1, 0}), {}, 0.2), ConfigError);
}

TEST(TripletLoss, NonNegativeAndZeroIffMarginsCleared) {
  Rng rng(21);
  for (int i = 0; i < 300; ++i) {
    auto z = oracle::random_unit(rng, 4);
    auto p = oracle::random_unit(rng, 4);
    std::vector<SemVector> negs;
    for (std::size_t k = 0, n = 1 + rng.index(4); k < n; ++k) negs.push_back(oracle::random_unit(rng, 4));
    const double beta = rng.uniform(0.01, 1.0);
    const double l = triplet_loss(z, p, negs, beta);
    EXPECT_GE(l, 0.0);
    bool all_clear = true;
    for (const auto& n : negs) all_clear &= ((z - p).norm() - (z - n).norm() + beta) <= 0.0;
    EXPECT_EQ(l == 0.0, all_clear);
  }
}

TEST(LossGradient, ZeroWhenEveryMarginClearedStrictly) {
  // Plain identity projection; each image already sits on its positive and
  // negatives are orthogonal, so every hinge is at -sqrt(2) + 0.2 < 0.
  auto m = identity_model(ProjectionMode::plain, 3, 3, 3);
  m.margin = 0.2;
  std::vector<TrainingSample> batch(3);
  Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(3, 3);
  for (int i = 0; i < 3; ++i) {
    batch[i].visual = 2.0 * eye.col(i);
    batch[i].joint.positive = eye.col(i);
    for (int j = 0; j < 3; ++j) {
      if (j != i) batch[i].joint.negatives.push_back(eye.col(j));
    }
  }
  auto lg = loss_and_gradient(m, batch);
  EXPECT_EQ(lg.loss, 0.0);
  EXPECT_EQ(lg.gradient.visual_proj.norm(), 0.0);
}

TEST(LossGradient, MatchesFiniteDifferences) {
  Rng rng(1234);
  for (auto mode : {ProjectionMode::plain, ProjectionMode::fused, ProjectionMode::partitioned,
                    ProjectionMode::partitioned_fused}) {
    for (std::size_t embed : {2u, 4u, 8u}) {
      for (std::size_t k : {2u, 4u}) {
        auto [model, batch] = oracle::random_instance(rng, mode, embed, k);
        auto res = oracle::check_gradient(model, batch);
        EXPECT_LE(res.max_rel_error, 1e-4) << to_string(mode) << " embed " << embed << " K " << k;
        EXPECT_GT(res.checked, 0u);
      }
    }
  }
}

TEST(LossGradient, DuplicatingBatchKeepsGradient) {
  Rng rng(77);
  auto [model, batch] = oracle::random_instance(rng, ProjectionMode::partitioned_fused, 4, 3);
  auto doubled = batch;
  doubled.insert(doubled.end(), batch.begin(), batch.end());
  auto a = loss_and_gradient(model, batch);
  auto b = loss_and_gradient(model, doubled);
  EXPECT_NEAR(a.loss, b.loss, 1e-14);
  EXPECT_TRUE(a.gradient.visual_proj.isApprox(b.gradient.visual_proj, 1e-12));
  EXPECT_TRUE(a.gradient.action_proj.isApprox(b.gradient.action_proj, 1e-12));
  EXPECT_TRUE(a.gradient.reason_proj.isApprox(b.gradient.reason_proj, 1e-12));
}

TEST(LossGradient, LossMatchesReferenceForward) {
  Rng rng(8);
  for (auto mode : {ProjectionMode::plain, ProjectionMode::fused, ProjectionMode::partitioned,
                    ProjectionMode::partitioned_fused}) {
    auto [model, batch] = oracle::random_instance(rng, mode, 4, 4);
    EXPECT_NEAR(batch_loss(model, batch), oracle::batch_loss(model, batch), 1e-12);
  }
}

TEST(LossGradient, EmptyBatchAndMissingNegatives) {
  auto m = init_model(ProjectionMode::plain, {2, 1, 2, 2}, 0.2, {});
  EXPECT_THROW(loss_gradient(m, {}), ConfigError);
  TrainingSample s;
  s.visual = vec({1, 2, 3});
  s.joint.positive = vec({1, 0});
  EXPECT_THROW(loss_gradient(m, {s}), ConfigError);
}

namespace {

SynthConfig small_synth() {
  SynthConfig c;
  c.num_images = 60;
  c.seed = 7;
  return c;
}

}  // namespace

TEST(Train, ZeroEpochsReturnsInitialization) {
  auto ds = generate(small_synth());
  TrainConfig cfg;
  cfg.epochs = 0;
  auto m = train(ds.records, ds.embeddings, cfg);
  EXPECT_TRUE(m.loss_trace.empty());
  auto init = init_model(cfg.mode, m.dims, cfg.margin, cfg);
  EXPECT_EQ(m.visual_proj, init.visual_proj);
}

TEST(Train, DeterministicGivenSeed) {
  auto ds = generate(small_synth());
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.mode = ProjectionMode::partitioned_fused;
  auto a = train(ds.records, ds.embeddings, cfg);
  auto b = train(ds.records, ds.embeddings, cfg);
  EXPECT_EQ(a.visual_proj, b.visual_proj);
  EXPECT_EQ(a.action_proj, b.action_proj);
  EXPECT_EQ(a.reason_proj, b.reason_proj);
  EXPECT_EQ(a.loss_trace, b.loss_trace);
}

TEST(Train, DifferentSeedsDiffer) {
  auto ds = generate(small_synth());
  TrainConfig a_cfg, b_cfg;
  a_cfg.epochs = b_cfg.epochs = 2;
  b_cfg.seed = 8;
  EXPECT_NE(train(ds.records, ds.embeddings, a_cfg).visual_proj,
            train(ds.records, ds.embeddings, b_cfg).visual_proj);
}

TEST(Train, LossDecreasesOnSyntheticData) {
  auto ds = generate(small_synth());
  TrainConfig cfg;
  cfg.epochs = 30;
  auto m = train(ds.records, ds.embeddings, cfg);
  ASSERT_EQ(m.loss_trace.size(), 30u);
  EXPECT_LT(m.loss_trace.back(), m.loss_trace.front());
}

TEST(Train, Errors) {
  auto ds = generate(small_synth());
  TrainConfig cfg;
  cfg.embed_dim = ds.embeddings.dim() + 1;
  EXPECT_THROW(train(ds.records, ds.embeddings, cfg), ConfigError);

  std::vector<ImageRecord> unlabeled = ds.records;
  for (auto& r : unlabeled) {
    for (auto& s : r.statements) s.label = Label::negative;
  }
  EXPECT_THROW(train(unlabeled, ds.embeddings, TrainConfig{}), ConfigError);

  TrainConfig huge;
  huge.learning_rate = std::numeric_limits<double>::infinity();
  huge.epochs = 3;
  EXPECT_THROW(train(ds.records, ds.embeddings, huge), DivergenceError);
}

// Identity projection with v equal to the positive statement embedding and
// orthogonal topics between batch members: loss is zero at initialization.
TEST(Train, SanityFixtureZeroLossAtIdentity) {
  auto m = identity_model(ProjectionMode::plain, 4, 4, 4);
  m.margin = 0.2;
  Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(4, 4);
  std::vector<TrainingSample> batch(4);
  for (int i = 0; i < 4; ++i) {
    batch[i].visual = eye.col(i);
    batch[i].joint.positive = eye.col(i);
    for (int j = 0; j < 4; ++j) {
      if (j != i) batch[i].joint.negatives.push_back(eye.col(j));
    }
  }
  EXPECT_EQ(batch_loss(m, batch), 0.0);
}

// Regression fixture: seed-7 generator (200 images), plain mode, 50 epochs at
// lr 0.01. Values recorded from this implementation.
TEST(Train, SeedSevenLossTraceFixture) {
  auto ds = generate(SynthConfig{});
  auto m = train(ds.records, ds.embeddings, TrainConfig{});
  ASSERT_EQ(m.loss_trace.size(), 50u);
  EXPECT_NEAR(m.loss_trace[0], 0.21808051149927987, 1e-9);
  EXPECT_NEAR(m.loss_trace[1], 0.20489581749970529, 1e-9);
  EXPECT_NEAR(m.loss_trace[9], 0.12209415359697276, 1e-9);
  EXPECT_NEAR(m.loss_trace[49], 0.050545466366607152, 1e-9);
  EXPECT_LE(m.loss_trace.back(), 0.5 * m.loss_trace.front());
}
