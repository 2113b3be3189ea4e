#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "generators.hpp"
#include "repcycle/datagen.hpp"
#include "repcycle/dataset_io.hpp"
#include "repcycle/error.hpp"
#include "repcycle/png_io.hpp"

namespace repcycle::data {
namespace {

const body::BodyTemplate& toy() {
  static const auto t = body::height_normalize(body::build_toy_template(16, 2, 0));
  return t;
}

const render::Camera& cam() {
  static const auto c = render::Camera::centered(64, 64, 64.0);
  return c;
}

const PosePrior& prior() {
  static const auto p = default_pose_prior(toy(), cam());
  return p;
}

PosePrior two_component_prior() {
  PosePrior p;
  p.joint_count = 16;
  p.weights = Eigen::Vector2d(0.5, 0.5);
  p.means = Eigen::MatrixXd::Zero(2, 45);
  p.means.row(1).setConstant(0.1);
  p.variances = Eigen::MatrixXd::Constant(2, 45, 0.01);
  return p;
}

TEST(PosePrior, DefaultIsValidWithEightComponents) {
  const auto& p = prior();
  p.validate();
  EXPECT_EQ(p.component_count(), 8);
  EXPECT_NEAR(p.weights.sum(), 1.0, 1e-12);
  EXPECT_GT(p.variances.minCoeff(), 0.0);
  // Unit-height body spanning 40..90% of a 64-pixel image at focal 64.
  EXPECT_NEAR(p.depth_min, 1.0 / 0.9, 1e-12);
  EXPECT_NEAR(p.depth_max, 1.0 / 0.4, 1e-12);
}

TEST(SamplePose, ZeroCovarianceReturnsMean) {
  PosePrior p = two_component_prior();
  p.weights = Eigen::VectorXd::Ones(1);
  p.means = Eigen::MatrixXd::Constant(1, 45, 0.3);
  p.variances = Eigen::MatrixXd::Zero(1, 45);
  Rng rng = derive_rng(1);
  for (int i = 0; i < 10; ++i) {
    const auto pose = sample_pose(p, rng);
    for (int j = 1; j < 16; ++j)
      for (int k = 0; k < 3; ++k) EXPECT_EQ(pose.axis_angles(j, k), 0.3);
  }
}

TEST(SamplePose, ComponentFrequenciesFollowWeights) {
  const auto p = two_component_prior();
  Rng rng = derive_rng(2);
  int first = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) first += sample_pose_with_component(p, rng).component == 0;
  EXPECT_NEAR(static_cast<double>(first) / n, 0.5, 0.02);
}

TEST(SamplePose, ReproducibleAndInsideRanges) {
  Rng a = derive_rng(3), b = derive_rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto pa = sample_pose(prior(), a);
    const auto pb = sample_pose(prior(), b);
    EXPECT_EQ(pa.axis_angles, pb.axis_angles);
    EXPECT_EQ(pa.translation, pb.translation);
    EXPECT_GE(pa.translation.z(), prior().depth_min);
    EXPECT_LE(pa.translation.z(), prior().depth_max);
  }
}

TEST(PoseBank, DeterministicAndPlausible) {
  const auto a = builtin_pose_bank(toy(), 200, 0);
  const auto b = builtin_pose_bank(toy(), 200, 0);
  ASSERT_EQ(a.size(), 200u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].axis_angles, b[i].axis_angles);
    EXPECT_LT(a[i].axis_angles.rowwise().norm().maxCoeff(), 3.2);
  }
}

TEST(MakePersonImage, DeterministicAndLabelsMatchSilhouette) {
  Rng rng = derive_rng(4);
  auto pose = sample_pose(prior(), rng);
  const auto bg = make_background(64, 64, rng);
  const auto beta = body::ShapeParams::zeros(10);
  const auto a = make_person_image(toy(), cam(), pose, beta, 17, bg);
  const auto b = make_person_image(toy(), cam(), pose, beta, 17, bg);
  EXPECT_EQ(a.image(), b.image());
  const auto eval = GroundTruthAccess::evaluation();
  const auto expected = render::rasterize(cam(), body::pose_body(toy(), beta, pose)).first;
  EXPECT_EQ(a.gt_labels(eval), expected);
  // Outside the silhouette the image is the background.
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      if (expected(y, x) == 0)
        for (int k = 0; k < 3; ++k) EXPECT_EQ(a.image()(y, x, k), bg(y, x, k));
}

TEST(MakePersonImage, AppearanceSeedChangesPixelsNotLabels) {
  Rng rng = derive_rng(5);
  const auto pose = sample_pose(prior(), rng);
  const auto bg = make_background(64, 64, rng);
  const auto beta = body::ShapeParams::zeros(10);
  const auto eval = GroundTruthAccess::evaluation();
  int differing_seeds = 0;
  for (std::uint64_t s = 1; s < 6; ++s) {
    const auto a = make_person_image(toy(), cam(), pose, beta, 100, bg);
    const auto b = make_person_image(toy(), cam(), pose, beta, 100 + s, bg);
    EXPECT_EQ(a.gt_labels(eval), b.gt_labels(eval));
    double diff = 0.0;
    int fg = 0;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        if (a.gt_labels(eval)(y, x) > 0) {
          ++fg;
          for (int k = 0; k < 3; ++k) diff += std::abs(a.image()(y, x, k) - b.image()(y, x, k));
        }
    ASSERT_GT(fg, 0);
    if (diff / (3 * fg) > 0.02) ++differing_seeds;
  }
  EXPECT_EQ(differing_seeds, 5);
}

TEST(MakePersonImage, OutOfFrame) {
  auto pose = body::PoseParams::identity(16);
  pose.translation = {50.0, 0.0, 2.0};
  try {
    make_person_image(toy(), cam(), pose, body::ShapeParams::zeros(10), 1, RgbImage(64, 64, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOutOfFrame);
  }
}

std::vector<SampleRecord> small_dataset(int samples, int sequences, std::uint64_t seed) {
  DatasetConfig cfg;
  cfg.samples = samples;
  cfg.sequences = sequences;
  cfg.seed = seed;
  return generate_dataset(cfg, toy(), cam(), prior());
}

TEST(GenerateDataset, PureFunctionOfConfig) {
  const auto a = small_dataset(30, 6, 9);
  const auto b = small_dataset(30, 6, 9);
  ASSERT_EQ(a.size(), 30u);
  const auto eval = GroundTruthAccess::evaluation();
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].image(), b[i].image());
    EXPECT_EQ(a[i].gt_labels(eval), b[i].gt_labels(eval));
    EXPECT_EQ(a[i].sequence_id(), b[i].sequence_id());
  }
  std::set<int> seqs;
  for (const auto& r : a) seqs.insert(r.sequence_id());
  EXPECT_EQ(seqs.size(), 6u);
}

TEST(SplitUnpaired, DisjointBalancedDeterministic) {
  const auto records = small_dataset(40, 10, 1);
  Rng r1 = derive_rng(7), r2 = derive_rng(7);
  const auto s1 = split_unpaired(records, r1);
  const auto s2 = split_unpaired(records, r2);
  EXPECT_EQ(s1.a_sequences, s2.a_sequences);
  std::set<int> a(s1.a_sequences.begin(), s1.a_sequences.end());
  for (int id : s1.b_sequences) EXPECT_EQ(a.count(id), 0u);
  EXPECT_LE(std::abs(static_cast<int>(s1.a_sequences.size()) - static_cast<int>(s1.b_sequences.size())), 1);
  for (const auto& r : s1.a_records) EXPECT_TRUE(a.count(r.sequence_id()));
  for (const auto& r : s1.b_records) EXPECT_FALSE(a.count(r.sequence_id()));
  EXPECT_EQ(s1.b_bodies.size(), s1.b_records.size());
  EXPECT_EQ(s1.a_records.size() + s1.b_records.size(), records.size());
}

TEST(SplitUnpaired, SingleSequenceCannotSplit) {
  const auto records = small_dataset(4, 1, 1);
  Rng rng = derive_rng(1);
  try {
    split_unpaired(records, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCannotSplit);
  }
}

TEST(Augment, IdentityAndDoubleMirror) {
  const auto records = small_dataset(3, 1, 2);
  const auto eval = GroundTruthAccess::evaluation();
  const auto& r = records[0];
  const auto same = augment(r, AugmentTransform{});
  EXPECT_EQ(same.image(), r.image());
  EXPECT_EQ(same.gt_labels(eval), r.gt_labels(eval));
  AugmentTransform mirror;
  mirror.mirror = true;
  const auto twice = augment(augment(r, mirror), mirror);
  EXPECT_EQ(twice.image(), r.image());
  EXPECT_EQ(twice.gt_labels(eval), r.gt_labels(eval));
}

TEST(Augment, MirrorSwapsLeftRightCounts) {
  const auto records = small_dataset(6, 2, 3);
  const auto eval = GroundTruthAccess::evaluation();
  AugmentTransform mirror;
  mirror.mirror = true;
  for (const auto& r : records) {
    const auto m = augment(r, mirror);
    std::array<int, 15> before{}, after{};
    for (auto v : r.gt_labels(eval).data()) ++before[v];
    for (auto v : m.gt_labels(eval).data()) ++after[v];
    for (int l = 0; l <= 14; ++l) EXPECT_EQ(before[l], after[body::mirror_part(l)]) << "label " << l;
  }
}

TEST(Augment, SameWarpOnImageAndLabels) {
  const auto records = small_dataset(2, 1, 4);
  const auto eval = GroundTruthAccess::evaluation();
  Rng rng = derive_rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    AugmentTransform t = random_transform(rng);
    t.mirror = false;
    const auto a = augment(records[0], t);
    EXPECT_FALSE(a.has_gt_body());
    // Labels move with the image: the warped label map equals the warp of the
    // original labels computed independently.
    EXPECT_EQ(a.gt_labels(eval), warp_labels(records[0].gt_labels(eval), t));
    EXPECT_EQ(a.image(), warp_image(records[0].image(), t));
  }
}

TEST(PasteAugment, ForegroundPreservedBackgroundReplaced) {
  const auto records = small_dataset(2, 1, 5);
  const auto eval = GroundTruthAccess::evaluation();
  Rng rng = derive_rng(9);
  const auto bg = make_background(64, 64, rng);
  const auto& r = records[0];
  const auto p = paste_augment(r, bg, eval);
  const auto& labels = r.gt_labels(eval);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      for (int k = 0; k < 3; ++k)
        EXPECT_EQ(p.image()(y, x, k), labels(y, x) > 0 ? r.image()(y, x, k) : bg(y, x, k));
  EXPECT_EQ(p.gt_labels(eval), labels);
}

TEST(PasteAugment, OriginalBackgroundIsIdentity) {
  Rng rng = derive_rng(10);
  const auto pose = sample_pose(prior(), rng);
  const auto bg = make_background(64, 64, rng);
  const auto r = make_person_image(toy(), cam(), pose, body::ShapeParams::zeros(10), 3, bg);
  EXPECT_EQ(paste_augment(r, bg, GroundTruthAccess::evaluation()).image(), r.image());
}

TEST(MarkSupervised, EveryKthAndNested) {
  std::vector<SampleRecord> records(10000, SampleRecord(RgbImage(1, 1, 3), LabelMap(1, 1), std::nullopt, 0));
  mark_supervised(records, 1);
  for (const auto& r : records) EXPECT_TRUE(r.supervised());
  mark_supervised(records, 500);
  std::set<std::size_t> k500, k100;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].supervised()) k500.insert(i);
  EXPECT_EQ(k500.size(), 20u);
  mark_supervised(records, 100);
  for (std::size_t i = 0; i < records.size(); ++i)
    if (records[i].supervised()) k100.insert(i);
  for (auto i : k500) EXPECT_TRUE(k100.count(i));
  EXPECT_THROW(mark_supervised(records, 0), Error);
}

TEST(GroundTruthGuard, TrainingAccessNeedsFlag) {
  auto records = small_dataset(4, 2, 6);
  const auto train = GroundTruthAccess::training();
  try {
    (void)records[1].gt_labels(train);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnpairedDiscipline);
  }
  EXPECT_THROW((void)records[1].gt_body(train), Error);
  mark_supervised(records, 2);
  EXPECT_NO_THROW((void)records[0].gt_labels(train));
  EXPECT_THROW((void)records[1].gt_labels(train), Error);
  EXPECT_NO_THROW((void)records[1].gt_labels(GroundTruthAccess::evaluation()));
}

TEST(Backgrounds, KindsAndDirectoryLoader) {
  Rng rng = derive_rng(11);
  const auto flat = make_background(BackgroundKind::kFlat, 16, 16, rng);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      for (int k = 0; k < 3; ++k) EXPECT_EQ(flat(y, x, k), flat(0, 0, k));
  const auto noise = make_background(BackgroundKind::kNoise, 16, 16, rng);
  EXPECT_NE(noise(0, 0, 0), noise(15, 15, 0));
  const auto dir = std::filesystem::temp_directory_path() / "repcycle_bg";
  std::filesystem::create_directories(dir);
  io::write_png(dir / "b.png", noise);
  const auto loaded = load_backgrounds(dir, 8, 8);
  ASSERT_EQ(loaded.size(), 1u);
  EXPECT_EQ(loaded[0].height(), 8);
  std::filesystem::remove_all(dir);
}

TEST(DatasetIo, RoundTrip) {
  Dataset ds;
  ds.records = small_dataset(6, 2, 12);
  mark_supervised(ds.records, 3);
  ds.camera = cam();
  ds.config.samples = 6;
  ds.config.sequences = 2;
  ds.a_sequences = {0};
  ds.b_sequences = {1};
  const auto dir = std::filesystem::temp_directory_path() / "repcycle_ds";
  std::filesystem::remove_all(dir);
  save_dataset(dir, ds);
  const auto back = load_dataset(dir);
  ASSERT_EQ(back.records.size(), 6u);
  const auto eval = GroundTruthAccess::evaluation();
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(back.records[i].image(), ds.records[i].image());
    EXPECT_EQ(back.records[i].gt_labels(eval), ds.records[i].gt_labels(eval));
    EXPECT_EQ(back.records[i].supervised(), ds.records[i].supervised());
    EXPECT_EQ(back.records[i].gt_body(eval).pose.axis_angles, ds.records[i].gt_body(eval).pose.axis_angles);
  }
  EXPECT_EQ(back.a_sequences, ds.a_sequences);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace repcycle::data
