#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "ddcnn/rng.hpp"
#include "ddcnn/error.hpp"
#include "ddcnn/model.hpp"
#include "textures.hpp"

using namespace ddcnn;
namespace fs = std::filesystem;

namespace {

template <typename Fn>
void expect_errc(Errc code, Fn fn) {
  try {
    fn();
    FAIL() << "expected " << errc_name(code);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), code) << e.what();
  }
}

ModelConfig small_config(int channels = 3) {
  ModelConfig cfg;
  cfg.image_channels = channels;
  cfg.layers = 4;
  cfg.hidden_channels = 8;
  return cfg;
}

// Random running statistics so folding has something to absorb.
void populate_stats(DenoiserModel& m, std::uint64_t seed) {
  Rng rng(seed);
  for (auto& b : m.net.blocks()) {
    if (!b.bn) continue;
    for (auto& v : b.bn->running_mean) v = static_cast<float>(rng.uniform(-0.2, 0.2));
    for (auto& v : b.bn->running_var) v = static_cast<float>(rng.uniform(0.5, 2.0));
    for (auto& v : b.bn->gamma) v = static_cast<float>(rng.uniform(0.5, 1.5));
    for (auto& v : b.bn->beta) v = static_cast<float>(rng.uniform(-0.2, 0.2));
    b.bn->tracked_batches = 1;
  }
}

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "ddcnn_test_model";
  fs::create_directories(dir);
  return dir / name;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(SpaceToDepth, FixedSubImageOrder) {
  const float a = 0.1f, b = 0.2f, c = 0.3f, d = 0.4f;
  const auto t = space_to_depth(Image(2, 2, 1, std::vector<float>{a, b, c, d}));
  ASSERT_EQ(t.shape_string(), "(1,4,1,1)");
  EXPECT_EQ(t(0, 0, 0, 0), a);
  EXPECT_EQ(t(0, 1, 0, 0), b);
  EXPECT_EQ(t(0, 2, 0, 0), c);
  EXPECT_EQ(t(0, 3, 0, 0), d);
  EXPECT_EQ(depth_to_space(t), Image(2, 2, 1, std::vector<float>{a, b, c, d}));
}

TEST(SpaceToDepth, FullSizeShape) {
  EXPECT_EQ(space_to_depth(Image(512, 512, 3)).shape_string(), "(1,12,256,256)");
}

TEST(SpaceToDepth, Errors) {
  expect_errc(Errc::OddDimensions, [] { space_to_depth(Image(3, 4, 1)); });
  expect_errc(Errc::BadChannelCount, [] { depth_to_space(Tensor4<float>(1, 6, 2, 2)); });
}

TEST(SpaceToDepthProperty, RoundTripBitExact) {
  std::uint64_t seed = 0;
  for (int h = 2; h <= 64; h += 2) {
    for (int w : {2, 10, 64}) {
      for (int c : {1, 3}) {
        const Image img = fixtures::random_image(h, w, c, ++seed);
        EXPECT_EQ(depth_to_space(space_to_depth(img)), img) << h << "x" << w << "x" << c;
      }
    }
  }
}

TEST(SpaceToDepthProperty, BatchedTensorRoundTrip) {
  Tensor4<double> x(3, 2, 6, 4);
  Rng rng(1);
  for (double& v : x.values()) v = rng.uniform(-2, 2);
  EXPECT_EQ(depth_to_space_tensor(space_to_depth(x)), x);
}

TEST(AssembleInput, ShapesAndLevelChannel) {
  EXPECT_EQ(assemble_input(Image(4, 4, 1), LevelMap::from_level(2)).shape_string(), "(1,5,2,2)");
  EXPECT_EQ(assemble_input(Image(512, 512, 3), LevelMap::from_level(1)).shape_string(), "(1,13,256,256)");
  const auto t = assemble_input(fixtures::random_image(6, 6, 3, 1), LevelMap::from_value(0.0f));
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) EXPECT_EQ(t(0, 12, y, x), 0.0f);
  const auto l5 = assemble_input(Image(2, 2, 3), LevelMap::from_level(5));
  EXPECT_EQ(l5(0, 12, 0, 0), 1.0f);
  EXPECT_EQ(LevelMap::from_level(3).value, 0.5f);
  EXPECT_THROW(LevelMap::from_level(0), Error);
  EXPECT_THROW(LevelMap::from_value(1.5f), Error);
}

TEST(DenoiserModel, DefaultConfigurationLayout) {
  const auto m = DenoiserModel::create(DistortionType::Fade, ModelConfig{}, 1);
  EXPECT_EQ(m.layers(), 17);
  EXPECT_EQ(m.channels_in(), 13);
  EXPECT_EQ(m.channels_out(), 12);
  const auto& blocks = m.net.blocks();
  EXPECT_FALSE(blocks.front().bn.has_value());
  EXPECT_TRUE(blocks.front().relu);
  for (std::size_t i = 1; i + 1 < blocks.size(); ++i) {
    EXPECT_TRUE(blocks[i].bn.has_value());
    EXPECT_TRUE(blocks[i].relu);
    EXPECT_EQ(blocks[i].conv.c_out, 64);
  }
  EXPECT_FALSE(blocks.back().bn.has_value());
  EXPECT_FALSE(blocks.back().relu);
  EXPECT_NO_THROW(m.validate());
}

TEST(DenoiserModel, CreateIsDeterministic) {
  const auto a = DenoiserModel::create(DistortionType::Tear, small_config(), 4);
  const auto b = DenoiserModel::create(DistortionType::Tear, small_config(), 4);
  EXPECT_EQ(serialize_model(a), serialize_model(b));
}

TEST(Forward, ZeroModelGivesBlackImage) {
  auto m = DenoiserModel::create(DistortionType::GaussianNoise, small_config(), 1);
  auto& head = m.net.blocks().back().conv;
  std::fill(head.weight.begin(), head.weight.end(), 0.0f);
  std::fill(head.bias.begin(), head.bias.end(), 0.0f);
  const Image out = forward(m, fixtures::random_image(8, 8, 3, 2), LevelMap::from_level(3));
  for (float s : out.samples()) EXPECT_EQ(s, 0.0f);
}

TEST(Forward, DeterministicAndSizePreserving) {
  const auto m = DenoiserModel::create(DistortionType::GaussianNoise, small_config(), 1);
  for (auto [h, w] : {std::pair{8, 8}, std::pair{6, 10}, std::pair{2, 4}}) {
    const Image img = fixtures::random_image(h, w, 3, h * w);
    const Image a = forward(m, img, LevelMap::from_level(2));
    EXPECT_EQ(a, forward(m, img, LevelMap::from_level(2)));
    EXPECT_TRUE(a.same_shape(img));
  }
  expect_errc(Errc::ShapeMismatch, [&] { forward(m, Image(4, 4, 1), LevelMap::from_level(1)); });
}

TEST(RestoreImage, OddSizesKeepDimensions) {
  const auto m = DenoiserModel::create(DistortionType::GaussianNoise, small_config(1), 2);
  for (auto [h, w] : {std::pair{7, 9}, std::pair{5, 6}, std::pair{8, 3}, std::pair{1, 1}}) {
    const Image out = restore_image(m, fixtures::random_image(h, w, 1, 3), LevelMap::from_level(1));
    EXPECT_EQ(out.height(), h);
    EXPECT_EQ(out.width(), w);
  }
  const Image even = fixtures::random_image(6, 8, 1, 4);
  EXPECT_EQ(restore_image(m, even, LevelMap::from_level(4)), forward(m, even, LevelMap::from_level(4)));
}

TEST(FoldBatchNorm, EvalEquivalentOnRandomInputs) {
  ModelConfig cfg;
  cfg.layers = 17;
  cfg.hidden_channels = 16;
  auto m = DenoiserModel::create(DistortionType::GaussianNoise, cfg, 3);
  populate_stats(m, 4);
  const auto folded = fold_batchnorm(m);
  EXPECT_TRUE(folded.bn_folded);
  for (const auto& b : folded.net.blocks()) EXPECT_FALSE(b.bn.has_value());
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const auto x = assemble_input(fixtures::random_image(16, 16, 3, 100 + i), LevelMap::from_level(1 + i % 5));
    const auto a = m.net.infer(x);
    const auto b = folded.net.infer(x);
    for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, double(std::abs(a.values()[k] - b.values()[k])));
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(FoldBatchNorm, IdentityStatsScaleByEpsilonOnly) {
  auto m = DenoiserModel::create(DistortionType::GaussianNoise, small_config(), 5);
  for (auto& b : m.net.blocks())
    if (b.bn) b.bn->tracked_batches = 1;
  const auto folded = fold_batchnorm(m);
  const double scale = 1.0 / std::sqrt(1.0 + 1e-5);
  for (std::size_t i = 0; i < m.net.blocks().size(); ++i) {
    const auto& before = m.net.blocks()[i];
    const auto& after = folded.net.blocks()[i];
    const double s = before.bn ? scale : 1.0;
    for (std::size_t k = 0; k < before.conv.weight.size(); ++k) {
      EXPECT_NEAR(after.conv.weight[k], before.conv.weight[k] * s, 1e-7);
    }
  }
}

TEST(FoldBatchNorm, Errors) {
  auto m = DenoiserModel::create(DistortionType::GaussianNoise, small_config(), 5);
  expect_errc(Errc::UnpopulatedStats, [&] { fold_batchnorm(m); });
  populate_stats(m, 1);
  const auto folded = fold_batchnorm(m);
  expect_errc(Errc::AlreadyFolded, [&] { fold_batchnorm(folded); });
}

TEST(Checkpoint, RoundTripIsBitIdentical) {
  auto m = DenoiserModel::create(DistortionType::Scratch, small_config(), 6);
  populate_stats(m, 2);
  const auto path = temp_file("rt.ddc");
  save_model(m, path);
  const auto loaded = load_model(path);
  EXPECT_EQ(loaded.dtype, DistortionType::Scratch);
  const Image img = fixtures::random_image(10, 12, 3, 7);
  EXPECT_EQ(forward(loaded, img, LevelMap::from_level(3)), forward(m, img, LevelMap::from_level(3)));
  EXPECT_EQ(serialize_model(loaded), read_bytes(path));
  const auto info = read_checkpoint_info(path);
  EXPECT_EQ(info.dtype, DistortionType::Scratch);
  EXPECT_EQ(info.layers, 4);
  EXPECT_EQ(info.hidden_channels, 8);
}

TEST(Checkpoint, FoldedRoundTrip) {
  auto m = DenoiserModel::create(DistortionType::Swirl, small_config(), 6);
  populate_stats(m, 3);
  const auto folded = fold_batchnorm(m);
  const auto loaded = deserialize_model(serialize_model(folded));
  EXPECT_TRUE(loaded.bn_folded);
  EXPECT_EQ(serialize_model(loaded), serialize_model(folded));
}

TEST(Checkpoint, CorruptionIsDetected) {
  const auto bytes = serialize_model(DenoiserModel::create(DistortionType::Fade, small_config(), 1));
  expect_errc(Errc::ChecksumMismatch, [&] { deserialize_model(bytes.substr(0, bytes.size() - 10)); });
  expect_errc(Errc::ChecksumMismatch, [&] { deserialize_model(bytes.substr(0, 6)); });
  std::string flipped = bytes;
  flipped[flipped.size() / 2] ^= 0x5A;
  expect_errc(Errc::ChecksumMismatch, [&] { deserialize_model(flipped); });
  std::string future = bytes;
  future[4] = 2;
  expect_errc(Errc::FormatVersionMismatch, [&] { deserialize_model(future); });
  std::string wrong_magic = bytes;
  wrong_magic[0] = 'X';
  expect_errc(Errc::UnsupportedFormat, [&] { deserialize_model(wrong_magic); });
  expect_errc(Errc::FileNotFound, [] { load_model("/nonexistent/model.ddc"); });
}

TEST(Checkpoint, HugeHeaderLengthIsRejected) {
  std::string bytes = serialize_model(DenoiserModel::create(DistortionType::Fade, small_config(), 1));
  bytes[8] = bytes[9] = bytes[10] = bytes[11] = static_cast<char>(0xFF);
  const auto path = temp_file("huge.ddc");
  std::ofstream(path, std::ios::binary) << bytes;
  EXPECT_THROW(read_checkpoint_info(path), Error);
  EXPECT_THROW(load_model(path), Error);
}
