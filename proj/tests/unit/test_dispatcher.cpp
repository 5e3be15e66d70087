#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <thread>

#include "ddcnn/dispatcher.hpp"
#include "ddcnn/error.hpp"
#include "ddcnn/metrics.hpp"
#include "ddcnn/trainer.hpp"
#include "textures.hpp"

using namespace ddcnn;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_model() {
  ModelConfig cfg;
  cfg.layers = 3;
  cfg.hidden_channels = 4;
  return cfg;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ddcnn_test_dispatch_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// One untrained checkpoint per type.
fs::path write_all_specialists(const fs::path& dir) {
  for (const auto t : all_distortion_types()) {
    save_model(DenoiserModel::create(t, tiny_model(), 100 + distortion_id(t)),
               dir / (std::string(distortion_name(t)) + ".ddc"));
  }
  return dir;
}

}  // namespace

TEST(Registry, RoutesToRegisteredSpecialist) {
  const auto dir = fresh_dir("route");
  const auto model = DenoiserModel::create(DistortionType::GaussianNoise, tiny_model(), 1);
  save_model(model, dir / "g.ddc");
  DenoiserRegistry reg;
  reg.register_specialist(DistortionType::GaussianNoise, dir / "g.ddc");
  const Image img = fixtures::random_image(8, 8, 3, 1);
  const auto spec = DistortionSpec::make(DistortionType::GaussianNoise, 2, 0);
  EXPECT_EQ(reg.restore(img, spec), restore_image(model, img, LevelMap::from_level(2)));
  EXPECT_EQ(reg.invocation_count(DistortionType::GaussianNoise), 1u);
  EXPECT_EQ(reg.specialist(DistortionType::GaussianNoise)->dtype, DistortionType::GaussianNoise);
}

TEST(Registry, TagMismatchOnRegister) {
  const auto dir = fresh_dir("tag");
  save_model(DenoiserModel::create(DistortionType::SpeckleNoise, tiny_model(), 1), dir / "s.ddc");
  DenoiserRegistry reg;
  try {
    reg.register_specialist(DistortionType::GaussianNoise, dir / "s.ddc");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TagMismatch);
  }
  EXPECT_EQ(reg.size(), 0u);
  EXPECT_THROW(reg.register_model(DistortionType::Fade, DenoiserModel::create(DistortionType::Tear, tiny_model(), 1)),
               Error);
}

TEST(Registry, ReRegisterReplaces) {
  DenoiserRegistry reg;
  const auto a = DenoiserModel::create(DistortionType::Fade, tiny_model(), 1);
  const auto b = DenoiserModel::create(DistortionType::Fade, tiny_model(), 2);
  reg.register_model(DistortionType::Fade, a);
  reg.register_model(DistortionType::Fade, b);
  EXPECT_EQ(reg.size(), 1u);
  const Image img = fixtures::random_image(6, 6, 3, 2);
  EXPECT_EQ(reg.restore(img, DistortionSpec::make(DistortionType::Fade, 1, 0)),
            restore_image(b, img, LevelMap::from_level(1)));
}

TEST(Registry, NoSpecialistNamesType) {
  DenoiserRegistry reg;
  reg.register_model(DistortionType::GaussianNoise, DenoiserModel::create(DistortionType::GaussianNoise, tiny_model(), 1));
  try {
    reg.restore(Image(4, 4, 3), DistortionSpec::make(DistortionType::Pixelate, 1, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NoSpecialist);
    EXPECT_NE(std::string(e.what()).find("pixelate"), std::string::npos);
  }
}

TEST(Registry, DeterministicRouting) {
  DenoiserRegistry reg;
  reg.register_model(DistortionType::Swirl, DenoiserModel::create(DistortionType::Swirl, tiny_model(), 3));
  const Image img = fixtures::random_image(9, 7, 3, 5);
  const auto spec = DistortionSpec::make(DistortionType::Swirl, 4, 0);
  EXPECT_EQ(reg.restore(img, spec), reg.restore(img, spec));
}

TEST(Registry, LazyIdempotentLoading) {
  const auto dir = write_all_specialists(fresh_dir("lazy"));
  DenoiserRegistry reg;
  for (const auto t : all_distortion_types()) reg.register_specialist(t, dir / (std::string(distortion_name(t)) + ".ddc"));
  reg.save(dir / "registry.json");
  const auto loaded = DenoiserRegistry::load(dir / "registry.json");
  EXPECT_EQ(loaded.size(), 12u);
  for (const auto t : all_distortion_types()) EXPECT_EQ(loaded.load_count(t), 0u);

  const Image img = fixtures::random_image(8, 8, 3, 1);
  const auto spec = DistortionSpec::make(DistortionType::Darken, 3, 0);
  std::vector<std::thread> workers;
  for (int i = 0; i < 4; ++i) workers.emplace_back([&] { loaded.restore(img, spec); });
  for (auto& w : workers) w.join();
  loaded.restore(img, spec);
  EXPECT_EQ(loaded.load_count(DistortionType::Darken), 1u);
  EXPECT_EQ(loaded.invocation_count(DistortionType::Darken), 5u);
  EXPECT_EQ(loaded.load_count(DistortionType::Fade), 0u);
  EXPECT_EQ(loaded.size(), 12u);
}

TEST(Registry, RelativePathsResolveAgainstRegistryFile) {
  const auto dir = fresh_dir("relative");
  fs::create_directories(dir / "models");
  save_model(DenoiserModel::create(DistortionType::Tear, tiny_model(), 1), dir / "models" / "t.ddc");
  std::ofstream(dir / "registry.json") << R"({"tear": "models/t.ddc"})";
  const auto reg = DenoiserRegistry::load(dir / "registry.json");
  EXPECT_NO_THROW(reg.restore(Image(4, 4, 3), DistortionSpec::make(DistortionType::Tear, 1, 0)));
}

TEST(Registry, MalformedRegistryFiles) {
  const auto dir = fresh_dir("bad");
  std::ofstream(dir / "a.json") << R"({"nonsense_type": "x.ddc"})";
  std::ofstream(dir / "b.json") << "[1, 2]";
  EXPECT_THROW(DenoiserRegistry::load(dir / "a.json"), Error);
  EXPECT_THROW(DenoiserRegistry::load(dir / "b.json"), Error);
  try {
    DenoiserRegistry::load(dir / "missing.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::FileNotFound);
  }
}

TEST(Registry, DeregisterThenNoSpecialist) {
  DenoiserRegistry reg;
  for (const auto t : all_distortion_types()) reg.register_model(t, DenoiserModel::create(t, tiny_model(), 1));
  EXPECT_TRUE(reg.deregister(DistortionType::Scratch));
  EXPECT_FALSE(reg.deregister(DistortionType::Scratch));
  EXPECT_EQ(reg.size(), 11u);
  EXPECT_THROW(reg.restore(Image(4, 4, 3), DistortionSpec::make(DistortionType::Scratch, 1, 0)), Error);
}

TEST(RegistryProperty, RoutingFollowsManifestLabels) {
  const auto dir = fresh_dir("audit");
  fixtures::write_texture_corpus(dir / "in", 10, 16, 2);
  SynthConfig cfg;
  cfg.per_image = 12;
  cfg.split_fractions = {0.0, 0.0, 1.0};
  const auto manifest = synthesize_dataset(dir / "in", dir / "ds", cfg);
  ASSERT_EQ(manifest.records.size(), 120u);
  DenoiserRegistry reg;
  for (const auto t : all_distortion_types()) reg.register_model(t, DenoiserModel::create(t, tiny_model(), 7));
  std::map<DistortionType, std::size_t> expected;
  for (const auto& r : manifest.records) {
    const auto before = reg.invocation_count(r.spec.dtype);
    reg.restore(load_image(manifest.distorted_file(r)), r.spec);
    EXPECT_EQ(reg.invocation_count(r.spec.dtype), before + 1);
    ++expected[r.spec.dtype];
  }
  for (const auto t : all_distortion_types()) EXPECT_EQ(reg.invocation_count(t), expected[t]) << distortion_name(t);
}

TEST(RestoreChain, DegenerateChains) {
  DenoiserRegistry reg;
  reg.register_model(DistortionType::Fade, DenoiserModel::create(DistortionType::Fade, tiny_model(), 1));
  reg.register_model(DistortionType::Darken, DenoiserModel::create(DistortionType::Darken, tiny_model(), 2));
  const Image img = fixtures::random_image(8, 8, 3, 3);
  EXPECT_EQ(reg.restore_chain(img, {}), img);
  const auto fade = DistortionSpec::make(DistortionType::Fade, 2, 0);
  const auto dark = DistortionSpec::make(DistortionType::Darken, 4, 0);
  EXPECT_EQ(reg.restore_chain(img, {fade}), reg.restore(img, fade));
  EXPECT_EQ(reg.restore_chain(img, {fade, dark}), reg.restore(reg.restore(img, dark), fade));
}

TEST(RestoreChain, MissingLinkFailsBeforeAnyWork) {
  DenoiserRegistry reg;
  reg.register_model(DistortionType::Fade, DenoiserModel::create(DistortionType::Fade, tiny_model(), 1));
  EXPECT_THROW(reg.restore_chain(Image(4, 4, 3), {DistortionSpec::make(DistortionType::Fade, 1, 0),
                                                  DistortionSpec::make(DistortionType::Tear, 1, 0)}),
               Error);
  EXPECT_EQ(reg.invocation_count(DistortionType::Fade), 0u);
}

TEST(RestoreChain, ChainImprovesOnDoubleCorruption) {
  const auto dir = fresh_dir("chain");
  fixtures::write_texture_corpus(dir / "in", 80, 32, 77);
  auto specialist = [&](DistortionType t, int level) {
    SynthConfig sc;
    sc.per_image = 1;
    sc.types = {t};
    sc.levels = {level};
    sc.split_fractions = {0.9, 0.1, 0.0};
    const auto m = synthesize_dataset(dir / "in", dir / std::string(distortion_name(t)), sc);
    TrainConfig tc = TrainConfig::desk();
    tc.max_steps = 1200;
    tc.seed = 1;
    return train(m, t, tc).model;
  };
  DenoiserRegistry reg;
  reg.register_model(DistortionType::GaussianNoise, specialist(DistortionType::GaussianNoise, 2));
  reg.register_model(DistortionType::Darken, specialist(DistortionType::Darken, 1));

  double corrupted_psnr = 0.0, chain = 0.0, noise_only = 0.0, darken_only = 0.0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const Image clean = fixtures::procedural_texture(32, 5000 + i);
    const auto noise = DistortionSpec::make(DistortionType::GaussianNoise, 2, i);
    const auto dark = DistortionSpec::make(DistortionType::Darken, 1, i);
    const Image corrupted = quantize(apply_distortion(apply_distortion(clean, noise), dark));
    corrupted_psnr += psnr(clean, corrupted) / 20;
    chain += psnr(clean, reg.restore_chain(corrupted, {noise, dark})) / 20;
    noise_only += psnr(clean, reg.restore(corrupted, noise)) / 20;
    darken_only += psnr(clean, reg.restore(corrupted, dark)) / 20;
  }
  RecordProperty("corrupted_psnr", std::to_string(corrupted_psnr));
  RecordProperty("chain_psnr", std::to_string(chain));
  RecordProperty("noise_only_psnr", std::to_string(noise_only));
  RecordProperty("darken_only_psnr", std::to_string(darken_only));
  EXPECT_GT(chain, corrupted_psnr + 0.5);
  EXPECT_GE(chain, noise_only);
}
