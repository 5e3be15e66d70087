#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "ddcnn/degrade.hpp"
#include "ddcnn/image.hpp"
#include "ddcnn/network.hpp"

namespace ddcnn {

/// Severity fed to the network as one constant input channel.
struct LevelMap {
  float value = 0.0f;

  /// (level - 1) / 4 for level in 1..5.
  static LevelMap from_level(int level);
  /// Continuous override; must lie in [0,1].
  static LevelMap from_value(float value);
};

struct ModelConfig {
  int image_channels = 3;
  int layers = 17;
  int hidden_channels = 64;
  int kernel = 3;
};

/// The specialist denoiser: pixel-unshuffled input plus level channel,
/// Conv+ReLU, (layers - 2) x Conv+BN+ReLU, a final Conv, and pixel shuffle
/// back to full resolution. Predicts the clean image directly.
struct DenoiserModel {
  static constexpr std::uint32_t kFormatVersion = 1;

  DistortionType dtype = DistortionType::GaussianNoise;
  int image_channels = 3;
  int kernel = 3;
  int hidden_channels = 64;
  bool bn_folded = false;
  std::uint32_t version = kFormatVersion;
  Network<float> net;

  /// Orthogonally initialised model, deterministic under seed.
  static DenoiserModel create(DistortionType dtype, const ModelConfig& config, std::uint64_t seed);

  int layers() const noexcept { return static_cast<int>(net.blocks().size()); }
  int channels_in() const noexcept { return 4 * image_channels + 1; }
  int channels_out() const noexcept { return 4 * image_channels; }

  /// Throws InvalidShape when the block layout breaks the architecture rules.
  void validate() const;
};

/// (1, 4C, H/2, W/2). Channel (s * C + c) holds colour c of sub-image s, with
/// sub-images ordered by (row, col) offset (0,0), (0,1), (1,0), (1,1).
Tensor4<float> space_to_depth(const Image& img);
/// Batched form on an (N, C, H, W) tensor.
template <typename T>
Tensor4<T> space_to_depth(const Tensor4<T>& x);

/// Inverse of space_to_depth for a single-sample tensor; clamps to [0,1].
Image depth_to_space(const Tensor4<float>& t);
/// Batched inverse without clamping.
template <typename T>
Tensor4<T> depth_to_space_tensor(const Tensor4<T>& t);

/// space_to_depth(img) with the level channel appended: (1, 4C+1, H/2, W/2).
Tensor4<float> assemble_input(const Image& img, LevelMap level);

/// Restores an even-sized image. Output is clamped to [0,1].
Image forward(const DenoiserModel& model, const Image& img, LevelMap level);

/// forward() for any size: odd extents are reflect-padded to even and the
/// result cropped back.
Image restore_image(const DenoiserModel& model, const Image& img, LevelMap level);

/// Absorbs every batch norm into its convolution. Eval outputs are preserved.
DenoiserModel fold_batchnorm(const DenoiserModel& model);

void save_model(const DenoiserModel& model, const std::filesystem::path& path);
DenoiserModel load_model(const std::filesystem::path& path);

/// Checkpoint bytes exactly as save_model writes them.
std::string serialize_model(const DenoiserModel& model);
DenoiserModel deserialize_model(std::string_view bytes);

/// Metadata from a checkpoint header, read without loading parameters.
struct CheckpointInfo {
  DistortionType dtype = DistortionType::GaussianNoise;
  int image_channels = 0;
  int layers = 0;
  int kernel = 0;
  int hidden_channels = 0;
  bool bn_folded = false;
};
CheckpointInfo read_checkpoint_info(const std::filesystem::path& path);

}  // namespace ddcnn
