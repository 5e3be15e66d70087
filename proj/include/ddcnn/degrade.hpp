#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ddcnn/image.hpp"

namespace ddcnn {

/// The twelve deterioration operators. Integer ids are stable and used in
/// manifests and checkpoints.
enum class DistortionType : int {
  GaussianNoise = 0,
  SpeckleNoise = 1,
  GaussianBlur = 2,
  MotionBlur = 3,
  Fade = 4,
  WhiteOverlay = 5,
  Swirl = 6,
  Scratch = 7,
  WaterDiscolour = 8,
  Pixelate = 9,
  Darken = 10,
  Tear = 11,
};

inline constexpr int kDistortionTypeCount = 12;
inline constexpr int kMinLevel = 1;
inline constexpr int kMaxLevel = 5;

std::array<DistortionType, kDistortionTypeCount> all_distortion_types() noexcept;

/// Snake-case name, e.g. "gaussian_noise".
std::string_view distortion_name(DistortionType type) noexcept;
std::optional<DistortionType> parse_distortion_name(std::string_view name) noexcept;
std::optional<DistortionType> distortion_from_id(int id) noexcept;
inline int distortion_id(DistortionType type) noexcept { return static_cast<int>(type); }

using DistortionParams = std::map<std::string, double>;

/// Level-table parameters for (type, level). Throws InvalidSpec for a level outside 1..5.
DistortionParams level_params(DistortionType type, int level);

/// Parameter keys accepted by each operator.
std::vector<std::string> param_keys(DistortionType type);

/// Severity level normalised to [0,1]: (level - 1) / 4.
inline float level_norm(int level) noexcept { return static_cast<float>(level - kMinLevel) / (kMaxLevel - kMinLevel); }

struct DistortionSpec {
  DistortionType dtype = DistortionType::GaussianNoise;
  int level = 1;
  std::uint64_t seed = 0;
  DistortionParams params;

  /// Spec with params filled from the level table.
  static DistortionSpec make(DistortionType dtype, int level, std::uint64_t seed);

  /// Copy with one parameter overridden.
  DistortionSpec with(const std::string& key, double value) const;

  friend bool operator==(const DistortionSpec&, const DistortionSpec&) = default;
};

/// Throws InvalidSpec naming the first problem found.
void validate(const DistortionSpec& spec);

/// Applies the deterioration described by spec. Output is clamped to [0,1]
/// and is a pure function of (img, spec).
Image apply_distortion(const Image& img, const DistortionSpec& spec);

/// Normalised 1-D Gaussian taps, radius ceil(3 sigma). sigma == 0 gives {1}.
std::vector<double> gaussian_kernel(double sigma);

/// Normalised square line kernel of odd side >= length, angle in radians.
/// Row-major, side = sqrt(size). length <= 1 gives {1}.
std::vector<double> motion_kernel(int length, double angle);

}  // namespace ddcnn
