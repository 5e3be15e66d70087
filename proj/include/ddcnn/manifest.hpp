#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ddcnn/degrade.hpp"

namespace ddcnn {

enum class Split { Train, Val, Test };

std::string_view split_name(Split split) noexcept;
std::optional<Split> parse_split(std::string_view name) noexcept;

/// One clean/distorted pair. Paths are stored as written in the manifest,
/// normally relative to the manifest's directory.
struct PairManifestRecord {
  std::string clean_path;
  std::string distorted_path;
  DistortionSpec spec;
  Split split = Split::Train;

  friend bool operator==(const PairManifestRecord&, const PairManifestRecord&) = default;
};

struct PairManifest {
  /// Directory relative paths resolve against.
  std::filesystem::path base_dir;
  std::vector<PairManifestRecord> records;

  std::filesystem::path resolve(const std::string& path) const;
  std::filesystem::path clean_file(const PairManifestRecord& r) const { return resolve(r.clean_path); }
  std::filesystem::path distorted_file(const PairManifestRecord& r) const { return resolve(r.distorted_path); }

  /// Records matching split and, when given, dtype; manifest order is kept.
  std::vector<PairManifestRecord> select(Split split, std::optional<DistortionType> dtype = std::nullopt) const;
};

inline constexpr std::string_view kManifestFileName = "manifest.jsonl";

/// One JSON object per record, no trailing newline.
std::string format_manifest_line(const PairManifestRecord& record);
/// Throws ParseError prefixed with "line <n>".
PairManifestRecord parse_manifest_line(std::string_view line, std::size_t line_number);

void save_manifest(const PairManifest& manifest, const std::filesystem::path& path);
/// Parses a manifest; referenced files are not checked.
PairManifest load_manifest(const std::filesystem::path& path);

struct SynthConfig {
  int per_image = 50;
  std::uint64_t seed = 0;
  /// train, val, test; must sum to 1.
  std::array<double, 3> split_fractions = {0.8, 0.1, 0.1};
  /// Round-robin pool. Empty means all twelve types / all five levels.
  std::vector<DistortionType> types;
  std::vector<int> levels;
  /// When positive, inputs are centre-cropped to square and resized to this side.
  int canonical_size = 0;
};

/// Per-variant seed derived from (dataset seed, clean index, variant index).
std::uint64_t variant_seed(std::uint64_t dataset_seed, std::size_t clean_index, std::size_t variant_index) noexcept;

/// Distorts every PNG in input_dir (sorted by file name) per_image times and
/// writes clean/, distorted/ and manifest.jsonl under output_dir.
PairManifest synthesize_dataset(const std::filesystem::path& input_dir, const std::filesystem::path& output_dir,
                                const SynthConfig& config);

}  // namespace ddcnn
