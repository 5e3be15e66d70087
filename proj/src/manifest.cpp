#include "ddcnn/manifest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "ddcnn/error.hpp"
#include "ddcnn/parallel.hpp"
#include "ddcnn/rng.hpp"

namespace fs = std::filesystem;

namespace ddcnn {
namespace {

[[noreturn]] void parse_error(std::size_t line_number, const std::string& what) {
  throw Error(Errc::ParseError, "line " + std::to_string(line_number) + ": " + what);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<fs::path> list_pngs(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(Errc::FileNotFound, "input directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && lower(entry.path().extension().string()) == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  return files;
}

std::string variant_file_name(const std::string& stem, std::size_t variant, const DistortionSpec& spec) {
  char index[16];
  std::snprintf(index, sizeof index, "%03zu", variant);
  return stem + "_" + index + "_" + std::string(distortion_name(spec.dtype)) + "_l" + std::to_string(spec.level) +
         ".png";
}

}  // namespace

std::string_view split_name(Split split) noexcept {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

std::optional<Split> parse_split(std::string_view name) noexcept {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  return std::nullopt;
}

fs::path PairManifest::resolve(const std::string& path) const {
  const fs::path p(path);
  return p.is_absolute() ? p : base_dir / p;
}

std::vector<PairManifestRecord> PairManifest::select(Split split, std::optional<DistortionType> dtype) const {
  std::vector<PairManifestRecord> out;
  for (const auto& r : records) {
    if (r.split == split && (!dtype || r.spec.dtype == *dtype)) out.push_back(r);
  }
  return out;
}

std::string format_manifest_line(const PairManifestRecord& record) {
  nlohmann::ordered_json params = nlohmann::ordered_json::object();
  for (const auto& [key, value] : record.spec.params) params[key] = value;
  nlohmann::ordered_json j;
  j["clean"] = record.clean_path;
  j["distorted"] = record.distorted_path;
  j["dtype"] = distortion_id(record.spec.dtype);
  j["level"] = record.spec.level;
  j["seed"] = std::to_string(record.spec.seed);
  j["params"] = std::move(params);
  j["split"] = std::string(split_name(record.split));
  return j.dump();
}

PairManifestRecord parse_manifest_line(std::string_view line, std::size_t line_number) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    parse_error(line_number, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) parse_error(line_number, "expected a JSON object");

  auto field = [&](const char* key) -> const nlohmann::json& {
    const auto it = j.find(key);
    if (it == j.end()) parse_error(line_number, std::string("missing field '") + key + "'");
    return *it;
  };
  auto string_field = [&](const char* key) {
    const auto& v = field(key);
    if (!v.is_string()) parse_error(line_number, std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
  };
  auto int_field = [&](const char* key) {
    const auto& v = field(key);
    if (!v.is_number_integer()) parse_error(line_number, std::string("field '") + key + "' must be an integer");
    return v.get<long long>();
  };

  PairManifestRecord record;
  record.clean_path = string_field("clean");
  record.distorted_path = string_field("distorted");

  const long long dtype_id = int_field("dtype");
  const auto dtype = distortion_from_id(static_cast<int>(dtype_id));
  if (!dtype || dtype_id != static_cast<int>(dtype_id)) {
    parse_error(line_number, "unknown dtype id " + std::to_string(dtype_id));
  }
  record.spec.dtype = *dtype;
  record.spec.level = static_cast<int>(int_field("level"));

  const std::string seed = string_field("seed");
  const auto [ptr, ec] = std::from_chars(seed.data(), seed.data() + seed.size(), record.spec.seed);
  if (ec != std::errc() || ptr != seed.data() + seed.size() || seed.empty()) {
    parse_error(line_number, "seed must be a decimal uint64 string, got '" + seed + "'");
  }

  const auto& params = field("params");
  if (!params.is_object()) parse_error(line_number, "field 'params' must be an object");
  for (const auto& [key, value] : params.items()) {
    if (!value.is_number()) parse_error(line_number, "parameter '" + key + "' must be numeric");
    record.spec.params[key] = value.get<double>();
  }

  const auto split = parse_split(string_field("split"));
  if (!split) parse_error(line_number, "split must be train, val or test");
  record.split = *split;

  try {
    validate(record.spec);
  } catch (const Error& e) {
    parse_error(line_number, e.what());
  }
  return record;
}

void save_manifest(const PairManifest& manifest, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write manifest " + path.string());
  for (const auto& record : manifest.records) out << format_manifest_line(record) << '\n';
  if (!out) throw Error(Errc::IoError, "failed writing manifest " + path.string());
}

PairManifest load_manifest(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw Error(Errc::FileNotFound, "manifest not found: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open manifest " + path.string());

  PairManifest manifest;
  manifest.base_dir = path.parent_path();
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    manifest.records.push_back(parse_manifest_line(line, line_number));
  }
  return manifest;
}

std::uint64_t variant_seed(std::uint64_t dataset_seed, std::size_t clean_index, std::size_t variant_index) noexcept {
  return derive_seed(dataset_seed, {static_cast<std::uint64_t>(clean_index), static_cast<std::uint64_t>(variant_index)});
}

PairManifest synthesize_dataset(const fs::path& input_dir, const fs::path& output_dir, const SynthConfig& config) {
  if (config.per_image < 1) throw Error(Errc::InvalidArgument, "per_image must be at least 1");
  double fraction_sum = 0.0;
  for (double f : config.split_fractions) {
    if (!(f >= 0.0)) throw Error(Errc::InvalidArgument, "split fractions must be non-negative");
    fraction_sum += f;
  }
  if (std::abs(fraction_sum - 1.0) > 1e-9) throw Error(Errc::InvalidArgument, "split fractions must sum to 1");
  if (config.canonical_size < 0) throw Error(Errc::InvalidArgument, "canonical size must be non-negative");

  std::vector<DistortionType> types = config.types;
  if (types.empty()) {
    const auto all = all_distortion_types();
    types.assign(all.begin(), all.end());
  }
  std::vector<int> levels = config.levels;
  if (levels.empty()) levels = {1, 2, 3, 4, 5};
  for (int level : levels) {
    if (level < kMinLevel || level > kMaxLevel) throw Error(Errc::InvalidArgument, "levels must be in 1..5");
  }

  const auto inputs = list_pngs(input_dir);
  if (inputs.empty()) throw Error(Errc::EmptyInput, "no PNG images in " + input_dir.string());

  std::error_code ec;
  fs::create_directories(output_dir / "clean", ec);
  if (!ec) fs::create_directories(output_dir / "distorted", ec);
  if (ec) throw Error(Errc::IoError, "cannot create " + output_dir.string() + ": " + ec.message());

  // Splits are assigned per clean image so variants never straddle splits.
  const std::size_t n = inputs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng split_rng(derive_seed(config.seed, {0x5B117ULL}));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[split_rng.below(i)]);
  const auto n_train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * config.split_fractions[0]));
  const auto n_val = std::min(n - std::min(n, n_train),
                              static_cast<std::size_t>(std::llround(static_cast<double>(n) * config.split_fractions[1])));
  std::vector<Split> splits(n, Split::Test);
  for (std::size_t rank = 0; rank < n; ++rank) {
    if (rank < n_train) {
      splits[order[rank]] = Split::Train;
    } else if (rank < n_train + n_val) {
      splits[order[rank]] = Split::Val;
    }
  }

  const std::size_t per_image = static_cast<std::size_t>(config.per_image);
  const std::size_t pool = types.size() * levels.size();
  PairManifest manifest;
  manifest.base_dir = output_dir;
  manifest.records.resize(n * per_image);

  parallel_for(n, [&](std::size_t i) {
    Image clean = load_image(inputs[i]);
    if (config.canonical_size > 0) {
      clean = resize(center_crop_square(clean), config.canonical_size, config.canonical_size);
    }
    // Distort the quantized clean image so that a consumer re-reading the
    // clean PNG can regenerate the exact distorted samples from its DistortionSpec.
    clean = quantize(clean);
    const std::string stem = inputs[i].stem().string();
    const std::string clean_rel = "clean/" + stem + ".png";
    save_image(clean, output_dir / clean_rel);

    for (std::size_t v = 0; v < per_image; ++v) {
      const std::size_t p = (i * per_image + v) % pool;
      const DistortionType dtype = types[p % types.size()];
      const int level = levels[(p / types.size()) % levels.size()];
      PairManifestRecord& record = manifest.records[i * per_image + v];
      record.spec = DistortionSpec::make(dtype, level, variant_seed(config.seed, i, v));
      record.clean_path = clean_rel;
      record.distorted_path = "distorted/" + variant_file_name(stem, v, record.spec);
      record.split = splits[i];
      save_image(apply_distortion(clean, record.spec), output_dir / record.distorted_path);
    }
  });

  save_manifest(manifest, output_dir / kManifestFileName);
  return manifest;
}

}  // namespace ddcnn
