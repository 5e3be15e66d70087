#include "ddcnn/model.hpp"

#include <zlib.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <json.hpp>

#include "ddcnn/error.hpp"
#include "ddcnn/rng.hpp"

namespace fs = std::filesystem;

namespace ddcnn {
namespace {

constexpr std::array<char, 4> kMagic = {'D', 'D', 'C', 'N'};
constexpr std::array<std::array<int, 2>, 4> kSubImageOffsets = {{{0, 0}, {0, 1}, {1, 0}, {1, 1}}};

void require_even(int h, int w) {
  if (h % 2 != 0 || w % 2 != 0) {
    throw Error(Errc::OddDimensions,
                "pixel unshuffle needs even dimensions, got " + std::to_string(h) + "x" + std::to_string(w));
  }
}

// Weight gain for conv layers followed by ReLU; the head is kept small so the
// initial prediction stays close to its bias.
constexpr double kReluGain = 1.41421356237309515;
constexpr double kHeadGain = 0.1;
constexpr float kHeadBias = 0.5f;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  return v;
}

void put_floats(std::string& out, const std::vector<float>& values) {
  for (float f : values) put_u32(out, std::bit_cast<std::uint32_t>(f));
}

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

nlohmann::ordered_json header_json(const DenoiserModel& model) {
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const auto& b : model.net.blocks()) {
    nlohmann::ordered_json layer;
    layer["c_in"] = b.conv.c_in;
    layer["c_out"] = b.conv.c_out;
    layer["kernel"] = b.conv.kernel;
    layer["pad"] = {b.conv.pad.top, b.conv.pad.left, b.conv.pad.bottom, b.conv.pad.right};
    layer["bn"] = b.bn.has_value();
    if (b.bn) {
      layer["bn_epsilon"] = b.bn->epsilon;
      layer["bn_momentum"] = b.bn->momentum;
      layer["bn_tracked_batches"] = b.bn->tracked_batches;
    }
    layer["relu"] = b.relu;
    layers.push_back(std::move(layer));
  }
  nlohmann::ordered_json j;
  j["dtype"] = std::string(distortion_name(model.dtype));
  j["dtype_id"] = distortion_id(model.dtype);
  j["image_channels"] = model.image_channels;
  j["kernel"] = model.kernel;
  j["channels_hidden"] = model.hidden_channels;
  j["channels_in"] = model.channels_in();
  j["channels_out"] = model.channels_out();
  j["bn_folded"] = model.bn_folded;
  j["layers"] = std::move(layers);
  return j;
}

struct ParsedHeader {
  nlohmann::json json;
  std::size_t params_offset = 0;
};

// Parses magic, version and the JSON header. Does not verify the CRC.
ParsedHeader parse_header(std::string_view bytes) {
  if (bytes.size() < 12) throw Error(Errc::ChecksumMismatch, "checkpoint truncated");
  if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw Error(Errc::UnsupportedFormat, "not a DDCN checkpoint");
  }
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != DenoiserModel::kFormatVersion) {
    throw Error(Errc::FormatVersionMismatch, "checkpoint format version " + std::to_string(version) +
                                                 " is not supported (expected " +
                                                 std::to_string(DenoiserModel::kFormatVersion) + ")");
  }
  const std::uint32_t header_len = get_u32(bytes, 8);
  if (bytes.size() < 12 + static_cast<std::size_t>(header_len)) {
    throw Error(Errc::ChecksumMismatch, "checkpoint truncated inside header");
  }
  ParsedHeader h;
  try {
    h.json = nlohmann::json::parse(bytes.substr(12, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptData, std::string("checkpoint header: ") + e.what());
  }
  h.params_offset = 12 + header_len;
  return h;
}

CheckpointInfo info_from_header(const nlohmann::json& j) {
  try {
    CheckpointInfo info;
    const auto dtype = distortion_from_id(j.at("dtype_id").get<int>());
    if (!dtype) throw Error(Errc::CorruptData, "checkpoint has unknown dtype id");
    info.dtype = *dtype;
    info.image_channels = j.at("image_channels").get<int>();
    info.kernel = j.at("kernel").get<int>();
    info.hidden_channels = j.at("channels_hidden").get<int>();
    info.bn_folded = j.at("bn_folded").get<bool>();
    info.layers = static_cast<int>(j.at("layers").size());
    return info;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptData, std::string("checkpoint header: ") + e.what());
  }
}

std::string read_file(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw Error(Errc::FileNotFound, "no such checkpoint: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

LevelMap LevelMap::from_level(int level) {
  if (level < kMinLevel || level > kMaxLevel) {
    throw Error(Errc::InvalidArgument, "level must be in 1..5, got " + std::to_string(level));
  }
  return LevelMap{level_norm(level)};
}

LevelMap LevelMap::from_value(float value) {
  if (!(value >= 0.0f && value <= 1.0f)) throw Error(Errc::InvalidArgument, "level value must lie in [0,1]");
  return LevelMap{value};
}

DenoiserModel DenoiserModel::create(DistortionType dtype, const ModelConfig& config, std::uint64_t seed) {
  if (config.image_channels != 1 && config.image_channels != 3) {
    throw Error(Errc::InvalidArgument, "image channels must be 1 or 3");
  }
  if (config.layers < 2) throw Error(Errc::InvalidArgument, "a denoiser needs at least 2 layers");
  if (config.hidden_channels < 1 || config.kernel < 1) {
    throw Error(Errc::InvalidArgument, "hidden channels and kernel must be positive");
  }
  DenoiserModel model;
  model.dtype = dtype;
  model.image_channels = config.image_channels;
  model.kernel = config.kernel;
  model.hidden_channels = config.hidden_channels;

  std::vector<Block<float>> blocks;
  for (int i = 0; i < config.layers; ++i) {
    const bool first = i == 0;
    const bool last = i == config.layers - 1;
    Block<float> b;
    b.conv = ConvLayer<float>(first ? model.channels_in() : config.hidden_channels,
                              last ? model.channels_out() : config.hidden_channels, config.kernel);
    if (!first && !last) b.bn = BatchNormLayer<float>(config.hidden_channels);
    b.relu = !last;
    const std::array<int, 4> shape = {b.conv.c_out, b.conv.c_in, b.conv.kernel, b.conv.kernel};
    const auto w = orthogonal_init(shape, derive_seed(seed, {static_cast<std::uint64_t>(i)}));
    const double gain = last ? kHeadGain : kReluGain;
    for (std::size_t k = 0; k < w.size(); ++k) b.conv.weight[k] = static_cast<float>(gain * w[k]);
    if (last) std::fill(b.conv.bias.begin(), b.conv.bias.end(), kHeadBias);
    blocks.push_back(std::move(b));
  }
  model.net = Network<float>(std::move(blocks));
  return model;
}

void DenoiserModel::validate() const {
  const auto& blocks = net.blocks();
  auto fail = [](const std::string& what) { throw Error(Errc::InvalidShape, "malformed denoiser: " + what); };
  if (blocks.size() < 2) fail("fewer than 2 layers");
  if (image_channels != 1 && image_channels != 3) fail("image channels must be 1 or 3");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    const bool first = i == 0;
    const bool last = i + 1 == blocks.size();
    if (b.conv.kernel != kernel) fail("layer " + std::to_string(i) + " kernel differs from model kernel");
    if (first && (b.bn || !b.relu)) fail("first layer must be Conv+ReLU");
    if (last && (b.bn || b.relu)) fail("last layer must be Conv alone");
    if (!first && !last) {
      if (!b.relu) fail("middle layer " + std::to_string(i) + " lacks ReLU");
      if (b.bn.has_value() == bn_folded) fail("middle layer " + std::to_string(i) + " batch norm disagrees with folded flag");
      if (b.bn && b.bn->channels() != b.conv.c_out) fail("batch norm width mismatch");
    }
    if (first && b.conv.c_in != channels_in()) fail("first layer must take 4C+1 channels");
    if (last && b.conv.c_out != channels_out()) fail("last layer must emit 4C channels");
    if (!first && b.conv.c_in != blocks[i - 1].conv.c_out) fail("channel chain broken at layer " + std::to_string(i));
  }
}

template <typename T>
Tensor4<T> space_to_depth(const Tensor4<T>& x) {
  require_even(x.h(), x.w());
  const int channels = x.c();
  Tensor4<T> out(x.n(), 4 * channels, x.h() / 2, x.w() / 2);
  for (int n = 0; n < x.n(); ++n) {
    for (int s = 0; s < 4; ++s) {
      const auto [dy, dx] = kSubImageOffsets[s];
      for (int c = 0; c < channels; ++c) {
        for (int y = 0; y < out.h(); ++y) {
          for (int xx = 0; xx < out.w(); ++xx) out(n, s * channels + c, y, xx) = x(n, c, 2 * y + dy, 2 * xx + dx);
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor4<T> depth_to_space_tensor(const Tensor4<T>& t) {
  if (t.c() % 4 != 0 || t.c() == 0) {
    throw Error(Errc::BadChannelCount, "depth_to_space needs a channel count divisible by 4, got " + std::to_string(t.c()));
  }
  const int channels = t.c() / 4;
  Tensor4<T> out(t.n(), channels, 2 * t.h(), 2 * t.w());
  for (int n = 0; n < t.n(); ++n) {
    for (int s = 0; s < 4; ++s) {
      const auto [dy, dx] = kSubImageOffsets[s];
      for (int c = 0; c < channels; ++c) {
        for (int y = 0; y < t.h(); ++y) {
          for (int xx = 0; xx < t.w(); ++xx) out(n, c, 2 * y + dy, 2 * xx + dx) = t(n, s * channels + c, y, xx);
        }
      }
    }
  }
  return out;
}

template Tensor4<float> space_to_depth(const Tensor4<float>&);
template Tensor4<double> space_to_depth(const Tensor4<double>&);
template Tensor4<float> depth_to_space_tensor(const Tensor4<float>&);
template Tensor4<double> depth_to_space_tensor(const Tensor4<double>&);

Tensor4<float> space_to_depth(const Image& img) {
  require_even(img.height(), img.width());
  const int channels = img.channels();
  Tensor4<float> out(1, 4 * channels, img.height() / 2, img.width() / 2);
  for (int s = 0; s < 4; ++s) {
    const auto [dy, dx] = kSubImageOffsets[s];
    for (int c = 0; c < channels; ++c) {
      for (int y = 0; y < out.h(); ++y) {
        for (int x = 0; x < out.w(); ++x) out(0, s * channels + c, y, x) = img.at(2 * y + dy, 2 * x + dx, c);
      }
    }
  }
  return out;
}

Image depth_to_space(const Tensor4<float>& t) {
  if (t.c() % 4 != 0 || t.c() == 0) {
    throw Error(Errc::BadChannelCount, "depth_to_space needs a channel count divisible by 4, got " + std::to_string(t.c()));
  }
  if (t.n() != 1) throw Error(Errc::ShapeMismatch, "depth_to_space to an image needs batch size 1");
  const int channels = t.c() / 4;
  if (channels != 1 && channels != 3) {
    throw Error(Errc::BadChannelCount, "depth_to_space yields " + std::to_string(channels) + " colour channels");
  }
  std::vector<float> samples(static_cast<std::size_t>(t.size()));
  const int out_w = 2 * t.w();
  for (int s = 0; s < 4; ++s) {
    const auto [dy, dx] = kSubImageOffsets[s];
    for (int c = 0; c < channels; ++c) {
      for (int y = 0; y < t.h(); ++y) {
        for (int x = 0; x < t.w(); ++x) {
          const std::size_t idx = (static_cast<std::size_t>(2 * y + dy) * out_w + (2 * x + dx)) * channels + c;
          samples[idx] = t(0, s * channels + c, y, x);
        }
      }
    }
  }
  for (float v : samples) {
    if (std::isnan(v)) throw Error(Errc::NonFinite, "depth_to_space input contains NaN");
  }
  return Image(2 * t.h(), out_w, channels, std::move(samples));
}

Tensor4<float> assemble_input(const Image& img, LevelMap level) {
  const Tensor4<float> sub = space_to_depth(img);
  Tensor4<float> out(1, sub.c() + 1, sub.h(), sub.w(), level.value);
  std::copy(sub.values().begin(), sub.values().end(), out.values().begin());
  return out;
}

Image forward(const DenoiserModel& model, const Image& img, LevelMap level) {
  if (img.channels() != model.image_channels) {
    throw Error(Errc::ShapeMismatch, "model expects " + std::to_string(model.image_channels) +
                                         "-channel images, got " + std::to_string(img.channels()));
  }
  const auto input = assemble_input(img, level);
  return depth_to_space(model.net.infer(input));
}

Image restore_image(const DenoiserModel& model, const Image& img, LevelMap level) {
  const int pad_bottom = img.height() % 2;
  const int pad_right = img.width() % 2;
  if (pad_bottom == 0 && pad_right == 0) return forward(model, img, level);
  const Image restored = forward(model, reflect_pad(img, pad_bottom, pad_right), level);
  Image out(img.height(), img.width(), img.channels());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = restored.at(y, x, c);
    }
  }
  return out;
}

DenoiserModel fold_batchnorm(const DenoiserModel& model) {
  if (model.bn_folded) throw Error(Errc::AlreadyFolded, "model batch norms are already folded");
  DenoiserModel folded = model;
  for (auto& b : folded.net.blocks()) {
    if (!b.bn) continue;
    const auto& bn = *b.bn;
    if (bn.tracked_batches <= 0) throw Error(Errc::UnpopulatedStats, "batch norm running statistics were never populated");
    const std::size_t per_out = static_cast<std::size_t>(b.conv.c_in) * b.conv.kernel * b.conv.kernel;
    for (int co = 0; co < b.conv.c_out; ++co) {
      const double scale = bn.gamma[co] / std::sqrt(static_cast<double>(bn.running_var[co]) + bn.epsilon);
      for (std::size_t k = 0; k < per_out; ++k) {
        float& w = b.conv.weight[co * per_out + k];
        w = static_cast<float>(w * scale);
      }
      b.conv.bias[co] = static_cast<float>((b.conv.bias[co] - static_cast<double>(bn.running_mean[co])) * scale +
                                           bn.beta[co]);
    }
    b.bn.reset();
  }
  folded.bn_folded = true;
  return folded;
}

std::string serialize_model(const DenoiserModel& model) {
  model.validate();
  const std::string header = header_json(model).dump();
  std::string out(kMagic.begin(), kMagic.end());
  put_u32(out, model.version);
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out += header;
  for (const auto& b : model.net.blocks()) {
    put_floats(out, b.conv.weight);
    put_floats(out, b.conv.bias);
    if (b.bn) {
      put_floats(out, b.bn->gamma);
      put_floats(out, b.bn->beta);
      put_floats(out, b.bn->running_mean);
      put_floats(out, b.bn->running_var);
    }
  }
  put_u32(out, crc32_of(out));
  return out;
}

DenoiserModel deserialize_model(std::string_view bytes) {
  const ParsedHeader header = parse_header(bytes);
  if (bytes.size() < header.params_offset + 4) throw Error(Errc::ChecksumMismatch, "checkpoint truncated");
  const std::size_t body_end = bytes.size() - 4;
  if (crc32_of(bytes.substr(0, body_end)) != get_u32(bytes, body_end)) {
    throw Error(Errc::ChecksumMismatch, "checkpoint CRC-32 does not match its contents");
  }

  const CheckpointInfo info = info_from_header(header.json);
  DenoiserModel model;
  model.dtype = info.dtype;
  model.image_channels = info.image_channels;
  model.kernel = info.kernel;
  model.hidden_channels = info.hidden_channels;
  model.bn_folded = info.bn_folded;

  std::size_t offset = header.params_offset;
  auto take = [&](std::vector<float>& dst) {
    if (offset + 4 * dst.size() > body_end) throw Error(Errc::CorruptData, "checkpoint parameter block too short");
    for (float& f : dst) {
      f = std::bit_cast<float>(get_u32(bytes, offset));
      offset += 4;
    }
  };

  std::vector<Block<float>> blocks;
  try {
    for (const auto& layer : header.json.at("layers")) {
      const auto pad = layer.at("pad").get<std::vector<int>>();
      if (pad.size() != 4) throw Error(Errc::CorruptData, "checkpoint layer padding must have 4 entries");
      Block<float> b;
      b.conv = ConvLayer<float>(layer.at("c_in").get<int>(), layer.at("c_out").get<int>(), layer.at("kernel").get<int>(),
                                Padding{pad[0], pad[1], pad[2], pad[3]});
      take(b.conv.weight);
      take(b.conv.bias);
      if (layer.at("bn").get<bool>()) {
        BatchNormLayer<float> bn(b.conv.c_out);
        bn.epsilon = layer.at("bn_epsilon").get<double>();
        bn.momentum = layer.at("bn_momentum").get<double>();
        bn.tracked_batches = layer.at("bn_tracked_batches").get<std::int64_t>();
        take(bn.gamma);
        take(bn.beta);
        take(bn.running_mean);
        take(bn.running_var);
        b.bn = std::move(bn);
      }
      b.relu = layer.at("relu").get<bool>();
      blocks.push_back(std::move(b));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptData, std::string("checkpoint header: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::InvalidShape) throw Error(Errc::CorruptData, e.what());
    throw;
  }
  if (offset != body_end) throw Error(Errc::CorruptData, "checkpoint has trailing parameter bytes");
  model.net = Network<float>(std::move(blocks));
  try {
    model.validate();
  } catch (const Error& e) {
    throw Error(Errc::CorruptData, e.what());
  }
  return model;
}

void save_model(const DenoiserModel& model, const fs::path& path) {
  const std::string bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoError, "failed writing checkpoint " + path.string());
}

DenoiserModel load_model(const fs::path& path) { return deserialize_model(read_file(path)); }

CheckpointInfo read_checkpoint_info(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) throw Error(Errc::FileNotFound, "no such checkpoint: " + path.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::string prefix(12, '\0');
  in.read(prefix.data(), 12);
  prefix.resize(static_cast<std::size_t>(in.gcount()));
  if (prefix.size() == 12 && std::memcmp(prefix.data(), kMagic.data(), 4) == 0) {
    const std::uintmax_t file_size = fs::file_size(path, ec);
    const std::uint32_t header_len =
        static_cast<std::uint32_t>(std::min<std::uintmax_t>(get_u32(prefix, 8), ec ? 0 : file_size));
    std::string header(header_len, '\0');
    in.read(header.data(), header_len);
    header.resize(static_cast<std::size_t>(in.gcount()));
    prefix += header;
  }
  return info_from_header(parse_header(prefix).json);
}

}  // namespace ddcnn
