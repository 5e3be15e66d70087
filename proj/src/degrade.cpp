#include "ddcnn/degrade.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "ddcnn/error.hpp"
#include "ddcnn/rng.hpp"

namespace ddcnn {
namespace {

constexpr std::array<std::string_view, kDistortionTypeCount> kNames = {
    "gaussian_noise", "speckle_noise", "gaussian_blur", "motion_blur",     "fade",     "white_overlay",
    "swirl",          "scratch",       "water_discolour", "pixelate", "darken", "tear",
};

using Row = std::array<double, 5>;

constexpr Row kNoiseSigma = {5.0 / 255, 10.0 / 255, 25.0 / 255, 40.0 / 255, 60.0 / 255};
constexpr Row kBlurSigma = {0.5, 1, 2, 3, 5};
constexpr Row kMotionLength = {3, 5, 9, 15, 21};
constexpr Row kAlpha = {0.1, 0.2, 0.35, 0.5, 0.7};
constexpr Row kSwirlStrength = {0.5, 1, 2, 3, 4};
constexpr Row kScratchCount = {1, 2, 4, 7, 10};
constexpr Row kWaterBeta = {0.05, 0.1, 0.2, 0.3, 0.45};
constexpr Row kPixelBlock = {2, 4, 8, 16, 32};
constexpr Row kDarkenGamma = {0.9, 0.75, 0.6, 0.45, 0.3};
constexpr Row kTearCount = {1, 1, 2, 3, 4};
constexpr Row kTearWidth = {2, 4, 8, 12, 16};

constexpr double kScratchValue = 0.95;
constexpr double kTearValue = 1.0;
constexpr double kDefaultWaterCells = 4;

[[noreturn]] void invalid(const std::string& what) { throw Error(Errc::InvalidSpec, what); }

double param(const DistortionSpec& spec, const std::string& key) {
  const auto it = spec.params.find(key);
  if (it == spec.params.end()) {
    invalid(std::string(distortion_name(spec.dtype)) + " spec is missing parameter '" + key + "'");
  }
  return it->second;
}

double param_or(const DistortionSpec& spec, const std::string& key, double fallback) {
  const auto it = spec.params.find(key);
  return it == spec.params.end() ? fallback : it->second;
}

bool is_integral(double v) { return std::floor(v) == v; }

// Applies f to every sample and clamps. Keeps the identity endpoints exact as
// long as f(b) == b for the neutral parameter.
template <typename F>
Image map_samples(const Image& img, F f) {
  Image out = img;
  for (float& s : out.samples()) s = f(s);
  out.clamp();
  return out;
}

float sample_bilinear(const Image& img, double y, double x, int c) {
  y = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
  x = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const double fy = y - y0;
  const double fx = x - x0;
  const double top = img.at(y0, x0, c) * (1.0 - fx) + img.at(y0, x1, c) * fx;
  const double bottom = img.at(y1, x0, c) * (1.0 - fx) + img.at(y1, x1, c) * fx;
  return static_cast<float>(top * (1.0 - fy) + bottom * fy);
}

Image gaussian_noise(const Image& img, const DistortionSpec& spec, bool speckle) {
  const float sigma = static_cast<float>(param(spec, "sigma"));
  Rng rng(spec.seed);
  return map_samples(img, [&](float b) {
    const float n = sigma * static_cast<float>(rng.normal());
    return speckle ? b + b * n : b + n;
  });
}

Image gaussian_blur(const Image& img, const DistortionSpec& spec) {
  const std::vector<double> taps = gaussian_kernel(param(spec, "sigma"));
  const int radius = static_cast<int>(taps.size() / 2);
  if (radius == 0) return img;
  const int h = img.height();
  const int w = img.width();
  const int channels = img.channels();

  Image horizontal(h, w, channels);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) acc += taps[k + radius] * img.at(y, std::clamp(x + k, 0, w - 1), c);
        horizontal.at(y, x, c) = static_cast<float>(acc);
      }
    }
  }
  Image out(h, w, channels);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          acc += taps[k + radius] * horizontal.at(std::clamp(y + k, 0, h - 1), x, c);
        }
        out.at(y, x, c) = static_cast<float>(acc);
      }
    }
  }
  out.clamp();
  return out;
}

Image motion_blur(const Image& img, const DistortionSpec& spec) {
  const int length = static_cast<int>(param(spec, "length"));
  if (length <= 1) return img;
  double angle = 0.0;
  if (const auto it = spec.params.find("angle"); it != spec.params.end()) {
    angle = it->second;
  } else {
    Rng rng(spec.seed);
    angle = rng.uniform(0.0, std::numbers::pi);
  }
  const std::vector<double> kernel = motion_kernel(length, angle);
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(kernel.size()))));
  const int half = side / 2;
  const int h = img.height();
  const int w = img.width();
  const int channels = img.channels();

  Image out(h, w, channels);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        double acc = 0.0;
        for (int ky = 0; ky < side; ++ky) {
          const int sy = std::clamp(y + ky - half, 0, h - 1);
          for (int kx = 0; kx < side; ++kx) {
            const double wgt = kernel[static_cast<std::size_t>(ky) * side + kx];
            if (wgt == 0.0) continue;
            acc += wgt * img.at(sy, std::clamp(x + kx - half, 0, w - 1), c);
          }
        }
        out.at(y, x, c) = static_cast<float>(acc);
      }
    }
  }
  out.clamp();
  return out;
}

Image fade(const Image& img, const DistortionSpec& spec) {
  const float alpha = static_cast<float>(param(spec, "alpha"));
  const int channels = img.channels();
  std::vector<double> sums(static_cast<std::size_t>(channels), 0.0);
  const auto samples = img.samples();
  for (std::size_t i = 0; i < samples.size(); ++i) sums[i % channels] += samples[i];
  std::vector<float> means(sums.size());
  const double pixels = static_cast<double>(img.height()) * img.width();
  for (std::size_t c = 0; c < sums.size(); ++c) means[c] = static_cast<float>(sums[c] / pixels);

  Image out = img;
  auto dst = out.samples();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = (1.0f - alpha) * dst[i] + alpha * means[i % channels];
  out.clamp();
  return out;
}

Image swirl(const Image& img, const DistortionSpec& spec) {
  const double strength = param(spec, "strength");
  if (strength == 0.0) return img;
  const double radius = param_or(spec, "radius", std::min(img.height(), img.width()) / 2.0);
  if (radius <= 0.0) return img;
  const double cy = (img.height() - 1) / 2.0;
  const double cx = (img.width() - 1) / 2.0;

  Image out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double dy = y - cy;
      const double dx = x - cx;
      const double r = std::hypot(dx, dy);
      if (r >= radius) continue;
      const double theta = strength * (1.0 - r / radius);
      const double cs = std::cos(theta);
      const double sn = std::sin(theta);
      const double sx = cx + dx * cs - dy * sn;
      const double sy = cy + dx * sn + dy * cs;
      for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = sample_bilinear(img, sy, sx, c);
    }
  }
  out.clamp();
  return out;
}

struct Point {
  double x;
  double y;
};

double segment_distance(Point p, Point a, Point b) {
  const double vx = b.x - a.x;
  const double vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0.0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * vx), p.y - (a.y + t * vy));
}

double polyline_distance(Point p, const std::vector<Point>& line) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < line.size(); ++i) best = std::min(best, segment_distance(p, line[i], line[i + 1]));
  return best;
}

// Blends `value` into img along the polyline. coverage(d) gives the paint
// fraction at distance d from the centre line.
template <typename Coverage>
void paint_polyline(Image& img, const std::vector<Point>& line, double reach, double value, Coverage coverage) {
  double min_x = line.front().x, max_x = min_x, min_y = line.front().y, max_y = min_y;
  for (const Point& p : line) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const int y_lo = std::max(0, static_cast<int>(std::floor(min_y - reach)));
  const int y_hi = std::min(img.height() - 1, static_cast<int>(std::ceil(max_y + reach)));
  const int x_lo = std::max(0, static_cast<int>(std::floor(min_x - reach)));
  const int x_hi = std::min(img.width() - 1, static_cast<int>(std::ceil(max_x + reach)));
  for (int y = y_lo; y <= y_hi; ++y) {
    for (int x = x_lo; x <= x_hi; ++x) {
      const double cov = coverage(polyline_distance({static_cast<double>(x), static_cast<double>(y)}, line));
      if (cov <= 0.0) continue;
      for (int c = 0; c < img.channels(); ++c) {
        float& s = img.at(y, x, c);
        s = static_cast<float>((1.0 - cov) * s + cov * value);
      }
    }
  }
}

// Polyline from `from` to `to` with `segments` pieces; interior vertices are
// displaced perpendicular to the chord by up to `jitter` pixels.
std::vector<Point> jagged_line(Point from, Point to, int segments, double jitter, Rng& rng) {
  const double len = std::hypot(to.x - from.x, to.y - from.y);
  const double nx = len > 0.0 ? -(to.y - from.y) / len : 0.0;
  const double ny = len > 0.0 ? (to.x - from.x) / len : 0.0;
  std::vector<Point> line;
  line.reserve(static_cast<std::size_t>(segments) + 1);
  for (int i = 0; i <= segments; ++i) {
    const double t = static_cast<double>(i) / segments;
    const double offset = (i == 0 || i == segments) ? 0.0 : rng.uniform(-jitter, jitter);
    line.push_back({from.x + t * (to.x - from.x) + offset * nx, from.y + t * (to.y - from.y) + offset * ny});
  }
  return line;
}

Image scratch(const Image& img, const DistortionSpec& spec) {
  const int count = static_cast<int>(param(spec, "count"));
  if (count == 0) return img;
  const double width_min = param_or(spec, "width_min", 1.0);
  const double width_max = param_or(spec, "width_max", 2.0);
  const double h = img.height();
  const double w = img.width();
  const double extent = std::min(h, w);
  Rng rng(spec.seed);

  Image out = img;
  for (int i = 0; i < count; ++i) {
    const Point start{rng.uniform(0.0, w - 1), rng.uniform(0.0, h - 1)};
    const double direction = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double length = rng.uniform(0.3, 0.9) * extent;
    const Point end{start.x + length * std::cos(direction), start.y + length * std::sin(direction)};
    const double width = rng.uniform(width_min, width_max);
    const auto line = jagged_line(start, end, 4, 0.02 * length, rng);
    paint_polyline(out, line, width / 2.0 + 1.0, kScratchValue,
                   [&](double d) { return std::clamp(width / 2.0 + 0.5 - d, 0.0, 1.0); });
  }
  out.clamp();
  return out;
}

Image water_discolour(const Image& img, const DistortionSpec& spec) {
  const float beta = static_cast<float>(param(spec, "beta"));
  if (beta == 0.0f) return img;
  const int cells = static_cast<int>(param_or(spec, "cells", kDefaultWaterCells));
  Rng rng(spec.seed);
  const int nodes = cells + 1;
  std::vector<double> grid(static_cast<std::size_t>(nodes) * nodes);
  for (double& g : grid) g = rng.uniform(-1.0, 1.0);

  const int h = img.height();
  const int w = img.width();
  Image out = img;
  for (int y = 0; y < h; ++y) {
    const double gy = h > 1 ? static_cast<double>(y) * cells / (h - 1) : 0.0;
    const int y0 = std::min(static_cast<int>(gy), cells - 1);
    const double fy = gy - y0;
    for (int x = 0; x < w; ++x) {
      const double gx = w > 1 ? static_cast<double>(x) * cells / (w - 1) : 0.0;
      const int x0 = std::min(static_cast<int>(gx), cells - 1);
      const double fx = gx - x0;
      const auto node = [&](int r, int c) { return grid[static_cast<std::size_t>(r) * nodes + c]; };
      const double field = (node(y0, x0) * (1 - fx) + node(y0, x0 + 1) * fx) * (1 - fy) +
                           (node(y0 + 1, x0) * (1 - fx) + node(y0 + 1, x0 + 1) * fx) * fy;
      const float factor = 1.0f + beta * static_cast<float>(field);
      for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) *= factor;
    }
  }
  out.clamp();
  return out;
}

Image pixelate(const Image& img, const DistortionSpec& spec) {
  const int block = static_cast<int>(param(spec, "block"));
  if (block == 1) return img;
  const int h = img.height();
  const int w = img.width();
  const int channels = img.channels();
  Image out(h, w, channels);
  std::vector<double> sums(static_cast<std::size_t>(channels));
  for (int by = 0; by < h; by += block) {
    for (int bx = 0; bx < w; bx += block) {
      const int y_end = std::min(by + block, h);
      const int x_end = std::min(bx + block, w);
      std::fill(sums.begin(), sums.end(), 0.0);
      for (int y = by; y < y_end; ++y) {
        for (int x = bx; x < x_end; ++x) {
          for (int c = 0; c < channels; ++c) sums[c] += img.at(y, x, c);
        }
      }
      const double count = static_cast<double>(y_end - by) * (x_end - bx);
      for (int y = by; y < y_end; ++y) {
        for (int x = bx; x < x_end; ++x) {
          for (int c = 0; c < channels; ++c) out.at(y, x, c) = static_cast<float>(sums[c] / count);
        }
      }
    }
  }
  out.clamp();
  return out;
}

Image tear(const Image& img, const DistortionSpec& spec) {
  const int count = static_cast<int>(param(spec, "count"));
  if (count == 0) return img;
  const double width = param(spec, "width");
  const double h = img.height();
  const double w = img.width();
  Rng rng(spec.seed);

  Image out = img;
  for (int i = 0; i < count; ++i) {
    // Bands run edge to edge, across or down the image.
    const bool across = rng.uniform() < 0.5;
    const Point from = across ? Point{0.0, rng.uniform(0.0, h - 1)} : Point{rng.uniform(0.0, w - 1), 0.0};
    const Point to = across ? Point{w - 1, rng.uniform(0.0, h - 1)} : Point{rng.uniform(0.0, w - 1), h - 1};
    const auto line = jagged_line(from, to, 10, std::max(1.5, width), rng);
    const double half = width / 2.0;
    paint_polyline(out, line, half + 1.0, kTearValue, [&](double d) { return d <= half ? 1.0 : 0.0; });
  }
  out.clamp();
  return out;
}

}  // namespace

std::array<DistortionType, kDistortionTypeCount> all_distortion_types() noexcept {
  std::array<DistortionType, kDistortionTypeCount> types{};
  for (int i = 0; i < kDistortionTypeCount; ++i) types[i] = static_cast<DistortionType>(i);
  return types;
}

std::string_view distortion_name(DistortionType type) noexcept {
  const int id = static_cast<int>(type);
  return id >= 0 && id < kDistortionTypeCount ? kNames[id] : std::string_view("unknown");
}

std::optional<DistortionType> parse_distortion_name(std::string_view name) noexcept {
  for (int i = 0; i < kDistortionTypeCount; ++i) {
    if (kNames[i] == name) return static_cast<DistortionType>(i);
  }
  return std::nullopt;
}

std::optional<DistortionType> distortion_from_id(int id) noexcept {
  if (id < 0 || id >= kDistortionTypeCount) return std::nullopt;
  return static_cast<DistortionType>(id);
}

DistortionParams level_params(DistortionType type, int level) {
  if (level < kMinLevel || level > kMaxLevel) {
    invalid("level must be in 1..5, got " + std::to_string(level));
  }
  const std::size_t i = static_cast<std::size_t>(level - 1);
  switch (type) {
    case DistortionType::GaussianNoise:
    case DistortionType::SpeckleNoise: return {{"sigma", kNoiseSigma[i]}};
    case DistortionType::GaussianBlur: return {{"sigma", kBlurSigma[i]}};
    case DistortionType::MotionBlur: return {{"length", kMotionLength[i]}};
    case DistortionType::Fade:
    case DistortionType::WhiteOverlay: return {{"alpha", kAlpha[i]}};
    case DistortionType::Swirl: return {{"strength", kSwirlStrength[i]}};
    case DistortionType::Scratch: return {{"count", kScratchCount[i]}, {"width_max", 2.0}, {"width_min", 1.0}};
    case DistortionType::WaterDiscolour: return {{"beta", kWaterBeta[i]}, {"cells", kDefaultWaterCells}};
    case DistortionType::Pixelate: return {{"block", kPixelBlock[i]}};
    case DistortionType::Darken: return {{"gamma", kDarkenGamma[i]}};
    case DistortionType::Tear: return {{"count", kTearCount[i]}, {"width", kTearWidth[i]}};
  }
  invalid("unknown distortion type id " + std::to_string(static_cast<int>(type)));
}

std::vector<std::string> param_keys(DistortionType type) {
  switch (type) {
    case DistortionType::GaussianNoise:
    case DistortionType::SpeckleNoise:
    case DistortionType::GaussianBlur: return {"sigma"};
    case DistortionType::MotionBlur: return {"angle", "length"};
    case DistortionType::Fade:
    case DistortionType::WhiteOverlay: return {"alpha"};
    case DistortionType::Swirl: return {"radius", "strength"};
    case DistortionType::Scratch: return {"count", "width_max", "width_min"};
    case DistortionType::WaterDiscolour: return {"beta", "cells"};
    case DistortionType::Pixelate: return {"block"};
    case DistortionType::Darken: return {"gamma"};
    case DistortionType::Tear: return {"count", "width"};
  }
  return {};
}

DistortionSpec DistortionSpec::make(DistortionType dtype, int level, std::uint64_t seed) {
  return DistortionSpec{dtype, level, seed, level_params(dtype, level)};
}

DistortionSpec DistortionSpec::with(const std::string& key, double value) const {
  DistortionSpec copy = *this;
  copy.params[key] = value;
  return copy;
}

void validate(const DistortionSpec& spec) {
  if (!distortion_from_id(static_cast<int>(spec.dtype))) {
    invalid("unknown distortion type id " + std::to_string(static_cast<int>(spec.dtype)));
  }
  if (spec.level < kMinLevel || spec.level > kMaxLevel) {
    invalid("level must be in 1..5, got " + std::to_string(spec.level));
  }
  const auto keys = param_keys(spec.dtype);
  const std::string name(distortion_name(spec.dtype));
  for (const auto& [key, value] : spec.params) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      invalid(name + " does not take parameter '" + key + "'");
    }
    if (!std::isfinite(value)) invalid(name + " parameter '" + key + "' is not finite");
  }
  auto require = [&](const std::string& key, bool ok, const char* rule) {
    if (!ok) invalid(name + " parameter '" + key + "' must be " + rule);
  };
  auto in_range = [&](const std::string& key, double lo, double hi) {
    const double v = param(spec, key);
    require(key, v >= lo && v <= hi, ("in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]").c_str());
  };
  auto count_at_least = [&](const std::string& key, double lo) {
    const double v = param(spec, key);
    require(key, is_integral(v) && v >= lo, ("an integer >= " + std::to_string(static_cast<int>(lo))).c_str());
  };

  switch (spec.dtype) {
    case DistortionType::GaussianNoise:
    case DistortionType::SpeckleNoise: in_range("sigma", 0.0, 1.0); break;
    case DistortionType::GaussianBlur: in_range("sigma", 0.0, 64.0); break;
    case DistortionType::MotionBlur: count_at_least("length", 1); break;
    case DistortionType::Fade:
    case DistortionType::WhiteOverlay: in_range("alpha", 0.0, 1.0); break;
    case DistortionType::Swirl:
      in_range("strength", -4.0 * std::numbers::pi, 4.0 * std::numbers::pi);
      if (spec.params.contains("radius")) in_range("radius", 0.0, 1e9);
      break;
    case DistortionType::Scratch:
      count_at_least("count", 0);
      in_range("width_min", 0.0, 1e3);
      in_range("width_max", param(spec, "width_min"), 1e3);
      break;
    case DistortionType::WaterDiscolour:
      in_range("beta", 0.0, 1.0);
      count_at_least("cells", 1);
      break;
    case DistortionType::Pixelate: count_at_least("block", 1); break;
    case DistortionType::Darken: in_range("gamma", 0.0, 1.0); break;
    case DistortionType::Tear:
      count_at_least("count", 0);
      in_range("width", 0.0, 1e4);
      break;
  }
}

Image apply_distortion(const Image& img, const DistortionSpec& spec) {
  validate(spec);
  if (img.empty()) throw Error(Errc::InvalidDimensions, "cannot distort an empty image");
  switch (spec.dtype) {
    case DistortionType::GaussianNoise: return gaussian_noise(img, spec, false);
    case DistortionType::SpeckleNoise: return gaussian_noise(img, spec, true);
    case DistortionType::GaussianBlur: return gaussian_blur(img, spec);
    case DistortionType::MotionBlur: return motion_blur(img, spec);
    case DistortionType::Fade: return fade(img, spec);
    case DistortionType::WhiteOverlay: {
      const float alpha = static_cast<float>(param(spec, "alpha"));
      return map_samples(img, [alpha](float b) { return (1.0f - alpha) * b + alpha; });
    }
    case DistortionType::Swirl: return swirl(img, spec);
    case DistortionType::Scratch: return scratch(img, spec);
    case DistortionType::WaterDiscolour: return water_discolour(img, spec);
    case DistortionType::Pixelate: return pixelate(img, spec);
    case DistortionType::Darken: {
      const float gamma = static_cast<float>(param(spec, "gamma"));
      return map_samples(img, [gamma](float b) { return gamma * b; });
    }
    case DistortionType::Tear: return tear(img, spec);
  }
  invalid("unknown distortion type");
}

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma >= 0.0)) throw Error(Errc::InvalidSpec, "blur sigma must be non-negative");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  if (radius == 0) return {1.0};
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  for (int k = -radius; k <= radius; ++k) taps[k + radius] = std::exp(-0.5 * (k * k) / (sigma * sigma));
  const double total = std::accumulate(taps.begin(), taps.end(), 0.0);
  for (double& t : taps) t /= total;
  return taps;
}

std::vector<double> motion_kernel(int length, double angle) {
  if (length <= 1) return {1.0};
  const int side = length % 2 == 1 ? length : length + 1;
  const double centre = side / 2;
  std::vector<double> kernel(static_cast<std::size_t>(side) * side, 0.0);
  // Supersample the segment and splat each point bilinearly.
  const int samples = 8 * length;
  const double half = (length - 1) / 2.0;
  for (int i = 0; i < samples; ++i) {
    const double t = -half + (2.0 * half) * i / (samples - 1);
    const double x = centre + t * std::cos(angle);
    const double y = centre - t * std::sin(angle);
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0;
    const double fy = y - y0;
    const auto splat = [&](int yy, int xx, double wgt) {
      if (yy >= 0 && yy < side && xx >= 0 && xx < side) kernel[static_cast<std::size_t>(yy) * side + xx] += wgt;
    };
    splat(y0, x0, (1 - fx) * (1 - fy));
    splat(y0, x0 + 1, fx * (1 - fy));
    splat(y0 + 1, x0, (1 - fx) * fy);
    splat(y0 + 1, x0 + 1, fx * fy);
  }
  const double total = std::accumulate(kernel.begin(), kernel.end(), 0.0);
  for (double& k : kernel) k /= total;
  return kernel;
}

}  // namespace ddcnn
