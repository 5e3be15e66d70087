#include "ddcnn/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "ddcnn/error.hpp"

namespace ddcnn {
namespace {

void check_dims(int height, int width, int channels) {
  if (height < 1 || width < 1) {
    throw Error(Errc::InvalidDimensions,
                "image dimensions must be positive, got " + std::to_string(height) + "x" + std::to_string(width));
  }
  if (channels != 1 && channels != 3) {
    throw Error(Errc::InvalidDimensions, "image channels must be 1 or 3, got " + std::to_string(channels));
  }
}

float clamp01(float v) noexcept {
  if (!(v > 0.0f)) return 0.0f;  // also maps NaN to 0
  return v < 1.0f ? v : 1.0f;
}

}  // namespace

Image::Image(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  check_dims(height, width, channels);
  data_.assign(static_cast<std::size_t>(height) * width * channels, clamp01(fill));
}

Image::Image(int height, int width, int channels, std::vector<float> samples)
    : height_(height), width_(width), channels_(channels), data_(std::move(samples)) {
  check_dims(height, width, channels);
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    throw Error(Errc::InvalidDimensions, "sample count " + std::to_string(data_.size()) + " does not match " +
                                             std::to_string(height) + "x" + std::to_string(width) + "x" +
                                             std::to_string(channels));
  }
  for (float s : data_) {
    if (std::isnan(s)) throw Error(Errc::NonFinite, "image samples contain NaN");
  }
  clamp();
}

void Image::clamp() noexcept {
  for (float& s : data_) s = clamp01(s);
}

unsigned char quantize_sample(float s) noexcept {
  return static_cast<unsigned char>(std::lround(static_cast<double>(clamp01(s)) * 255.0));
}

Image quantize(const Image& img) {
  Image out = img;
  for (float& s : out.samples()) s = static_cast<float>(quantize_sample(s)) / 255.0f;
  return out;
}

Image load_image(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(Errc::FileNotFound, "no such file: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    throw Error(Errc::UnsupportedFormat, "not a PNG file: " + path.string());
  }

  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()) == 0) {
    throw Error(Errc::CorruptData, path.string() + ": " + image.message);
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<unsigned char> pixels(PNG_IMAGE_SIZE(image));
  if (png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr) == 0) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw Error(Errc::CorruptData, path.string() + ": " + msg);
  }

  std::vector<float> samples(pixels.size());
  std::transform(pixels.begin(), pixels.end(), samples.begin(),
                 [](unsigned char b) { return static_cast<float>(b) / 255.0f; });
  return Image(static_cast<int>(image.height), static_cast<int>(image.width), channels, std::move(samples));
}

void save_image(const Image& img, const std::filesystem::path& path) {
  if (img.empty()) throw Error(Errc::InvalidDimensions, "cannot save an empty image");
  std::vector<unsigned char> bytes(img.size());
  std::transform(img.samples().begin(), img.samples().end(), bytes.begin(), quantize_sample);

  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = img.channels() == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const std::string file = path.string();
  if (png_image_write_to_file(&image, file.c_str(), 0, bytes.data(), 0, nullptr) == 0) {
    throw Error(Errc::IoError, "cannot write " + file + ": " + image.message);
  }
}

Image resize(const Image& img, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) {
    throw Error(Errc::InvalidDimensions,
                "resize target must be positive, got " + std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  if (out_h == img.height() && out_w == img.width()) return img;

  const int channels = img.channels();
  Image out(out_h, out_w, channels);
  const double sy_scale = static_cast<double>(img.height()) / out_h;
  const double sx_scale = static_cast<double>(img.width()) / out_w;

  for (int y = 0; y < out_h; ++y) {
    const double sy = std::clamp((y + 0.5) * sy_scale - 0.5, 0.0, static_cast<double>(img.height() - 1));
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double fy = sy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double sx = std::clamp((x + 0.5) * sx_scale - 0.5, 0.0, static_cast<double>(img.width() - 1));
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const double fx = sx - x0;
      for (int c = 0; c < channels; ++c) {
        const double top = img.at(y0, x0, c) * (1.0 - fx) + img.at(y0, x1, c) * fx;
        const double bottom = img.at(y1, x0, c) * (1.0 - fx) + img.at(y1, x1, c) * fx;
        out.at(y, x, c) = static_cast<float>(top * (1.0 - fy) + bottom * fy);
      }
    }
  }
  out.clamp();
  return out;
}

Image crop_patch(const Image& img, int top, int left, int size) {
  if (top < 0 || left < 0 || size < 1 || top + size > img.height() || left + size > img.width()) {
    throw Error(Errc::OutOfBounds, "crop (" + std::to_string(top) + "," + std::to_string(left) + "," +
                                       std::to_string(size) + ") exceeds " + std::to_string(img.height()) + "x" +
                                       std::to_string(img.width()));
  }
  const int channels = img.channels();
  std::vector<float> samples;
  samples.reserve(static_cast<std::size_t>(size) * size * channels);
  for (int y = top; y < top + size; ++y) {
    const auto row = img.samples().subspan((static_cast<std::size_t>(y) * img.width() + left) * channels,
                                           static_cast<std::size_t>(size) * channels);
    samples.insert(samples.end(), row.begin(), row.end());
  }
  return Image(size, size, channels, std::move(samples));
}

Image center_crop_square(const Image& img) {
  const int side = std::min(img.height(), img.width());
  const int top = (img.height() - side) / 2;
  const int left = (img.width() - side) / 2;
  return crop_patch(img, top, left, side);
}

Image augment(const Image& img, int mode) {
  if (mode < 0 || mode >= kAugmentModes) {
    throw Error(Errc::InvalidMode, "augmentation mode must be in 0..7, got " + std::to_string(mode));
  }
  const int h = img.height();
  const int w = img.width();
  const int channels = img.channels();
  const int rotation = mode % 4;
  const bool flip = mode >= 4;
  const int out_h = rotation % 2 == 0 ? h : w;
  const int out_w = rotation % 2 == 0 ? w : h;

  Image out(out_h, out_w, channels);
  for (int i = 0; i < out_h; ++i) {
    for (int j = 0; j < out_w; ++j) {
      // Undo the flip first, then the counter-clockwise rotation.
      const int jj = flip ? out_w - 1 - j : j;
      int sy = i;
      int sx = jj;
      switch (rotation) {
        case 1: sy = jj; sx = w - 1 - i; break;
        case 2: sy = h - 1 - i; sx = w - 1 - jj; break;
        case 3: sy = h - 1 - jj; sx = i; break;
        default: break;
      }
      for (int c = 0; c < channels; ++c) out.at(i, j, c) = img.at(sy, sx, c);
    }
  }
  return out;
}

Image reflect_pad(const Image& img, int pad_bottom, int pad_right) {
  if (pad_bottom < 0 || pad_right < 0) throw Error(Errc::InvalidArgument, "padding must be non-negative");
  if (pad_bottom == 0 && pad_right == 0) return img;
  const int h = img.height();
  const int w = img.width();
  auto reflect = [](int i, int n) {
    if (i < n) return i;
    const int r = 2 * (n - 1) - i;
    return r >= 0 ? r : n - 1;
  };
  Image out(h + pad_bottom, w + pad_right, img.channels());
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = img.at(reflect(y, h), reflect(x, w), c);
    }
  }
  return out;
}

Image convert_channels(const Image& img, int channels) {
  if (channels != 1 && channels != 3) throw Error(Errc::InvalidDimensions, "channels must be 1 or 3");
  if (img.channels() == channels) return img;
  Image out(img.height(), img.width(), channels);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (channels == 1) {
        out.at(y, x, 0) = 0.299f * img.at(y, x, 0) + 0.587f * img.at(y, x, 1) + 0.114f * img.at(y, x, 2);
      } else {
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, x, 0);
      }
    }
  }
  out.clamp();
  return out;
}

}  // namespace ddcnn
