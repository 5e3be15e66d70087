#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace ddcnn {

/// H x W x C raster with samples in [0,1], stored row-major and
/// channel-interleaved: sample (y, x, c) lives at (y * W + x) * C + c.
class Image {
 public:
  Image() = default;
  /// Filled image. channels must be 1 or 3; fill is clamped to [0,1].
  Image(int height, int width, int channels, float fill = 0.0f);
  /// Adopts samples; clamps them to [0,1]. Throws on size mismatch or NaN.
  Image(int height, int width, int channels, std::vector<float> samples);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  float at(int y, int x, int c) const noexcept { return data_[index(y, x, c)]; }
  /// Unchecked write access. Callers that may leave [0,1] must call clamp().
  float& at(int y, int x, int c) noexcept { return data_[index(y, x, c)]; }

  std::span<const float> samples() const noexcept { return data_; }
  std::span<float> samples() noexcept { return data_; }

  /// Clamps every sample to [0,1]. NaN becomes 0.
  void clamp() noexcept;

  bool same_shape(const Image& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Reads an 8-bit PNG. Gray and gray+alpha load as 1 channel, everything
/// else as RGB; alpha is discarded.
Image load_image(const std::filesystem::path& path);

/// Writes an 8-bit PNG, quantizing each sample with quantize_sample.
void save_image(const Image& img, const std::filesystem::path& path);

/// round(s * 255) with halves away from zero, after clamping to [0,1].
unsigned char quantize_sample(float s) noexcept;

/// Snaps every sample to the 1/255 grid, the same values a save/load round trip yields.
Image quantize(const Image& img);

/// Bilinear resize with half-pixel-centred sampling and edge clamping.
Image resize(const Image& img, int out_h, int out_w);

/// size x size window starting at (top, left).
Image crop_patch(const Image& img, int top, int left, int size);

/// Largest centred square crop; used before resizing ingested art to a canonical size.
Image center_crop_square(const Image& img);

/// Dihedral augmentation. 0..3 rotate counter-clockwise by mode * 90 degrees;
/// 4..7 apply rotation (mode - 4) followed by a horizontal flip.
Image augment(const Image& img, int mode);

inline constexpr int kAugmentModes = 8;

/// Edge-reflecting pad on the bottom and right (reflection excludes the edge sample).
Image reflect_pad(const Image& img, int pad_bottom, int pad_right);

/// Converts to `channels`: RGB to gray uses BT.601 luma, gray to RGB replicates.
Image convert_channels(const Image& img, int channels);

}  // namespace ddcnn
