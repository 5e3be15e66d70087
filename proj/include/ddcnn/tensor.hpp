#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ddcnn/error.hpp"

namespace ddcnn {

/// Dense N x C x H x W array in row-major order.
template <typename T>
class Tensor4 {
 public:
  using value_type = T;

  Tensor4() = default;
  Tensor4(int n, int c, int h, int w, T fill = T{0}) : n_(n), c_(c), h_(h), w_(w) {
    if (n < 0 || c < 0 || h < 0 || w < 0) throw Error(Errc::InvalidShape, "negative tensor extent");
    data_.assign(static_cast<std::size_t>(n) * c * h * w, fill);
  }
  Tensor4(int n, int c, int h, int w, std::vector<T> data) : n_(n), c_(c), h_(h), w_(w), data_(std::move(data)) {
    if (data_.size() != static_cast<std::size_t>(n) * c * h * w) {
      throw Error(Errc::InvalidShape, "tensor data length does not match shape " + shape_string());
    }
  }

  int n() const noexcept { return n_; }
  int c() const noexcept { return c_; }
  int h() const noexcept { return h_; }
  int w() const noexcept { return w_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(h_) * w_; }

  T& operator()(int n, int c, int y, int x) noexcept { return data_[offset(n, c, y, x)]; }
  T operator()(int n, int c, int y, int x) const noexcept { return data_[offset(n, c, y, x)]; }

  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }
  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }

  /// Pointer to plane (n, c).
  T* plane_ptr(int n, int c) noexcept { return data_.data() + offset(n, c, 0, 0); }
  const T* plane_ptr(int n, int c) const noexcept { return data_.data() + offset(n, c, 0, 0); }

  bool same_shape(const Tensor4& o) const noexcept { return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_; }

  std::string shape_string() const {
    return "(" + std::to_string(n_) + "," + std::to_string(c_) + "," + std::to_string(h_) + "," + std::to_string(w_) +
           ")";
  }

  bool all_finite() const noexcept {
    for (T v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  template <typename U>
  Tensor4<U> cast() const {
    return Tensor4<U>(n_, c_, h_, w_, std::vector<U>(data_.begin(), data_.end()));
  }

  friend bool operator==(const Tensor4&, const Tensor4&) = default;

 private:
  std::size_t offset(int n, int c, int y, int x) const noexcept {
    return ((static_cast<std::size_t>(n) * c_ + c) * h_ + y) * w_ + x;
  }

  int n_ = 0;
  int c_ = 0;
  int h_ = 0;
  int w_ = 0;
  std::vector<T> data_;
};

template <typename T>
void require_finite(const Tensor4<T>& t, const char* what) {
  if (!t.all_finite()) throw Error(Errc::NonFinite, std::string(what) + " contains NaN or Inf");
}

template <typename T>
void require_finite(std::span<const T> values, const char* what) {
  for (T v : values) {
    if (!std::isfinite(v)) throw Error(Errc::NonFinite, std::string(what) + " contains NaN or Inf");
  }
}

}  // namespace ddcnn
