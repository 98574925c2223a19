#pragma once

#include <cstddef>
#include <vector>

#include "gslam/core.hpp"

namespace gslam {

/// Dense row-major image buffer; channel index varies fastest.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, int c, T fill = T{})
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  T& at(int x, int y, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  const T& at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
};

using ImageD = Image<double>;

}  // namespace gslam
