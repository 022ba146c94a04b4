#pragma once

#include <functional>
#include <string>
#include <vector>

#include "core/common.hpp"

namespace meev {

// Planar image, values in [0, 1], layout [channel][row][col].
struct Image {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  static Image zeros(int c, int h, int w) {
    Image img;
    img.channels = c;
    img.height = h;
    img.width = w;
    img.data.assign(static_cast<std::size_t>(c) * h * w, 0.0);
    return img;
  }

  bool empty() const { return data.empty(); }

  double& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }

  // zero padding outside the image
  double sample_bilinear(int c, double y, double x) const;
};

Image read_ppm(const std::string& path);
void write_ppm(const std::string& path, const Image& img);

// Pluggable decoders keyed by lowercase file extension. "ppm" and "pgm"
// are built in.
using ImageReader = std::function<Image(const std::string& path)>;
void register_image_reader(const std::string& extension, ImageReader reader);
Image read_image(const std::string& path);

}  // namespace meev
