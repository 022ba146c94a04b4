#include "core/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>

namespace meev {

double Image::sample_bilinear(int c, double y, double x) const {
  int x0 = static_cast<int>(std::floor(x));
  int y0 = static_cast<int>(std::floor(y));
  double wx = x - x0;
  double wy = y - y0;
  double acc = 0.0;
  for (int dy = 0; dy < 2; ++dy) {
    int yy = y0 + dy;
    if (yy < 0 || yy >= height) continue;
    double rw = dy ? wy : 1.0 - wy;
    for (int dx = 0; dx < 2; ++dx) {
      int xx = x0 + dx;
      if (xx < 0 || xx >= width) continue;
      double cw = dx ? wx : 1.0 - wx;
      acc += rw * cw * at(c, yy, xx);
    }
  }
  return acc;
}

namespace {

int read_pnm_int(std::istream& is, const std::string& path) {
  // skips whitespace and '#' comments
  int c = is.peek();
  while (c != EOF) {
    if (c == '#') {
      std::string line;
      std::getline(is, line);
    } else if (std::isspace(c)) {
      is.get();
    } else {
      break;
    }
    c = is.peek();
  }
  int value = -1;
  is >> value;
  check(is.good() && value >= 0, Status::data_error, "malformed PNM header: ",
        path);
  return value;
}

Image read_pnm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  check(is.good(), Status::data_error, "cannot open image: ", path);
  char p = 0, kind = 0;
  is.get(p);
  is.get(kind);
  check(is.good() && p == 'P' && (kind == '5' || kind == '6'),
        Status::data_error, "unsupported PNM type in ", path,
        " (binary P5/P6 only)");
  int w = read_pnm_int(is, path);
  int h = read_pnm_int(is, path);
  int maxval = read_pnm_int(is, path);
  check(w > 0 && h > 0 && maxval > 0 && maxval < 65536, Status::data_error,
        "bad PNM dimensions in ", path);
  is.get();  // single whitespace after header
  int file_channels = kind == '6' ? 3 : 1;
  std::size_t count = static_cast<std::size_t>(w) * h * file_channels;
  std::vector<unsigned char> buf;
  double scale = 1.0 / maxval;
  if (maxval < 256) {
    buf.resize(count);
    is.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(count));
  } else {
    buf.resize(count * 2);
    is.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(count * 2));
  }
  check(is.good(), Status::data_error, "truncated image data: ", path);

  Image img = Image::zeros(3, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        int fc = file_channels == 3 ? c : 0;
        std::size_t i = (static_cast<std::size_t>(y) * w + x) * file_channels + fc;
        double v = maxval < 256
                       ? buf[i] * scale
                       : (buf[2 * i] * 256.0 + buf[2 * i + 1]) * scale;
        img.at(c, y, x) = v;
      }
    }
  }
  return img;
}

std::string lower_ext(const std::string& path) {
  auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext;
}

std::mutex g_reader_mutex;
std::map<std::string, ImageReader>& reader_map() {
  static std::map<std::string, ImageReader> readers = {
      {"ppm", read_pnm},
      {"pgm", read_pnm},
  };
  return readers;
}

}  // namespace

Image read_ppm(const std::string& path) { return read_pnm(path); }

void write_ppm(const std::string& path, const Image& img) {
  check_arg(img.channels == 3, "write_ppm expects 3 channels, got ",
            img.channels);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  check(os.good(), Status::data_error, "cannot open for write: ", path);
  os << "P6\n" << img.width << " " << img.height << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
        row[static_cast<std::size_t>(x) * 3 + c] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
    os.write(reinterpret_cast<const char*>(row.data()),
             static_cast<std::streamsize>(row.size()));
  }
  check(os.good(), Status::data_error, "write failed: ", path);
}

void register_image_reader(const std::string& extension, ImageReader reader) {
  std::lock_guard<std::mutex> lock(g_reader_mutex);
  auto& readers = reader_map();
  check(!readers.count(extension), Status::config_error,
        "image reader for extension '", extension, "' already registered");
  readers[extension] = std::move(reader);
}

Image read_image(const std::string& path) {
  std::string ext = lower_ext(path);
  ImageReader reader;
  {
    std::lock_guard<std::mutex> lock(g_reader_mutex);
    auto& readers = reader_map();
    auto it = readers.find(ext);
    check(it != readers.end(), Status::data_error,
          "no image reader registered for extension '", ext, "' (", path, ")");
    reader = it->second;
  }
  return reader(path);
}

}  // namespace meev
