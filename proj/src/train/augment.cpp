#include "train/augment.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "core/common.hpp"

namespace meev {

void apply_affine_augment(TrainingSample& sample,
                          const Eigen::Matrix<double, 2, 3>& m) {
  const Image& src = sample.crop;
  Eigen::Matrix<double, 2, 3> inv = invert_affine(m);

  Image out = Image::zeros(src.channels, src.height, src.width);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      Eigen::Vector2d p = apply_affine(inv, {x + 0.5, y + 0.5});
      for (int c = 0; c < src.channels; ++c) {
        out.at(c, y, x) = src.sample_bilinear(c, p.y() - 0.5, p.x() - 0.5);
      }
    }
  }
  sample.crop = std::move(out);

  SampleAnnotation& a = sample.annotation;
  if (a.has_joints2d) {
    for (Eigen::Index j = 0; j < a.joints2d.rows(); ++j) {
      Eigen::Vector2d p = apply_affine(m, a.joints2d.row(j).transpose());
      a.joints2d.row(j) = p.transpose();
    }
  }

  Eigen::Vector2d corners[4] = {
      apply_affine(m, {a.bbox.x, a.bbox.y}),
      apply_affine(m, {a.bbox.x + a.bbox.w, a.bbox.y}),
      apply_affine(m, {a.bbox.x, a.bbox.y + a.bbox.h}),
      apply_affine(m, {a.bbox.x + a.bbox.w, a.bbox.y + a.bbox.h})};
  double x0 = corners[0].x(), x1 = corners[0].x();
  double y0 = corners[0].y(), y1 = corners[0].y();
  for (const Eigen::Vector2d& c : corners) {
    x0 = std::min(x0, c.x());
    x1 = std::max(x1, c.x());
    y0 = std::min(y0, c.y());
    y1 = std::max(y1, c.y());
  }
  a.bbox = {x0, y0, x1 - x0, y1 - y0};

  // new crop coords go through the inverse warp before the old source map
  Eigen::Matrix<double, 2, 3> to_source;
  to_source.leftCols<2>() =
      sample.crop_to_source.leftCols<2>() * inv.leftCols<2>();
  to_source.col(2) = sample.crop_to_source.leftCols<2>() * inv.col(2) +
                     sample.crop_to_source.col(2);
  sample.crop_to_source = to_source;
}

void apply_color_jitter(Image& image, const double gain[3],
                        const double bias[3]) {
  check_arg(image.channels == 3, "color jitter expects a 3-channel image");
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) {
        double v = gain[c] * image.at(c, y, x) + bias[c];
        image.at(c, y, x) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
}

void apply_gaussian_blur(Image& image, double sigma) {
  check_arg(sigma > 0.0, "blur sigma must be positive, got ", sigma);
  int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  for (int k = -radius; k <= radius; ++k) {
    kernel[static_cast<std::size_t>(k + radius)] =
        std::exp(-0.5 * k * k / (sigma * sigma));
  }

  Image tmp = image;
  for (int c = 0; c < image.channels; ++c) {
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) {
        double acc = 0.0, wsum = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          int xx = x + k;
          if (xx < 0 || xx >= image.width) continue;
          double w = kernel[static_cast<std::size_t>(k + radius)];
          acc += w * image.at(c, y, xx);
          wsum += w;
        }
        tmp.at(c, y, x) = acc / wsum;
      }
    }
  }
  for (int c = 0; c < image.channels; ++c) {
    for (int y = 0; y < image.height; ++y) {
      for (int x = 0; x < image.width; ++x) {
        double acc = 0.0, wsum = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          int yy = y + k;
          if (yy < 0 || yy >= image.height) continue;
          double w = kernel[static_cast<std::size_t>(k + radius)];
          acc += w * tmp.at(c, yy, x);
          wsum += w;
        }
        image.at(c, y, x) = acc / wsum;
      }
    }
  }
}

void apply_coarse_dropout(Image& image, int x, int y, int w, int h) {
  int x0 = std::max(0, x);
  int y0 = std::max(0, y);
  int x1 = std::min(image.width, x + w);
  int y1 = std::min(image.height, y + h);
  for (int c = 0; c < image.channels; ++c) {
    for (int yy = y0; yy < y1; ++yy) {
      for (int xx = x0; xx < x1; ++xx) {
        image.at(c, yy, xx) = 0.0;
      }
    }
  }
}

void augment_sample(TrainingSample& sample, const AugmentConfig& cfg,
                    Rng& rng) {
  cfg.validate();
  const int w = sample.crop.width;
  const int h = sample.crop.height;

  if (rng.bernoulli(cfg.p_affine)) {
    double angle =
        rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg) * M_PI /
        180.0;
    double scale = rng.uniform(cfg.scale_lo, cfg.scale_hi);
    double tx = rng.uniform(-cfg.max_translate_px, cfg.max_translate_px);
    double ty = rng.uniform(-cfg.max_translate_px, cfg.max_translate_px);

    double ca = scale * std::cos(angle);
    double sa = scale * std::sin(angle);
    Eigen::Vector2d center(w / 2.0, h / 2.0);
    Eigen::Matrix<double, 2, 3> m;
    m << ca, -sa, 0.0, sa, ca, 0.0;
    m.col(2) = center - m.leftCols<2>() * center + Eigen::Vector2d(tx, ty);
    apply_affine_augment(sample, m);
  }

  if (rng.bernoulli(cfg.p_color)) {
    double gain[3], bias[3];
    for (int c = 0; c < 3; ++c) {
      gain[c] = rng.uniform(cfg.color_gain_lo, cfg.color_gain_hi);
      bias[c] = rng.uniform(-cfg.color_bias, cfg.color_bias);
    }
    apply_color_jitter(sample.crop, gain, bias);
  }

  if (rng.bernoulli(cfg.p_blur)) {
    apply_gaussian_blur(sample.crop,
                        rng.uniform(cfg.blur_sigma_lo, cfg.blur_sigma_hi));
  }

  if (rng.bernoulli(cfg.p_dropout)) {
    int rects = rng.uniform_int(1, cfg.dropout_max_rects);
    for (int r = 0; r < rects; ++r) {
      int rw = std::max(1, static_cast<int>(rng.uniform(0.05, cfg.dropout_max_frac) * w));
      int rh = std::max(1, static_cast<int>(rng.uniform(0.05, cfg.dropout_max_frac) * h));
      int rx = rng.uniform_int(0, std::max(0, w - rw));
      int ry = rng.uniform_int(0, std::max(0, h - rh));
      apply_coarse_dropout(sample.crop, rx, ry, rw, rh);
    }
  }
}

}  // namespace meev
