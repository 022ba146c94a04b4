#include "data/crop.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "core/common.hpp"

namespace meev {

Eigen::Matrix<double, 2, 3> invert_affine(
    const Eigen::Matrix<double, 2, 3>& t) {
  Eigen::Matrix2d a = t.leftCols<2>();
  double det = a.determinant();
  check_arg(std::abs(det) > 1e-300, "affine transform is singular");
  Eigen::Matrix2d ai = a.inverse();
  Eigen::Matrix<double, 2, 3> out;
  out.leftCols<2>() = ai;
  out.col(2) = -ai * t.col(2);
  return out;
}

Eigen::Vector2d apply_affine(const Eigen::Matrix<double, 2, 3>& t,
                             const Eigen::Vector2d& p) {
  return t.leftCols<2>() * p + t.col(2);
}

namespace {

// Center-preserving expansion of the bbox to the target aspect ratio,
// then the margin scale.
BBox expand_bbox(const BBox& bbox, const CropConfig& cfg) {
  double aspect = double(cfg.width) / double(cfg.height);
  double w = bbox.w, h = bbox.h;
  if (w / h > aspect) {
    h = w / aspect;
  } else {
    w = h * aspect;
  }
  w *= cfg.margin;
  h *= cfg.margin;
  double cx = bbox.x + bbox.w / 2.0;
  double cy = bbox.y + bbox.h / 2.0;
  return {cx - w / 2.0, cy - h / 2.0, w, h};
}

}  // namespace

ImageCrop crop_from_bbox(const Image& source, const BBox& bbox,
                         const CropConfig& cfg) {
  check_arg(source.channels == 3, "crop_from_bbox: expected a 3-channel image");
  check_arg(bbox.w > 0.0 && bbox.h > 0.0,
            "crop_from_bbox: bbox must have positive size, got w=", bbox.w,
            " h=", bbox.h);
  check_arg(cfg.width >= 1 && cfg.height >= 1 && cfg.margin > 0.0,
            "crop_from_bbox: bad crop config");

  bool overlaps = bbox.x < source.width && bbox.x + bbox.w > 0.0 &&
                  bbox.y < source.height && bbox.y + bbox.h > 0.0;
  check(overlaps, Status::data_error,
        concat("crop_from_bbox: bbox (", bbox.x, ", ", bbox.y, ", ", bbox.w,
               ", ", bbox.h, ") lies fully outside the ", source.width, "x",
               source.height, " image"));

  BBox region = expand_bbox(bbox, cfg);

  ImageCrop crop;
  crop.crop_to_source << region.w / cfg.width, 0.0, region.x, 0.0,
      region.h / cfg.height, region.y;

  crop.image = Image::zeros(3, cfg.height, cfg.width);
  for (int y = 0; y < cfg.height; ++y) {
    double sy = region.y + (y + 0.5) * region.h / cfg.height;
    for (int x = 0; x < cfg.width; ++x) {
      double sx = region.x + (x + 0.5) * region.w / cfg.width;
      for (int c = 0; c < 3; ++c) {
        crop.image.at(c, y, x) = source.sample_bilinear(c, sy - 0.5, sx - 0.5);
      }
    }
  }
  return crop;
}

TrainingSample assemble_training_sample(const Image& source,
                                        const SampleAnnotation& annotation,
                                        const CropConfig& cfg) {
  ImageCrop crop = crop_from_bbox(source, annotation.bbox, cfg);
  Eigen::Matrix<double, 2, 3> to_crop = invert_affine(crop.crop_to_source);

  TrainingSample sample;
  sample.crop = std::move(crop.image);
  sample.crop_to_source = crop.crop_to_source;
  sample.annotation = annotation;

  if (annotation.has_joints2d) {
    for (Eigen::Index j = 0; j < annotation.joints2d.rows(); ++j) {
      Eigen::Vector2d p = apply_affine(
          to_crop, annotation.joints2d.row(j).transpose());
      sample.annotation.joints2d.row(j) = p.transpose();
    }
  }

  Eigen::Vector2d tl = apply_affine(
      to_crop, Eigen::Vector2d(annotation.bbox.x, annotation.bbox.y));
  Eigen::Vector2d br = apply_affine(
      to_crop, Eigen::Vector2d(annotation.bbox.x + annotation.bbox.w,
                               annotation.bbox.y + annotation.bbox.h));
  sample.annotation.bbox = {tl.x(), tl.y(), br.x() - tl.x(), br.y() - tl.y()};
  return sample;
}

}  // namespace meev
