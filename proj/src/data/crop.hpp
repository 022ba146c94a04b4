#pragma once

#include <Eigen/Core>

#include "data/dataset.hpp"

namespace meev {

struct CropConfig {
  int width = 192;
  int height = 256;
  double margin = 1.25;  // scale applied after aspect expansion
};

// Resampled network input plus the affine map that places it back in the
// source image. crop_to_source maps continuous crop pixels (corner origin)
// to continuous source pixels, so (0,0) and (width,height) land on the
// corners of the sampled region.
struct ImageCrop {
  Image image;  // [3, height, width]
  Eigen::Matrix<double, 2, 3> crop_to_source;
};

Eigen::Matrix<double, 2, 3> invert_affine(
    const Eigen::Matrix<double, 2, 3>& t);

Eigen::Vector2d apply_affine(const Eigen::Matrix<double, 2, 3>& t,
                             const Eigen::Vector2d& p);

// Expands bbox to the crop aspect ratio about its center, scales it by the
// margin, and resamples that region bilinearly. Regions outside the source
// read as zero; a bbox with no overlap at all is a data error.
ImageCrop crop_from_bbox(const Image& source, const BBox& bbox,
                         const CropConfig& cfg = {});

// Fully prepared training input: cropped pixels plus the annotation with
// 2D joints and bbox rewritten in crop coordinates.
struct TrainingSample {
  Image crop;
  Eigen::Matrix<double, 2, 3> crop_to_source;
  SampleAnnotation annotation;
};

TrainingSample assemble_training_sample(const Image& source,
                                        const SampleAnnotation& annotation,
                                        const CropConfig& cfg = {});

}  // namespace meev
