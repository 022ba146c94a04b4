#pragma once

#include "data/crop.hpp"
#include "train/config.hpp"

namespace meev {

// Warps the crop by an affine map m (old crop coords -> new crop coords)
// and rewrites the 2D annotations with exactly the same map. Pixels pulled
// from outside the old crop read as zero. The rewritten bbox is the axis
// aligned hull of the transformed corners.
void apply_affine_augment(TrainingSample& sample,
                          const Eigen::Matrix<double, 2, 3>& m);

// Per-channel gain and bias, clamped back to [0, 1]. Photometric only.
void apply_color_jitter(Image& image, const double gain[3],
                        const double bias[3]);

// Separable Gaussian blur; border taps renormalize instead of darkening.
void apply_gaussian_blur(Image& image, double sigma);

// Zeroes an axis-aligned rectangle across all channels.
void apply_coarse_dropout(Image& image, int x, int y, int w, int h);

// Draws the configured augmentations from rng and applies them in a fixed
// order (affine, color, blur, dropout). With all probabilities at zero the
// sample passes through bit-identical.
void augment_sample(TrainingSample& sample, const AugmentConfig& cfg,
                    Rng& rng);

}  // namespace meev
