#pragma once

#include "body/body_model.hpp"
#include "data/dataset.hpp"

namespace meev {

// Schematic renderer settings. The source frame is a pinhole camera view;
// joints are splatted as Gaussian blobs over a noise background so the
// pixels actually encode the pose.
struct SyntheticCamera {
  int width = 192;
  int height = 256;
  double focal = 320.0;
  double cx = 96.0;
  double cy = 128.0;
};

Eigen::MatrixXd project_pinhole(const Eigen::MatrixXd& points3d,
                                const SyntheticCamera& cam);

// Record for sample `index` of the dataset stream `seed`: bounded random
// body parameters, ground-truth joints and 2D projections from the body
// model, and a bbox around the projected skeleton. Pure function of its
// arguments.
ManifestRecord make_synthetic_record(const BodyModelDefinition& def,
                                     std::uint64_t seed, int index,
                                     const SyntheticCamera& cam = {});

// Deterministic pixels for a synthetic record.
Image render_synthetic_image(const ManifestRecord& record,
                             const SyntheticCamera& cam = {});

DatasetManifest generate_synthetic_dataset(int n, std::uint64_t seed,
                                           const BodyModelDefinition& def,
                                           const SyntheticCamera& cam = {});

// Renders images on demand from the record's (seed, index) identity.
std::unique_ptr<SampleSource> make_synthetic_source(
    DatasetManifest manifest, const BodyModelDefinition& def,
    const SyntheticCamera& cam = {});

}  // namespace meev
