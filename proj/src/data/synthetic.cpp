#include "data/synthetic.hpp"

#include <cmath>

#include "core/common.hpp"

namespace meev {

Eigen::MatrixXd project_pinhole(const Eigen::MatrixXd& points3d,
                                const SyntheticCamera& cam) {
  check_arg(points3d.cols() == 3, "project_pinhole: expected [N,3] points");
  Eigen::MatrixXd uv(points3d.rows(), 2);
  for (Eigen::Index i = 0; i < points3d.rows(); ++i) {
    double z = points3d(i, 2);
    check_arg(z > 1e-6, "project_pinhole: point ", i,
              " is behind the camera (z=", z, ")");
    uv(i, 0) = cam.cx + cam.focal * points3d(i, 0) / z;
    uv(i, 1) = cam.cy - cam.focal * points3d(i, 1) / z;
  }
  return uv;
}

namespace {

// Stream tags keep parameter sampling and pixel noise independent, so the
// renderer can be re-run without consuming the record stream.
constexpr std::uint64_t kParamStream = 0;
constexpr std::uint64_t kNoiseStream = 1;

constexpr double kBlobSigma = 3.0;
constexpr double kNoiseLevel = 0.12;
constexpr double kBBoxPad = 8.0;

double blob_gain(int joint, int channel) {
  return 0.35 + 0.3 * std::sin(1.3 * joint + 2.1 * channel);
}

}  // namespace

ManifestRecord make_synthetic_record(const BodyModelDefinition& def,
                                     std::uint64_t seed, int index,
                                     const SyntheticCamera& cam) {
  check_arg(index >= 0, "make_synthetic_record: negative index");
  Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(index), kParamStream));

  BodyParams params = BodyParams::rest(def);
  for (int j = 0; j < def.num_joints(); ++j) {
    Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
    double n = axis.norm();
    if (n < 1e-12) axis = Eigen::Vector3d::UnitX();
    else axis /= n;
    double magnitude = rng.uniform(0.0, j == 0 ? 0.25 : 0.35);
    params.theta.row(j) = (magnitude * axis).transpose();
  }
  for (int b = 0; b < def.num_betas(); ++b) {
    params.beta(b) = rng.uniform(-1.2, 1.2);
  }
  params.trans = Eigen::Vector3d(rng.uniform(-0.08, 0.08),
                                 rng.uniform(-0.08, 0.08),
                                 rng.uniform(2.3, 2.9));

  BodyForwardResult fwd = body_forward(def, params);
  Eigen::MatrixXd joints2d = project_pinhole(fwd.joints, cam);

  ManifestRecord rec;
  rec.kind = SampleSourceKind::synthetic;
  rec.synth_seed = seed;
  rec.synth_index = index;

  SampleAnnotation& a = rec.annotation;
  a.has_joints3d = true;
  a.joints3d = fwd.joints;
  a.has_joints2d = true;
  a.joints2d = joints2d;
  a.has_params = true;
  a.theta = params.theta;
  a.beta = params.beta;
  a.trans = params.trans;

  double u0 = joints2d.col(0).minCoeff() - kBBoxPad;
  double u1 = joints2d.col(0).maxCoeff() + kBBoxPad;
  double v0 = joints2d.col(1).minCoeff() - kBBoxPad;
  double v1 = joints2d.col(1).maxCoeff() + kBBoxPad;
  a.bbox = {u0, v0, u1 - u0, v1 - v0};
  return rec;
}

Image render_synthetic_image(const ManifestRecord& record,
                             const SyntheticCamera& cam) {
  check_arg(record.kind == SampleSourceKind::synthetic,
            "render_synthetic_image: not a synthetic record");
  check_arg(record.annotation.has_joints2d,
            "render_synthetic_image: record has no 2D joints");

  Rng rng(Rng::mix(record.synth_seed,
                   static_cast<std::uint64_t>(record.synth_index),
                   kNoiseStream));
  Image img = Image::zeros(3, cam.height, cam.width);
  for (double& v : img.data) v = kNoiseLevel * rng.uniform();

  const Eigen::MatrixXd& joints2d = record.annotation.joints2d;
  int window = static_cast<int>(std::ceil(3.0 * kBlobSigma));
  for (Eigen::Index j = 0; j < joints2d.rows(); ++j) {
    double u = joints2d(j, 0);
    double v = joints2d(j, 1);
    int x0 = std::max(0, static_cast<int>(std::floor(u)) - window);
    int x1 = std::min(cam.width - 1, static_cast<int>(std::floor(u)) + window);
    int y0 = std::max(0, static_cast<int>(std::floor(v)) - window);
    int y1 =
        std::min(cam.height - 1, static_cast<int>(std::floor(v)) + window);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        double dx = x + 0.5 - u;
        double dy = y + 0.5 - v;
        double g = std::exp(-(dx * dx + dy * dy) /
                            (2.0 * kBlobSigma * kBlobSigma));
        for (int c = 0; c < 3; ++c) {
          img.at(c, y, x) += blob_gain(static_cast<int>(j), c) * g;
        }
      }
    }
  }
  for (double& v : img.data) v = std::min(1.0, v);
  return img;
}

DatasetManifest generate_synthetic_dataset(int n, std::uint64_t seed,
                                           const BodyModelDefinition& def,
                                           const SyntheticCamera& cam) {
  check_arg(n >= 1, "generate_synthetic_dataset: n must be >= 1, got ", n);
  DatasetManifest manifest;
  manifest.records.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    manifest.records.push_back(make_synthetic_record(def, seed, i, cam));
  }
  return manifest;
}

namespace {

class SyntheticSource : public SampleSource {
 public:
  SyntheticSource(DatasetManifest manifest, const SyntheticCamera& cam)
      : manifest_(std::move(manifest)) {
    images_.reserve(manifest_.records.size());
    for (const ManifestRecord& rec : manifest_.records) {
      images_.push_back(render_synthetic_image(rec, cam));
    }
  }

  int size() const override { return manifest_.size(); }
  const ManifestRecord& record(int index) const override {
    check_arg(index >= 0 && index < size(), "sample index ", index,
              " out of range");
    return manifest_.records[index];
  }
  Image image(int index) const override {
    check_arg(index >= 0 && index < size(), "sample index ", index,
              " out of range");
    return images_[index];
  }

 private:
  DatasetManifest manifest_;
  std::vector<Image> images_;
};

}  // namespace

std::unique_ptr<SampleSource> make_synthetic_source(
    DatasetManifest manifest, const BodyModelDefinition& def,
    const SyntheticCamera& cam) {
  for (int i = 0; i < manifest.size(); ++i) {
    const ManifestRecord& rec = manifest.records[i];
    check(rec.kind == SampleSourceKind::synthetic, Status::data_error,
          concat("synthetic source: record ", i, " is not synthetic"));
    ManifestRecord fresh =
        make_synthetic_record(def, rec.synth_seed, rec.synth_index, cam);
    check(records_equal(fresh, rec), Status::data_error,
          concat("synthetic source: record ", i,
                 " does not match its (seed, index) regeneration; wrong "
                 "body model or camera?"));
  }
  return std::make_unique<SyntheticSource>(std::move(manifest), cam);
}

}  // namespace meev
