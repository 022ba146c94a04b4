#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "core/image.hpp"

namespace meev {

// Axis-aligned box in source-image pixels, top-left origin.
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  bool operator==(const BBox& o) const = default;
};

// Per-sample ground truth. Datasets differ in what they annotate, so each
// signal carries its own availability flag; absent signals hold empty
// matrices. 2D joints are in source pixels inside a manifest and in crop
// pixels after crop_from_bbox has been applied.
struct SampleAnnotation {
  bool has_joints3d = false;
  Eigen::MatrixXd joints3d;  // [J,3] metres

  bool has_joints2d = false;
  Eigen::MatrixXd joints2d;  // [J,2] pixels

  bool has_params = false;
  Eigen::MatrixXd theta;  // [J,3] axis-angle
  Eigen::VectorXd beta;   // [B]
  Eigen::Vector3d trans = Eigen::Vector3d::Zero();

  BBox bbox;

  bool any_supervision() const {
    return has_joints3d || has_joints2d || has_params;
  }
};

bool annotations_equal(const SampleAnnotation& a, const SampleAnnotation& b);

enum class SampleSourceKind { file, synthetic };

struct ManifestRecord {
  SampleSourceKind kind = SampleSourceKind::file;
  std::string image_path;        // file records, relative to the manifest
  std::uint64_t synth_seed = 0;  // synthetic records
  int synth_index = 0;
  SampleAnnotation annotation;
};

bool records_equal(const ManifestRecord& a, const ManifestRecord& b);

struct DatasetManifest {
  std::vector<ManifestRecord> records;

  int size() const { return static_cast<int>(records.size()); }
};

inline constexpr int kManifestVersion = 1;

// Line-delimited JSON. The first line is a header object carrying the
// format name and version; each following line is one record. File paths
// are resolved against the manifest's own directory, and referenced images
// must exist at load time. All malformed records are collected and reported
// together with their line numbers.
DatasetManifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const DatasetManifest& manifest);

// Uniform access to sample pixels regardless of where they come from.
// Sources are immutable after construction and safe to share across
// threads.
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual int size() const = 0;
  virtual const ManifestRecord& record(int index) const = 0;
  virtual Image image(int index) const = 0;
};

// Reads record images from disk through the pluggable decoder registry.
std::unique_ptr<SampleSource> make_file_source(DatasetManifest manifest,
                                               std::string base_dir);

}  // namespace meev
