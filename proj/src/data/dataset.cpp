#include "data/dataset.hpp"

#include <filesystem>
#include <fstream>

#include "core/common.hpp"
#include "json.hpp"

namespace meev {

namespace fs = std::filesystem;
using nlohmann::json;

bool annotations_equal(const SampleAnnotation& a, const SampleAnnotation& b) {
  if (a.has_joints3d != b.has_joints3d || a.has_joints2d != b.has_joints2d ||
      a.has_params != b.has_params || !(a.bbox == b.bbox)) {
    return false;
  }
  if (a.has_joints3d && a.joints3d != b.joints3d) return false;
  if (a.has_joints2d && a.joints2d != b.joints2d) return false;
  if (a.has_params &&
      (a.theta != b.theta || a.beta != b.beta || a.trans != b.trans)) {
    return false;
  }
  return true;
}

bool records_equal(const ManifestRecord& a, const ManifestRecord& b) {
  if (a.kind != b.kind) return false;
  if (a.kind == SampleSourceKind::file) {
    if (a.image_path != b.image_path) return false;
  } else {
    if (a.synth_seed != b.synth_seed || a.synth_index != b.synth_index) {
      return false;
    }
  }
  return annotations_equal(a.annotation, b.annotation);
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, int cols, const char* what) {
  if (!j.is_array() || j.empty()) {
    throw Error(Status::data_error, concat(what, ": expected a row array"));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), cols);
  for (std::size_t r = 0; r < j.size(); ++r) {
    const json& row = j[r];
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      throw Error(Status::data_error,
                  concat(what, ": row ", r, " must have ", cols, " numbers"));
    }
    for (int c = 0; c < cols; ++c) {
      if (!row[c].is_number()) {
        throw Error(Status::data_error,
                    concat(what, ": row ", r, " holds a non-number"));
      }
      m(static_cast<Eigen::Index>(r), c) = row[c].get<double>();
    }
  }
  return m;
}

json record_to_json(const ManifestRecord& rec) {
  json j;
  if (rec.kind == SampleSourceKind::file) {
    j["source"] = {{"type", "file"}, {"path", rec.image_path}};
  } else {
    j["source"] = {{"type", "synthetic"},
                   {"seed", rec.synth_seed},
                   {"index", rec.synth_index}};
  }
  const SampleAnnotation& a = rec.annotation;
  j["bbox"] = {a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h};
  if (a.has_joints3d) j["joints3d"] = matrix_to_json(a.joints3d);
  if (a.has_joints2d) j["joints2d"] = matrix_to_json(a.joints2d);
  if (a.has_params) {
    json beta = json::array();
    for (Eigen::Index i = 0; i < a.beta.size(); ++i) beta.push_back(a.beta(i));
    j["params"] = {{"theta", matrix_to_json(a.theta)},
                   {"beta", std::move(beta)},
                   {"trans", {a.trans.x(), a.trans.y(), a.trans.z()}}};
  }
  return j;
}

ManifestRecord record_from_json(const json& j) {
  ManifestRecord rec;
  if (!j.is_object()) {
    throw Error(Status::data_error, "record must be a JSON object");
  }
  const json& src = j.at("source");
  std::string type = src.at("type").get<std::string>();
  if (type == "file") {
    rec.kind = SampleSourceKind::file;
    rec.image_path = src.at("path").get<std::string>();
    if (rec.image_path.empty()) {
      throw Error(Status::data_error, "file record has an empty path");
    }
  } else if (type == "synthetic") {
    rec.kind = SampleSourceKind::synthetic;
    rec.synth_seed = src.at("seed").get<std::uint64_t>();
    rec.synth_index = src.at("index").get<int>();
  } else {
    throw Error(Status::data_error, concat("unknown source type: ", type));
  }

  SampleAnnotation& a = rec.annotation;
  const json& bbox = j.at("bbox");
  if (!bbox.is_array() || bbox.size() != 4) {
    throw Error(Status::data_error, "bbox must be [x, y, w, h]");
  }
  a.bbox = {bbox[0].get<double>(), bbox[1].get<double>(),
            bbox[2].get<double>(), bbox[3].get<double>()};
  if (!(a.bbox.w > 0.0) || !(a.bbox.h > 0.0)) {
    throw Error(Status::data_error,
                concat("bbox must have positive size, got w=", a.bbox.w,
                       " h=", a.bbox.h));
  }

  if (j.contains("joints3d")) {
    a.has_joints3d = true;
    a.joints3d = matrix_from_json(j["joints3d"], 3, "joints3d");
  }
  if (j.contains("joints2d")) {
    a.has_joints2d = true;
    a.joints2d = matrix_from_json(j["joints2d"], 2, "joints2d");
  }
  if (j.contains("params")) {
    const json& p = j["params"];
    a.has_params = true;
    a.theta = matrix_from_json(p.at("theta"), 3, "params.theta");
    const json& beta = p.at("beta");
    if (!beta.is_array()) {
      throw Error(Status::data_error, "params.beta must be an array");
    }
    a.beta.resize(static_cast<Eigen::Index>(beta.size()));
    for (std::size_t i = 0; i < beta.size(); ++i) {
      a.beta(static_cast<Eigen::Index>(i)) = beta[i].get<double>();
    }
    const json& trans = p.at("trans");
    if (!trans.is_array() || trans.size() != 3) {
      throw Error(Status::data_error, "params.trans must be [x, y, z]");
    }
    for (int i = 0; i < 3; ++i) a.trans(i) = trans[i].get<double>();
  }

  if (!a.any_supervision()) {
    throw Error(Status::data_error, "record carries no supervision signal");
  }
  return rec;
}

}  // namespace

DatasetManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(Status::data_error, concat("cannot open manifest: ", path));
  }
  fs::path base = fs::path(path).parent_path();

  std::string line;
  int line_no = 0;
  bool header_seen = false;
  DatasetManifest manifest;
  std::vector<std::string> problems;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      problems.push_back(concat("line ", line_no, ": ", e.what()));
      continue;
    }

    if (!header_seen) {
      header_seen = true;
      if (!j.is_object() || j.value("format", "") != "meev-manifest") {
        throw Error(Status::data_error,
                    concat(path, " line ", line_no,
                           ": missing meev-manifest header"));
      }
      int version = j.value("version", -1);
      if (version != kManifestVersion) {
        throw Error(Status::version_error,
                    concat(path, ": manifest version ", version,
                           " is not supported (expected ", kManifestVersion,
                           ")"));
      }
      continue;
    }

    try {
      ManifestRecord rec = record_from_json(j);
      if (rec.kind == SampleSourceKind::file) {
        fs::path img = base / rec.image_path;
        if (!fs::exists(img)) {
          throw Error(Status::data_error,
                      concat("image not found: ", img.string()));
        }
      }
      manifest.records.push_back(std::move(rec));
    } catch (const Error& e) {
      problems.push_back(concat("line ", line_no, ": ", e.what()));
    }
  }

  if (!problems.empty()) {
    std::string msg = concat(path, ": ", problems.size(),
                             " invalid manifest record(s):");
    for (const std::string& p : problems) msg += concat("\n  ", p);
    throw Error(Status::data_error, msg);
  }
  if (!header_seen) {
    throw Error(Status::data_error, concat(path, ": no records (empty file)"));
  }
  if (manifest.records.empty()) {
    throw Error(Status::data_error, concat(path, ": no records"));
  }
  return manifest;
}

void save_manifest(const std::string& path, const DatasetManifest& manifest) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) {
      throw Error(Status::data_error, concat("cannot write manifest: ", tmp));
    }
    json header = {{"format", "meev-manifest"}, {"version", kManifestVersion}};
    out << header.dump() << "\n";
    for (const ManifestRecord& rec : manifest.records) {
      out << record_to_json(rec).dump() << "\n";
    }
    if (!out) {
      throw Error(Status::data_error, concat("write failed: ", tmp));
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    throw Error(Status::data_error,
                concat("cannot move ", tmp, " to ", path, ": ", ec.message()));
  }
}

namespace {

class FileSource : public SampleSource {
 public:
  FileSource(DatasetManifest manifest, std::string base_dir)
      : manifest_(std::move(manifest)), base_(std::move(base_dir)) {
    for (int i = 0; i < manifest_.size(); ++i) {
      check(manifest_.records[i].kind == SampleSourceKind::file,
            Status::data_error,
            concat("file source: record ", i, " is not a file record"));
    }
  }

  int size() const override { return manifest_.size(); }
  const ManifestRecord& record(int index) const override {
    check_arg(index >= 0 && index < size(), "sample index ", index,
              " out of range");
    return manifest_.records[index];
  }
  Image image(int index) const override {
    const ManifestRecord& rec = record(index);
    return read_image((fs::path(base_) / rec.image_path).string());
  }

 private:
  DatasetManifest manifest_;
  std::string base_;
};

}  // namespace

std::unique_ptr<SampleSource> make_file_source(DatasetManifest manifest,
                                               std::string base_dir) {
  return std::make_unique<FileSource>(std::move(manifest),
                                      std::move(base_dir));
}

}  // namespace meev
