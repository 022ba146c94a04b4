#include <Eigen/Dense>
#include <filesystem>
#include <fstream>

#include "body/body_model.hpp"
#include "core/common.hpp"
#include "data/crop.hpp"
#include "data/dataset.hpp"
#include "data/synthetic.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using namespace meev;

namespace {

std::filesystem::path data_temp(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

Image ramp_image(int h, int w) {
  Image img = Image::zeros(3, h, w);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        img.at(c, y, x) = (0.31 * c + 0.017 * y + 0.029 * x);
        img.at(c, y, x) -= std::floor(img.at(c, y, x));
      }
    }
  }
  return img;
}

}  // namespace

TEST_SUITE_BEGIN("data");

TEST_CASE("crop transform corner map matches hand-computed values") {
  Image src = ramp_image(100, 80);

  // already 3:4 so aspect expansion is a no-op at margin 1
  BBox bbox{10.0, 20.0, 30.0, 40.0};
  CropConfig cfg;
  cfg.margin = 1.0;
  ImageCrop crop = crop_from_bbox(src, bbox, cfg);

  CHECK(crop.image.channels == 3);
  CHECK(crop.image.height == 256);
  CHECK(crop.image.width == 192);

  Eigen::Vector2d tl = apply_affine(crop.crop_to_source, {0.0, 0.0});
  Eigen::Vector2d br = apply_affine(crop.crop_to_source, {192.0, 256.0});
  CHECK(tl.x() == doctest::Approx(10.0).epsilon(1e-14));
  CHECK(tl.y() == doctest::Approx(20.0).epsilon(1e-14));
  CHECK(br.x() == doctest::Approx(40.0).epsilon(1e-14));
  CHECK(br.y() == doctest::Approx(60.0).epsilon(1e-14));
  CHECK(crop.crop_to_source(0, 0) == 30.0 / 192.0);
  CHECK(crop.crop_to_source(1, 1) == 40.0 / 256.0);
  CHECK(crop.crop_to_source(0, 1) == 0.0);
  CHECK(crop.crop_to_source(1, 0) == 0.0);
}

TEST_CASE("crop aspect expansion and margin act about the bbox center") {
  Image src = ramp_image(120, 120);

  // wide box: height grows to w / (3/4), then margin scales both
  BBox bbox{10.0, 30.0, 80.0, 40.0};
  CropConfig cfg;
  cfg.margin = 1.25;
  ImageCrop crop = crop_from_bbox(src, bbox, cfg);

  double w = 80.0 * 1.25;
  double h = (80.0 / 0.75) * 1.25;
  Eigen::Vector2d tl = apply_affine(crop.crop_to_source, {0.0, 0.0});
  Eigen::Vector2d br = apply_affine(crop.crop_to_source, {192.0, 256.0});
  CHECK(tl.x() == doctest::Approx(50.0 - w / 2).epsilon(1e-12));
  CHECK(tl.y() == doctest::Approx(50.0 - h / 2).epsilon(1e-12));
  CHECK(br.x() == doctest::Approx(50.0 + w / 2).epsilon(1e-12));
  CHECK(br.y() == doctest::Approx(50.0 + h / 2).epsilon(1e-12));

  // tall box: width grows instead
  BBox tall{40.0, 10.0, 20.0, 100.0};
  cfg.margin = 1.0;
  ImageCrop crop2 = crop_from_bbox(src, tall, cfg);
  Eigen::Vector2d tl2 = apply_affine(crop2.crop_to_source, {0.0, 0.0});
  CHECK(tl2.x() == doctest::Approx(50.0 - 75.0 / 2).epsilon(1e-12));
  CHECK(tl2.y() == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("full-image 3:4 bbox at margin 1 is a plain resize") {
  Image src = ramp_image(128, 96);
  BBox bbox{0.0, 0.0, 96.0, 128.0};
  CropConfig cfg;
  cfg.margin = 1.0;
  ImageCrop crop = crop_from_bbox(src, bbox, cfg);

  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 256; ++y) {
      for (int x = 0; x < 192; ++x) {
        double sy = (y + 0.5) * 128.0 / 256.0 - 0.5;
        double sx = (x + 0.5) * 96.0 / 192.0 - 0.5;
        CHECK(crop.image.at(c, y, x) ==
              doctest::Approx(src.sample_bilinear(c, sy, sx)).epsilon(1e-15));
      }
    }
  }
}

TEST_CASE("bbox equal to a 192x256 source is the identity crop") {
  Image src = ramp_image(256, 192);
  CropConfig cfg;
  cfg.margin = 1.0;
  ImageCrop crop = crop_from_bbox(src, BBox{0, 0, 192, 256}, cfg);
  CHECK(crop.image.data == src.data);
}

TEST_CASE("bbox outside the image is rejected, partial overlap zero-pads") {
  Image ones = Image::zeros(3, 64, 48);
  for (double& v : ones.data) v = 1.0;

  CHECK_THROWS_WITH_AS(
      crop_from_bbox(ones, BBox{100.0, 10.0, 30.0, 40.0}, CropConfig{}),
      doctest::Contains("fully outside"), Error);
  CHECK_THROWS_AS(
      crop_from_bbox(ones, BBox{-50.0, -50.0, 30.0, 40.0}, CropConfig{}),
      Error);
  CHECK_THROWS_AS(crop_from_bbox(ones, BBox{5.0, 5.0, 0.0, 10.0}, CropConfig{}),
                  Error);

  // box hanging off the left edge: left half of the crop reads zeros
  CropConfig cfg;
  cfg.margin = 1.0;
  ImageCrop crop = crop_from_bbox(ones, BBox{-24.0, 0.0, 48.0, 64.0}, cfg);
  CHECK(crop.image.at(0, 128, 10) == 0.0);
  CHECK(crop.image.at(1, 128, 50) == 0.0);
  CHECK(crop.image.at(2, 128, 120) == 1.0);
  CHECK(crop.image.at(0, 128, 180) == 1.0);
}

TEST_CASE("crop transform composed with its inverse is the identity") {
  Image src = ramp_image(90, 70);
  Rng rng(50);
  for (int trial = 0; trial < 10; ++trial) {
    BBox bbox{rng.uniform(-10, 60), rng.uniform(-10, 70), rng.uniform(12, 50),
              rng.uniform(12, 60)};
    ImageCrop crop = crop_from_bbox(src, bbox, CropConfig{});
    Eigen::Matrix<double, 2, 3> inv = invert_affine(crop.crop_to_source);
    for (int k = 0; k < 20; ++k) {
      Eigen::Vector2d p(rng.uniform(-100, 300), rng.uniform(-100, 300));
      Eigen::Vector2d q =
          apply_affine(crop.crop_to_source, apply_affine(inv, p));
      CHECK((q - p).norm() < 1e-9);
    }
  }
}

TEST_CASE("2D joints inside the bbox land inside the crop") {
  Image src = ramp_image(200, 150);
  Rng rng(51);
  for (int trial = 0; trial < 10; ++trial) {
    SampleAnnotation ann;
    ann.bbox = {rng.uniform(0, 100), rng.uniform(0, 120), rng.uniform(10, 50),
                rng.uniform(10, 60)};
    ann.has_joints2d = true;
    ann.joints2d.resize(22, 2);
    for (int j = 0; j < 22; ++j) {
      ann.joints2d(j, 0) = ann.bbox.x + rng.uniform() * ann.bbox.w;
      ann.joints2d(j, 1) = ann.bbox.y + rng.uniform() * ann.bbox.h;
    }

    TrainingSample sample = assemble_training_sample(src, ann, CropConfig{});
    for (int j = 0; j < 22; ++j) {
      CHECK(sample.annotation.joints2d(j, 0) >= 0.0);
      CHECK(sample.annotation.joints2d(j, 0) <= 192.0);
      CHECK(sample.annotation.joints2d(j, 1) >= 0.0);
      CHECK(sample.annotation.joints2d(j, 1) <= 256.0);
      // mapping back recovers the source position
      Eigen::Vector2d back = apply_affine(
          sample.crop_to_source, sample.annotation.joints2d.row(j).transpose());
      CHECK(std::abs(back.x() - ann.joints2d(j, 0)) < 1e-9);
      CHECK(std::abs(back.y() - ann.joints2d(j, 1)) < 1e-9);
    }

    // bbox is rewritten into crop coordinates as well
    Eigen::Vector2d tl = apply_affine(
        sample.crop_to_source,
        Eigen::Vector2d(sample.annotation.bbox.x, sample.annotation.bbox.y));
    CHECK(std::abs(tl.x() - ann.bbox.x) < 1e-9);
    CHECK(std::abs(tl.y() - ann.bbox.y) < 1e-9);
  }
}

TEST_CASE("manifest save and load round-trip") {
  auto dir = data_temp("meev_manifest_rt");
  std::filesystem::create_directories(dir);
  Image tiny = ramp_image(8, 6);
  write_ppm((dir / "img0.ppm").string(), tiny);

  DatasetManifest manifest;
  {
    ManifestRecord rec;
    rec.kind = SampleSourceKind::file;
    rec.image_path = "img0.ppm";
    rec.annotation.bbox = {1.0, 2.0, 3.5, 4.25};
    rec.annotation.has_joints2d = true;
    rec.annotation.joints2d.resize(4, 2);
    rec.annotation.joints2d << 0.1, 0.2, 1.3, 2.4, 3.5, 4.0625, 1.0 / 3.0, 5.5;
    manifest.records.push_back(rec);
  }
  {
    ManifestRecord rec;
    rec.kind = SampleSourceKind::synthetic;
    rec.synth_seed = 99;
    rec.synth_index = 7;
    rec.annotation.bbox = {10.0, 20.0, 30.0, 40.0};
    rec.annotation.has_joints3d = true;
    rec.annotation.joints3d.resize(3, 3);
    rec.annotation.joints3d << 0.1, -0.2, 2.5, 0.3, 0.4, 2.6, -0.5, 0.6, 2.7;
    rec.annotation.has_params = true;
    rec.annotation.theta.setConstant(3, 3, 0.125);
    rec.annotation.theta(1, 2) = -0.8431967;
    rec.annotation.beta.resize(2);
    rec.annotation.beta << 0.7, -1.1;
    rec.annotation.trans = Eigen::Vector3d(0.01, -0.02, 2.55);
    manifest.records.push_back(rec);
  }

  auto path = (dir / "set.manifest").string();
  save_manifest(path, manifest);
  DatasetManifest loaded = load_manifest(path);

  REQUIRE(loaded.size() == 2);
  CHECK(records_equal(loaded.records[0], manifest.records[0]));
  CHECK(records_equal(loaded.records[1], manifest.records[1]));

  // file source loads pixels relative to the manifest directory
  DatasetManifest file_only;
  file_only.records.push_back(loaded.records[0]);
  auto source = make_file_source(file_only, dir.string());
  CHECK(source->size() == 1);
  Image px = source->image(0);
  CHECK(px.height == 8);
  CHECK(px.width == 6);
}

TEST_CASE("manifest validation reports line numbers") {
  auto dir = data_temp("meev_manifest_bad");
  std::filesystem::create_directories(dir);

  {
    auto path = (dir / "empty.manifest").string();
    std::ofstream(path).close();
    CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("no records"),
                         Error);
  }
  {
    auto path = (dir / "header_only.manifest").string();
    std::ofstream out(path);
    out << "{\"format\": \"meev-manifest\", \"version\": 1}\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("no records"),
                         Error);
  }
  {
    auto path = (dir / "zero_width.manifest").string();
    std::ofstream out(path);
    out << "{\"format\": \"meev-manifest\", \"version\": 1}\n";
    out << "{\"source\": {\"type\": \"synthetic\", \"seed\": 1, \"index\": "
           "0}, \"bbox\": [0, 0, 10, 10], \"joints2d\": [[1, 2]]}\n";
    out << "{\"source\": {\"type\": \"synthetic\", \"seed\": 1, \"index\": "
           "1}, \"bbox\": [0, 0, 0, 10], \"joints2d\": [[1, 2]]}\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("line 3"),
                         Error);
  }
  {
    auto path = (dir / "no_supervision.manifest").string();
    std::ofstream out(path);
    out << "{\"format\": \"meev-manifest\", \"version\": 1}\n";
    out << "{\"source\": {\"type\": \"synthetic\", \"seed\": 1, \"index\": "
           "0}, \"bbox\": [0, 0, 10, 10]}\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_manifest(path),
                         doctest::Contains("no supervision"), Error);
  }
  {
    auto path = (dir / "missing_image.manifest").string();
    std::ofstream out(path);
    out << "{\"format\": \"meev-manifest\", \"version\": 1}\n";
    out << "{\"source\": {\"type\": \"file\", \"path\": \"ghost.ppm\"}, "
           "\"bbox\": [0, 0, 10, 10], \"joints2d\": [[1, 2]]}\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_manifest(path),
                         doctest::Contains("image not found"), Error);
  }
  {
    auto path = (dir / "bad_version.manifest").string();
    std::ofstream out(path);
    out << "{\"format\": \"meev-manifest\", \"version\": 999}\n";
    out.close();
    CHECK_THROWS_AS(load_manifest(path), Error);
    try {
      load_manifest(path);
    } catch (const Error& e) {
      CHECK(e.status() == Status::version_error);
    }
  }
  {
    auto path = (dir / "garbage_line.manifest").string();
    std::ofstream out(path);
    out << "{\"format\": \"meev-manifest\", \"version\": 1}\n";
    out << "this is not json\n";
    out.close();
    CHECK_THROWS_WITH_AS(load_manifest(path), doctest::Contains("line 2"),
                         Error);
  }
}

TEST_CASE("synthetic dataset is a pure function of seed") {
  BodyModelDefinition body = make_toy_body_model();
  DatasetManifest a = generate_synthetic_dataset(4, 1234, body);
  DatasetManifest b = generate_synthetic_dataset(4, 1234, body);
  DatasetManifest c = generate_synthetic_dataset(4, 777, body);

  REQUIRE(a.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(records_equal(a.records[i], b.records[i]));
    Image ia = render_synthetic_image(a.records[i]);
    Image ib = render_synthetic_image(b.records[i]);
    CHECK(ia.data == ib.data);
  }
  CHECK_FALSE(records_equal(a.records[0], c.records[0]));
  CHECK_FALSE(records_equal(a.records[0], a.records[1]));
}

TEST_CASE("synthetic ground truth reproduces the body model exactly") {
  BodyModelDefinition body = make_toy_body_model();
  DatasetManifest manifest = generate_synthetic_dataset(3, 55, body);

  for (const ManifestRecord& rec : manifest.records) {
    const SampleAnnotation& a = rec.annotation;
    REQUIRE(a.has_params);
    REQUIRE(a.has_joints3d);
    REQUIRE(a.has_joints2d);

    BodyParams params;
    params.theta = a.theta;
    params.beta = a.beta;
    params.trans = a.trans;
    BodyForwardResult fwd = body_forward(body, params);
    CHECK((fwd.joints - a.joints3d).cwiseAbs().maxCoeff() == 0.0);

    Eigen::MatrixXd uv = project_pinhole(a.joints3d, SyntheticCamera{});
    CHECK((uv - a.joints2d).cwiseAbs().maxCoeff() == 0.0);

    for (Eigen::Index j = 0; j < a.joints2d.rows(); ++j) {
      CHECK(a.joints2d(j, 0) >= a.bbox.x);
      CHECK(a.joints2d(j, 0) <= a.bbox.x + a.bbox.w);
      CHECK(a.joints2d(j, 1) >= a.bbox.y);
      CHECK(a.joints2d(j, 1) <= a.bbox.y + a.bbox.h);
    }
  }
}

TEST_CASE("synthetic images carry joint blobs above the noise floor") {
  BodyModelDefinition body = make_toy_body_model();
  ManifestRecord rec = make_synthetic_record(body, 9, 0);
  Image img = render_synthetic_image(rec);

  CHECK(img.channels == 3);
  CHECK(img.height == 256);
  CHECK(img.width == 192);
  for (double v : img.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }

  // sum the three channels at the pelvis blob and at a far corner
  double u = rec.annotation.joints2d(0, 0);
  double v = rec.annotation.joints2d(0, 1);
  int xj = std::min(191, std::max(0, int(u)));
  int yj = std::min(255, std::max(0, int(v)));
  double at_joint = img.at(0, yj, xj) + img.at(1, yj, xj) + img.at(2, yj, xj);
  double at_corner = img.at(0, 2, 2) + img.at(1, 2, 2) + img.at(2, 2, 2);
  CHECK(at_joint > at_corner + 0.3);
}

TEST_CASE("synthetic source validates records and serves cached images") {
  BodyModelDefinition body = make_toy_body_model();
  DatasetManifest manifest = generate_synthetic_dataset(3, 21, body);
  auto source = make_synthetic_source(manifest, body);
  CHECK(source->size() == 3);

  Image direct = render_synthetic_image(manifest.records[1]);
  CHECK(source->image(1).data == direct.data);
  CHECK(records_equal(source->record(2), manifest.records[2]));
  CHECK_THROWS_AS(source->image(3), Error);

  DatasetManifest tampered = manifest;
  tampered.records[0].annotation.trans.x() += 0.001;
  CHECK_THROWS_WITH_AS(make_synthetic_source(tampered, body),
                       doctest::Contains("does not match"), Error);
}

TEST_CASE("file source rejects synthetic records") {
  DatasetManifest manifest;
  ManifestRecord rec;
  rec.kind = SampleSourceKind::synthetic;
  rec.annotation.bbox = {0, 0, 1, 1};
  rec.annotation.has_joints2d = true;
  rec.annotation.joints2d.resize(1, 2);
  manifest.records.push_back(rec);
  CHECK_THROWS_AS(make_file_source(manifest, "."), Error);
}

TEST_SUITE_END();
