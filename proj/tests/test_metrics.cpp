#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "core/common.hpp"
#include "doctest.h"
#include "eval/metrics.hpp"
#include "test_helpers.hpp"

using namespace meev;

TEST_SUITE_BEGIN("metrics");

TEST_CASE("root_align subtracts the root row") {
  Rng rng(41);
  Points pts(5, 3), joints(4, 3);
  for (int i = 0; i < pts.size(); ++i) pts.data()[i] = rng.uniform(-1, 1);
  for (int i = 0; i < joints.size(); ++i) joints.data()[i] = rng.uniform(-1, 1);

  Points out = root_align(pts, joints, 2);
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 3; ++c) {
      CHECK(out(r, c) == pts(r, c) - joints(2, c));
    }
  }

  Points same(3, 3);
  same.row(0) = joints.row(1);
  same.row(1) = joints.row(1);
  same.row(2) = joints.row(1);
  CHECK(root_align(same, joints, 1).cwiseAbs().maxCoeff() == 0.0);

  Eigen::RowVector3d v(0.3, -0.7, 1.1);
  Points pts_shift = pts.rowwise() + v;
  Points joints_shift = joints.rowwise() + v;
  CHECK((root_align(pts_shift, joints_shift, 2) - out).cwiseAbs().maxCoeff() <
        1e-15);

  CHECK_THROWS_AS(root_align(pts, joints, 4), Error);
  CHECK_THROWS_AS(root_align(pts, joints, -1), Error);
}

TEST_CASE("mpjpe zero cases and uniform offset invariance") {
  Rng rng(42);
  Points gt(22, 3);
  for (int i = 0; i < gt.size(); ++i) gt.data()[i] = rng.uniform(-1, 1);

  CHECK(mpjpe_mm(gt, gt) == 0.0);

  Points shifted = gt.rowwise() + Eigen::RowVector3d(0.05, 0.0, 0.0);
  CHECK(mpjpe_mm(shifted, gt) < 1e-9);
  CHECK(mpjpe_mm(gt, shifted) < 1e-9);

  Points shifted2 = gt.rowwise() + Eigen::RowVector3d(-0.2, 0.13, 0.8);
  CHECK(mpjpe_mm(shifted2, gt) < 1e-9);
}

TEST_CASE("mpjpe single displaced joint gives displacement over J") {
  Points gt = Points::Zero(22, 3);
  for (int j = 0; j < 22; ++j) gt(j, 0) = 0.1 * j;
  Points pred = gt;
  pred(7, 1) += 0.022;
  CHECK(mpjpe_mm(pred, gt) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mpjpe matches loop oracle on random instances") {
  Rng rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    Points gt(22, 3), pred(22, 3);
    for (int i = 0; i < gt.size(); ++i) gt.data()[i] = rng.uniform(-1, 1);
    for (int i = 0; i < pred.size(); ++i) pred.data()[i] = rng.uniform(-1, 1);

    double sum = 0.0;
    for (int j = 0; j < 22; ++j) {
      Eigen::RowVector3d dp = pred.row(j) - pred.row(0);
      Eigen::RowVector3d dg = gt.row(j) - gt.row(0);
      sum += (dp - dg).norm();
    }
    double oracle = sum / 22.0 * 1000.0;
    CHECK(std::abs(mpjpe_mm(pred, gt) - oracle) < 1e-9);
  }
}

TEST_CASE("mpjpe rejects mismatched or non-finite input") {
  Points a = Points::Zero(22, 3);
  Points b = Points::Zero(21, 3);
  CHECK_THROWS_AS(mpjpe_mm(a, b), Error);
  Points c = a;
  c(3, 1) = std::nan("");
  CHECK_THROWS_WITH_AS(mpjpe_mm(c, a),
                       doctest::Contains("predicted joints"), Error);
  CHECK_THROWS_WITH_AS(mpjpe_mm(a, c),
                       doctest::Contains("ground-truth joints"), Error);
}

TEST_CASE("mpvpe identical and translated meshes score zero") {
  Rng rng(44);
  Points mesh(64, 3), joints(22, 3);
  for (int i = 0; i < mesh.size(); ++i) mesh.data()[i] = rng.uniform(-1, 1);
  for (int i = 0; i < joints.size(); ++i)
    joints.data()[i] = rng.uniform(-1, 1);

  CHECK(mpvpe_mm(mesh, mesh, joints, joints) == 0.0);

  Eigen::RowVector3d t(0.4, -0.1, 0.9);
  Points mesh_t = mesh.rowwise() + t;
  Points joints_t = joints.rowwise() + t;
  CHECK(mpvpe_mm(mesh, mesh_t, joints, joints_t) < 1e-9);
}

TEST_CASE("mpvpe matches loop oracle under vertex noise") {
  Rng rng(45);
  Points mesh(64, 3), joints_p(22, 3), joints_g(22, 3);
  for (int i = 0; i < mesh.size(); ++i) mesh.data()[i] = rng.uniform(-1, 1);
  for (int i = 0; i < joints_p.size(); ++i)
    joints_p.data()[i] = rng.uniform(-1, 1);
  for (int i = 0; i < joints_g.size(); ++i)
    joints_g.data()[i] = rng.uniform(-1, 1);
  Points noisy = mesh;
  for (int i = 0; i < noisy.size(); ++i)
    noisy.data()[i] += rng.normal() * 0.01;

  double sum = 0.0;
  for (int v = 0; v < 64; ++v) {
    Eigen::RowVector3d dp = noisy.row(v) - joints_p.row(0);
    Eigen::RowVector3d dg = mesh.row(v) - joints_g.row(0);
    sum += (dp - dg).norm();
  }
  double oracle = sum / 64.0 * 1000.0;
  CHECK(std::abs(mpvpe_mm(noisy, mesh, joints_p, joints_g) - oracle) < 1e-9);

  Points small = Points::Zero(63, 3);
  CHECK_THROWS_AS(mpvpe_mm(small, mesh, joints_p, joints_g), Error);
}

TEST_CASE("pa_mpjpe removes similarity transforms") {
  Rng rng(46);
  Points gt(22, 3);
  for (int i = 0; i < gt.size(); ++i) gt.data()[i] = rng.uniform(-1, 1);

  Eigen::Vector3d axis(0.3, -0.8, 0.52);
  axis.normalize();
  Eigen::Matrix3d rot =
      Eigen::AngleAxisd(0.7, axis).toRotationMatrix();
  double scale = 1.37;
  Eigen::RowVector3d t(0.2, -0.5, 0.1);
  Points pred = (scale * (rot * gt.transpose())).transpose().rowwise() + t;

  CHECK(pa_mpjpe_mm(pred, gt) < 1e-6);
  CHECK(mpjpe_mm(pred, gt) > 1.0);
}

TEST_CASE("MetricReport weighted merge and accessors") {
  MetricReport a;
  a.add_sample(2.0, 10.0);
  MetricReport b;
  b.add_sample(4.0, 20.0);

  MetricReport ab = a;
  ab.merge(b);
  CHECK(ab.n_samples() == 2);
  CHECK(ab.mpjpe_mm() == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(ab.mpvpe_mm() == doctest::Approx(15.0).epsilon(1e-15));

  MetricReport single;
  single.add_sample(7.5, 8.25);
  CHECK(single.mpjpe_mm() == 7.5);
  CHECK(single.mpvpe_mm() == 8.25);

  MetricReport empty;
  CHECK_THROWS_AS(empty.mpjpe_mm(), Error);
  CHECK_THROWS_AS((void)empty.to_json(), Error);
}

TEST_CASE("MetricReport merge is partition invariant") {
  Rng rng(47);
  std::vector<std::pair<double, double>> samples;
  for (int i = 0; i < 40; ++i) {
    samples.push_back({rng.uniform(0, 100), rng.uniform(0, 120)});
  }

  MetricReport serial;
  for (auto& s : samples) serial.add_sample(s.first, s.second);

  for (int trial = 0; trial < 5; ++trial) {
    std::vector<int> order(40);
    for (int i = 0; i < 40; ++i) order[i] = i;
    for (int i = 39; i > 0; --i) {
      int j = rng.uniform_int(0, i);
      std::swap(order[i], order[j]);
    }
    int cut1 = 7 + trial, cut2 = 23 + trial;
    MetricReport p1, p2, p3;
    for (int i = 0; i < 40; ++i) {
      auto& s = samples[order[i]];
      (i < cut1 ? p1 : i < cut2 ? p2 : p3).add_sample(s.first, s.second);
    }
    p2.merge(p3);
    p1.merge(p2);
    CHECK(std::abs(p1.mpjpe_mm() - serial.mpjpe_mm()) < 1e-12);
    CHECK(std::abs(p1.mpvpe_mm() - serial.mpvpe_mm()) < 1e-12);
    CHECK(p1.n_samples() == serial.n_samples());
  }
}

TEST_CASE("report serialization carries the documented keys") {
  MetricReport r;
  r.add_sample(82.3, 92.93);
  std::string js = r.to_json();
  CHECK(js.find("\"mpjpe_mm\"") != std::string::npos);
  CHECK(js.find("\"mpvpe_mm\"") != std::string::npos);
  CHECK(js.find("\"n_samples\": 1") != std::string::npos);
  std::string txt = r.to_text();
  CHECK(txt.find("mpjpe_mm: ") != std::string::npos);
  CHECK(txt.find("mpvpe_mm: ") != std::string::npos);
  CHECK(txt.find("n_samples: 1") != std::string::npos);
}

TEST_SUITE_END();
