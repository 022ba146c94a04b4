#include <Eigen/Dense>
#include <filesystem>
#include <fstream>

#include "body/body_model.hpp"
#include "core/common.hpp"
#include "core/rotations.hpp"
#include "doctest.h"
#include "test_helpers.hpp"

using meev::axis_angle_to_matrix;
using meev::BodyModelDefinition;
using meev::BodyParams;
using meev::body_forward;
using meev::make_toy_body_model;
using meev::Rng;

namespace {

BodyParams random_params(const BodyModelDefinition& def, Rng& rng,
                         double pose_scale = 0.6) {
  BodyParams p = BodyParams::rest(def);
  for (int j = 0; j < def.num_joints(); ++j)
    for (int a = 0; a < 3; ++a)
      p.theta(j, a) = rng.uniform(-pose_scale, pose_scale);
  for (int b = 0; b < def.num_betas(); ++b) p.beta[b] = rng.uniform(-2.0, 2.0);
  p.trans = Eigen::Vector3d(rng.uniform(-1, 1), rng.uniform(-1, 1),
                            rng.uniform(-1, 1));
  return p;
}

}  // namespace

TEST_SUITE("body_model") {

TEST_CASE("toy model passes validation with the advertised sizes") {
  BodyModelDefinition def = make_toy_body_model();
  CHECK(def.num_joints() == 22);
  CHECK(def.num_vertices() == 64);
  CHECK(def.num_betas() == 10);
  CHECK(def.num_faces() == 42);
}

TEST_CASE("rest pose reproduces the template exactly") {
  BodyModelDefinition def = make_toy_body_model();
  auto out = body_forward(def, BodyParams::rest(def));
  CHECK((out.vertices - def.template_vertices).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::MatrixXd rest_joints =
      meev::regress_joints(def, def.template_vertices);
  CHECK((out.joints - rest_joints).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("joint regressor recovers the construction joints") {
  BodyModelDefinition def = make_toy_body_model();
  Eigen::MatrixXd rest = meev::regress_joints(def, def.template_vertices);
  // pelvis sits at the origin by construction
  CHECK(rest.row(0).norm() < 1e-12);
  // left/right symmetry of hips and shoulders in x
  CHECK(rest(6, 0) == doctest::Approx(-rest(10, 0)));
  CHECK(rest(15, 0) == doctest::Approx(-rest(19, 0)));
}

TEST_CASE("global rotation through the root is an exact equivariance") {
  BodyModelDefinition def = make_toy_body_model();
  Rng rng(301);
  for (int trial = 0; trial < 5; ++trial) {
    BodyParams p = random_params(def, rng);
    p.trans.setZero();
    Eigen::Vector3d root_aa(rng.uniform(-2, 2), rng.uniform(-2, 2),
                            rng.uniform(-2, 2));
    BodyParams base = p;
    base.theta.row(0).setZero();
    BodyParams rotated = p;
    rotated.theta.row(0) = root_aa.transpose();

    auto out_base = body_forward(def, base);
    auto out_rot = body_forward(def, rotated);
    Eigen::Matrix3d r = axis_angle_to_matrix(root_aa);
    // rotating theta_0 spins the whole body about the shaped root joint
    Eigen::RowVector3d pivot =
        meev::regress_joints(def, meev::shape_vertices(def, p.beta)).row(0);
    Eigen::MatrixXd expect_v =
        ((out_base.vertices.rowwise() - pivot) * r.transpose()).rowwise() +
        pivot;
    Eigen::MatrixXd expect_j =
        ((out_base.joints.rowwise() - pivot) * r.transpose()).rowwise() +
        pivot;
    CHECK((out_rot.vertices - expect_v).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((out_rot.joints - expect_j).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("global translation is an exact equivariance") {
  BodyModelDefinition def = make_toy_body_model();
  Rng rng(302);
  BodyParams p = random_params(def, rng);
  BodyParams moved = p;
  Eigen::Vector3d shift(0.3, -1.2, 2.5);
  moved.trans += shift;
  auto a = body_forward(def, p);
  auto b = body_forward(def, moved);
  CHECK((b.vertices - (a.vertices.rowwise() + shift.transpose()))
            .cwiseAbs()
            .maxCoeff() < 1e-8);
  CHECK((b.joints - (a.joints.rowwise() + shift.transpose()))
            .cwiseAbs()
            .maxCoeff() < 1e-8);
}

TEST_CASE("skinning matches a per-vertex transform oracle") {
  BodyModelDefinition def = make_toy_body_model();
  Rng rng(303);
  BodyParams p = random_params(def, rng);
  Eigen::MatrixXd shaped = meev::shape_vertices(def, p.beta);
  Eigen::MatrixXd rest = meev::regress_joints(def, shaped);
  auto fk = meev::forward_kinematics(def, p.theta, rest);
  Eigen::MatrixXd skinned =
      meev::linear_blend_skinning(def, fk.skinning, shaped);
  // oracle: blend posed positions per joint instead of blending transforms
  for (int i = 0; i < def.num_vertices(); ++i) {
    Eigen::Vector3d expect = Eigen::Vector3d::Zero();
    Eigen::Vector4d h(shaped(i, 0), shaped(i, 1), shaped(i, 2), 1.0);
    for (int j = 0; j < def.num_joints(); ++j) {
      double w = def.skin_weights(i, j);
      if (w == 0) continue;
      expect += w * (fk.skinning[j] * h).head<3>();
    }
    CHECK((skinned.row(i).transpose() - expect).norm() < 1e-9);
  }
}

TEST_CASE("a single rotated joint moves exactly its rigid subtree sites") {
  BodyModelDefinition def = make_toy_body_model();
  BodyParams p = BodyParams::rest(def);
  // bend the left elbow (joint 16); its site pair and the wrist chain move
  p.theta(16, 1) = 1.2;
  auto out = body_forward(def, p);
  Eigen::MatrixXd rest_joints =
      meev::regress_joints(def, def.template_vertices);
  // elbow joint itself stays put
  CHECK((out.joints.row(16) - rest_joints.row(16)).norm() < 1e-12);
  // wrist moves on a circle of the original bone length around the elbow
  double len_before = (rest_joints.row(17) - rest_joints.row(16)).norm();
  double len_after = (out.joints.row(17) - out.joints.row(16)).norm();
  CHECK(len_after == doctest::Approx(len_before).epsilon(1e-12));
  CHECK((out.joints.row(17) - rest_joints.row(17)).norm() > 0.05);
  // joints outside the subtree are untouched
  for (int j : {0, 5, 9, 13, 15, 21})
    CHECK((out.joints.row(j) - rest_joints.row(j)).norm() < 1e-12);
}

TEST_CASE("bone lengths are invariant to pose") {
  BodyModelDefinition def = make_toy_body_model();
  Rng rng(304);
  BodyParams p = random_params(def, rng);
  p.beta.setZero();
  auto out = body_forward(def, p);
  Eigen::MatrixXd rest_joints =
      meev::regress_joints(def, def.template_vertices);
  for (int j = 1; j < def.num_joints(); ++j) {
    int parent = def.parents[j];
    double before = (rest_joints.row(j) - rest_joints.row(parent)).norm();
    double after = (out.joints.row(j) - out.joints.row(parent)).norm();
    CHECK(after == doctest::Approx(before).epsilon(1e-10));
  }
}

TEST_CASE("shape basis changes geometry smoothly and linearly") {
  BodyModelDefinition def = make_toy_body_model();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(def.num_betas());
  beta[0] = 1.0;
  Eigen::MatrixXd plus = meev::shape_vertices(def, beta);
  Eigen::MatrixXd minus = meev::shape_vertices(def, -beta);
  Eigen::MatrixXd mid = 0.5 * (plus + minus);
  CHECK((mid - def.template_vertices).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((plus - def.template_vertices).cwiseAbs().maxCoeff() > 1e-3);
}

TEST_CASE("tape forward agrees with the plain forward") {
  BodyModelDefinition def = make_toy_body_model();
  Rng rng(305);
  for (int trial = 0; trial < 3; ++trial) {
    BodyParams p = random_params(def, rng);
    auto plain = body_forward(def, p);

    meev::ad::Tape tape;
    int j = def.num_joints();
    std::vector<double> rots(static_cast<std::size_t>(j) * 9);
    for (int k = 0; k < j; ++k) {
      Eigen::Matrix3d r = axis_angle_to_matrix(p.theta.row(k).transpose());
      for (int a = 0; a < 3; ++a)
        for (int c = 0; c < 3; ++c) rots[k * 9 + a * 3 + c] = r(a, c);
    }
    std::vector<double> beta(p.beta.data(), p.beta.data() + p.beta.size());
    std::vector<double> trans = {p.trans.x(), p.trans.y(), p.trans.z()};
    auto out = meev::body_forward_tape(
        tape, def, tape.constant({j, 3, 3}, rots),
        tape.constant({def.num_betas()}, beta), tape.constant({3}, trans));
    for (int i = 0; i < def.num_vertices(); ++i)
      for (int a = 0; a < 3; ++a)
        CHECK(out.vertices.value()[i * 3 + a] ==
              doctest::Approx(plain.vertices(i, a)).epsilon(1e-12));
    for (int k = 0; k < j; ++k)
      for (int a = 0; a < 3; ++a)
        CHECK(out.joints.value()[k * 3 + a] ==
              doctest::Approx(plain.joints(k, a)).epsilon(1e-12));
  }
}

TEST_CASE("tape forward gradients match finite differences") {
  BodyModelDefinition def = make_toy_body_model();
  Rng rng(306);
  int j = def.num_joints();
  // feed axis-angle through the differentiable Rodrigues rows so the whole
  // chain theta -> rotations -> skinning -> vertices is exercised
  auto aa = meev::testing::random_vec(rng, j * 3, -0.5, 0.5);
  auto beta = meev::testing::random_vec(rng, def.num_betas(), -1.0, 1.0);
  auto trans = meev::testing::random_vec(rng, 3);
  meev::testing::GradCheck gc;
  gc.leaves = {aa, beta, trans};
  gc.build = [&def, j](meev::ad::Tape& t, const auto& vals) {
    meev::ad::Var theta = t.leaf({j, 3}, vals[0]);
    meev::ad::Var beta_v = t.leaf({def.num_betas()}, vals[1]);
    meev::ad::Var trans_v = t.leaf({3}, vals[2]);
    meev::ad::Var rots = t.axis_angle_to_matrix_rows(theta);
    auto out = meev::body_forward_tape(t, def, rots, beta_v, trans_v);
    return t.mean(t.mul(out.vertices, out.vertices));
  };
  gc.step = 1e-6;
  CHECK(gc.run() < 1e-6);
}

TEST_CASE("model archive round trips exactly") {
  BodyModelDefinition def = make_toy_body_model();
  auto path =
      (std::filesystem::temp_directory_path() / "meev_model_test.bin").string();
  meev::save_body_model(path, def);
  BodyModelDefinition back = meev::load_body_model(path);
  CHECK((back.template_vertices - def.template_vertices).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK((back.shape_dirs - def.shape_dirs).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.joint_regressor - def.joint_regressor).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK((back.skin_weights - def.skin_weights).cwiseAbs().maxCoeff() == 0.0);
  CHECK(back.faces == def.faces);
  CHECK(back.parents == def.parents);
  std::filesystem::remove(path);
}

TEST_CASE("invalid definitions are rejected with config errors") {
  BodyModelDefinition def = make_toy_body_model();
  auto expect_config_error = [](BodyModelDefinition d) {
    try {
      d.validate();
      FAIL("expected validation to throw");
    } catch (const meev::Error& e) {
      CHECK(e.status() == meev::Status::config_error);
    }
  };
  {
    BodyModelDefinition bad = def;
    bad.parents[3] = 7;  // child precedes parent
    expect_config_error(bad);
  }
  {
    BodyModelDefinition bad = def;
    bad.skin_weights(0, 0) += 0.5;  // row no longer sums to one
    expect_config_error(bad);
  }
  {
    BodyModelDefinition bad = def;
    bad.faces(0, 0) = 999;
    expect_config_error(bad);
  }
}

TEST_CASE("obj round trip is byte identical") {
  BodyModelDefinition def = make_toy_body_model();
  Rng rng(307);
  auto out = body_forward(def, random_params(def, rng));
  auto dir = std::filesystem::temp_directory_path();
  auto p1 = (dir / "meev_mesh_a.obj").string();
  auto p2 = (dir / "meev_mesh_b.obj").string();
  meev::write_obj(p1, out.vertices, def.faces);
  meev::ObjMesh mesh = meev::read_obj(p1);
  meev::write_obj(p2, mesh.vertices, mesh.faces);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)),
                 std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)),
                 std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  CHECK(s1.find("v ") == 0);
  CHECK(mesh.vertices.rows() == def.num_vertices());
  CHECK(mesh.faces == def.faces);
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}

TEST_CASE("negative zero never appears in obj output") {
  Eigen::MatrixXd v(1, 3);
  v << -1e-9, 0.0, -0.0;
  auto path = (std::filesystem::temp_directory_path() / "meev_negzero.obj")
                  .string();
  meev::write_obj(path, v, Eigen::MatrixXi());
  std::ifstream f(path);
  std::string content((std::istreambuf_iterator<char>(f)),
                      std::istreambuf_iterator<char>());
  CHECK(content == "v 0.000000 0.000000 0.000000\n");
  std::filesystem::remove(path);
}

}  // TEST_SUITE
