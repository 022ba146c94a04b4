#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "core/common.hpp"
#include "core/tape.hpp"

namespace meev {

// Skinned parametric body: template mesh + linear shape basis, a joint
// regressor, a kinematic tree and per-vertex skinning weights.
struct BodyModelDefinition {
  Eigen::MatrixXd template_vertices;  // [V,3]
  Eigen::MatrixXi faces;              // [F,3]
  Eigen::MatrixXd shape_dirs;         // [V*3,B], row v*3+axis
  Eigen::MatrixXd joint_regressor;    // [J,V], rows sum to 1
  std::vector<int> parents;           // [J], parents[0] == -1
  Eigen::MatrixXd skin_weights;       // [V,J], rows sum to 1

  int num_vertices() const { return static_cast<int>(template_vertices.rows()); }
  int num_joints() const { return static_cast<int>(joint_regressor.rows()); }
  int num_betas() const { return static_cast<int>(shape_dirs.cols()); }
  int num_faces() const { return static_cast<int>(faces.rows()); }

  // throws config_error on inconsistent sizes, bad tree or bad weight rows
  void validate() const;
};

struct BodyParams {
  Eigen::MatrixXd theta;   // [J,3] axis-angle per joint
  Eigen::VectorXd beta;    // [B]
  Eigen::Vector3d trans = Eigen::Vector3d::Zero();

  static BodyParams rest(const BodyModelDefinition& def);
};

struct FkResult {
  std::vector<Eigen::Matrix4d> world;     // joint -> world transforms
  std::vector<Eigen::Matrix4d> skinning;  // world * translate(-rest_joint)
  Eigen::MatrixXd posed_joints;           // [J,3], before global translation
};

struct BodyForwardResult {
  Eigen::MatrixXd vertices;  // [V,3]
  Eigen::MatrixXd joints;    // [J,3]
};

Eigen::MatrixXd shape_vertices(const BodyModelDefinition& def,
                               const Eigen::VectorXd& beta);
Eigen::MatrixXd regress_joints(const BodyModelDefinition& def,
                               const Eigen::MatrixXd& vertices);
FkResult forward_kinematics(const BodyModelDefinition& def,
                            const Eigen::MatrixXd& theta,
                            const Eigen::MatrixXd& rest_joints);
Eigen::MatrixXd linear_blend_skinning(const BodyModelDefinition& def,
                                      const std::vector<Eigen::Matrix4d>& skinning,
                                      const Eigen::MatrixXd& vertices);
BodyForwardResult body_forward(const BodyModelDefinition& def,
                               const BodyParams& params);

// Same computation routed through the autodiff tape. Rotations arrive as
// matrices [J,3,3] so both axis-angle and 6d heads can feed it.
struct BodyTapeResult {
  ad::Var vertices;  // [V,3]
  ad::Var joints;    // [J,3]
};
BodyTapeResult body_forward_tape(ad::Tape& tape, const BodyModelDefinition& def,
                                 ad::Var rotations, ad::Var beta, ad::Var trans);

// Deterministic desk-scale model: 22 joints, 64 vertices, 10 shape basis
// vectors, all built from closed-form expressions.
BodyModelDefinition make_toy_body_model();

// number of joints/betas the toy model and the decoder heads agree on
inline constexpr int kNumJoints = 22;
inline constexpr int kNumBetas = 10;

BodyModelDefinition load_body_model(const std::string& path);
void save_body_model(const std::string& path, const BodyModelDefinition& def);

// ASCII OBJ with fixed 6-decimal vertices; writing what read_obj returned
// reproduces the file byte for byte
void write_obj(const std::string& path, const Eigen::MatrixXd& vertices,
               const Eigen::MatrixXi& faces);
struct ObjMesh {
  Eigen::MatrixXd vertices;
  Eigen::MatrixXi faces;
};
ObjMesh read_obj(const std::string& path);

}  // namespace meev
