#include "body/body_model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "core/archive.hpp"
#include "core/rotations.hpp"

namespace meev {

void BodyModelDefinition::validate() const {
  int v = num_vertices(), j = num_joints(), b = num_betas();
  check(v > 0 && j > 0, Status::config_error, "body model: empty geometry");
  check(template_vertices.cols() == 3, Status::config_error,
        "body model: template must be [V,3]");
  check(shape_dirs.rows() == static_cast<Eigen::Index>(v) * 3,
        Status::config_error, "body model: shape basis rows ",
        shape_dirs.rows(), " != 3*V = ", 3 * v);
  check(b >= 0, Status::config_error, "body model: negative basis size");
  check(joint_regressor.cols() == v, Status::config_error,
        "body model: joint regressor must be [J,V]");
  check(static_cast<int>(parents.size()) == j, Status::config_error,
        "body model: parents size ", parents.size(), " != J = ", j);
  check(parents[0] == -1, Status::config_error,
        "body model: joint 0 must be the root");
  for (int k = 1; k < j; ++k)
    check(parents[k] >= 0 && parents[k] < k, Status::config_error,
          "body model: parent of joint ", k, " must precede it, got ",
          parents[k]);
  check(skin_weights.rows() == v && skin_weights.cols() == j,
        Status::config_error, "body model: skin weights must be [V,J]");
  for (int i = 0; i < v; ++i) {
    double sum = skin_weights.row(i).sum();
    check(std::fabs(sum - 1.0) < 1e-8, Status::config_error,
          "body model: skin weights of vertex ", i, " sum to ", sum);
    check(skin_weights.row(i).minCoeff() >= 0, Status::config_error,
          "body model: negative skin weight at vertex ", i);
  }
  for (int k = 0; k < j; ++k) {
    double sum = joint_regressor.row(k).sum();
    check(std::fabs(sum - 1.0) < 1e-8, Status::config_error,
          "body model: joint regressor row ", k, " sums to ", sum);
  }
  if (faces.size() > 0) {
    check(faces.cols() == 3, Status::config_error,
          "body model: faces must be triangles");
    check(faces.minCoeff() >= 0 && faces.maxCoeff() < v, Status::config_error,
          "body model: face index out of range");
  }
}

BodyParams BodyParams::rest(const BodyModelDefinition& def) {
  BodyParams p;
  p.theta = Eigen::MatrixXd::Zero(def.num_joints(), 3);
  p.beta = Eigen::VectorXd::Zero(def.num_betas());
  return p;
}

Eigen::MatrixXd shape_vertices(const BodyModelDefinition& def,
                               const Eigen::VectorXd& beta) {
  check_arg(beta.size() == def.num_betas(), "shape_vertices: beta size ",
            beta.size(), " != ", def.num_betas());
  Eigen::VectorXd disp = def.shape_dirs * beta;  // [V*3]
  Eigen::MatrixXd out = def.template_vertices;
  for (int v = 0; v < def.num_vertices(); ++v)
    for (int a = 0; a < 3; ++a) out(v, a) += disp[v * 3 + a];
  return out;
}

Eigen::MatrixXd regress_joints(const BodyModelDefinition& def,
                               const Eigen::MatrixXd& vertices) {
  check_arg(vertices.rows() == def.num_vertices() && vertices.cols() == 3,
            "regress_joints: vertices must be [V,3]");
  return def.joint_regressor * vertices;
}

namespace {

Eigen::Matrix4d make_affine_mat(const Eigen::Matrix3d& r,
                                const Eigen::Vector3d& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = t;
  return m;
}

}  // namespace

FkResult forward_kinematics(const BodyModelDefinition& def,
                            const Eigen::MatrixXd& theta,
                            const Eigen::MatrixXd& rest_joints) {
  int j = def.num_joints();
  check_arg(theta.rows() == j && theta.cols() == 3,
            "forward_kinematics: theta must be [J,3]");
  check_arg(rest_joints.rows() == j && rest_joints.cols() == 3,
            "forward_kinematics: rest joints must be [J,3]");
  FkResult out;
  out.world.resize(j);
  out.skinning.resize(j);
  out.posed_joints.resize(j, 3);
  for (int k = 0; k < j; ++k) {
    Eigen::Matrix3d r = axis_angle_to_matrix(theta.row(k).transpose());
    Eigen::Vector3d offset =
        k == 0 ? Eigen::Vector3d(rest_joints.row(0))
               : Eigen::Vector3d(rest_joints.row(k) -
                                 rest_joints.row(def.parents[k]));
    Eigen::Matrix4d local = make_affine_mat(r, offset);
    out.world[k] = k == 0 ? local : out.world[def.parents[k]] * local;
    out.skinning[k] =
        out.world[k] * make_affine_mat(Eigen::Matrix3d::Identity(),
                                       -rest_joints.row(k).transpose());
    out.posed_joints.row(k) = out.world[k].topRightCorner<3, 1>().transpose();
  }
  return out;
}

Eigen::MatrixXd linear_blend_skinning(const BodyModelDefinition& def,
                                      const std::vector<Eigen::Matrix4d>& skinning,
                                      const Eigen::MatrixXd& vertices) {
  int v = def.num_vertices(), j = def.num_joints();
  check_arg(static_cast<int>(skinning.size()) == j,
            "linear_blend_skinning: transform count mismatch");
  check_arg(vertices.rows() == v && vertices.cols() == 3,
            "linear_blend_skinning: vertices must be [V,3]");
  Eigen::MatrixXd out(v, 3);
  for (int i = 0; i < v; ++i) {
    Eigen::Matrix4d blended = Eigen::Matrix4d::Zero();
    for (int k = 0; k < j; ++k) {
      double w = def.skin_weights(i, k);
      if (w != 0.0) blended += w * skinning[k];
    }
    Eigen::Vector4d h(vertices(i, 0), vertices(i, 1), vertices(i, 2), 1.0);
    out.row(i) = (blended * h).head<3>().transpose();
  }
  return out;
}

BodyForwardResult body_forward(const BodyModelDefinition& def,
                               const BodyParams& params) {
  Eigen::MatrixXd shaped = shape_vertices(def, params.beta);
  Eigen::MatrixXd rest = regress_joints(def, shaped);
  FkResult fk = forward_kinematics(def, params.theta, rest);
  BodyForwardResult out;
  out.vertices = linear_blend_skinning(def, fk.skinning, shaped);
  out.vertices.rowwise() += params.trans.transpose();
  out.joints = fk.posed_joints;
  out.joints.rowwise() += params.trans.transpose();
  return out;
}

BodyTapeResult body_forward_tape(ad::Tape& tape, const BodyModelDefinition& def,
                                 ad::Var rotations, ad::Var beta,
                                 ad::Var trans) {
  int v = def.num_vertices(), j = def.num_joints(), b = def.num_betas();
  check_arg(rotations.shape() == ad::Shape{j, 3, 3},
            "body_forward_tape: rotations must be [J,3,3]");
  check_arg(beta.shape() == ad::Shape{b}, "body_forward_tape: beta shape");
  check_arg(trans.shape() == ad::Shape{3}, "body_forward_tape: trans shape");

  std::vector<double> dirs(static_cast<std::size_t>(v) * 3 * b);
  for (int r = 0; r < v * 3; ++r)
    for (int c = 0; c < b; ++c) dirs[r * b + c] = def.shape_dirs(r, c);
  std::vector<double> templ(static_cast<std::size_t>(v) * 3);
  for (int i = 0; i < v; ++i)
    for (int a = 0; a < 3; ++a) templ[i * 3 + a] = def.template_vertices(i, a);
  std::vector<double> jreg(static_cast<std::size_t>(j) * v);
  for (int k = 0; k < j; ++k)
    for (int i = 0; i < v; ++i) jreg[k * v + i] = def.joint_regressor(k, i);
  std::vector<double> wts(static_cast<std::size_t>(v) * j);
  for (int i = 0; i < v; ++i)
    for (int k = 0; k < j; ++k) wts[i * j + k] = def.skin_weights(i, k);

  ad::Var disp = tape.matmul(tape.constant({v * 3, b}, std::move(dirs)),
                             tape.reshape(beta, {b, 1}));
  ad::Var shaped = tape.add(tape.constant({v, 3}, std::move(templ)),
                            tape.reshape(disp, {v, 3}));
  ad::Var rest = tape.matmul(tape.constant({j, v}, std::move(jreg)), shaped);

  // bone offsets as one linear map of the rest joints
  std::vector<double> diff(static_cast<std::size_t>(j) * j, 0.0);
  diff[0] = 1.0;
  for (int k = 1; k < j; ++k) {
    diff[k * j + k] = 1.0;
    diff[k * j + def.parents[k]] = -1.0;
  }
  ad::Var offsets = tape.matmul(tape.constant({j, j}, std::move(diff)), rest);
  ad::Var locals = tape.make_affine(rotations, offsets);  // [J,4,4]

  std::vector<ad::Var> world_flat;
  std::vector<ad::Var> worlds;
  worlds.reserve(j);
  for (int k = 0; k < j; ++k) {
    ad::Var local =
        tape.reshape(tape.slice_axis0(locals, k, 1), {4, 4});
    ad::Var w = k == 0 ? local : tape.matmul(worlds[def.parents[k]], local);
    worlds.push_back(w);
    world_flat.push_back(tape.reshape(w, {1, 16}));
  }
  ad::Var world_rows = tape.concat_axis0(world_flat);  // [J,16]
  ad::Var posed = tape.apply_affine_rows(world_rows, tape.zeros({j, 3}));

  // skinning transform per joint: world * translate(-rest_joint)
  std::vector<ad::Var> skin_flat;
  skin_flat.reserve(j);
  std::vector<double> eye9 = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  ad::Var eye = tape.constant({3, 3}, eye9);
  for (int k = 0; k < j; ++k) {
    ad::Var rest_k = tape.reshape(tape.slice_axis0(rest, k, 1), {3});
    ad::Var t_back = tape.make_affine(eye, tape.neg(rest_k));
    skin_flat.push_back(tape.reshape(tape.matmul(worlds[k], t_back), {1, 16}));
  }
  ad::Var skin_rows = tape.concat_axis0(skin_flat);  // [J,16]

  std::vector<double> wts_copy = std::move(wts);
  ad::Var vert_transforms =
      tape.matmul(tape.constant({v, j}, std::move(wts_copy)), skin_rows);
  ad::Var skinned = tape.apply_affine_rows(vert_transforms, shaped);

  BodyTapeResult out;
  out.vertices = tape.add_broadcast_row(skinned, trans);
  out.joints = tape.add_broadcast_row(posed, trans);
  return out;
}

namespace {

// fixed lateral/forward nudge directions used to place the paired
// surface-site vertices around each joint
Eigen::Vector3d site_offset(int joint) {
  double phase = 0.9 * joint;
  Eigen::Vector3d d(std::cos(phase), 0.35 * std::sin(1.7 * phase + 0.4),
                    std::sin(phase));
  return 0.03 * d.normalized();
}

}  // namespace

BodyModelDefinition make_toy_body_model() {
  constexpr int j = kNumJoints;
  constexpr int b = kNumBetas;

  BodyModelDefinition def;
  def.parents = {-1, 0, 1, 2, 3, 4,          // pelvis, spine1..3, neck, head
                 0, 6, 7, 8,                 // left hip, knee, ankle, foot
                 0, 10, 11, 12,              // right leg
                 3, 14, 15, 16,              // left collar, shoulder, elbow, wrist
                 3, 18, 19, 20};             // right arm

  Eigen::MatrixXd joints(j, 3);
  joints << 0.00, 0.00, 0.00,    // pelvis
      0.00, 0.15, 0.00,          // spine1
      0.00, 0.30, 0.00,          // spine2
      0.00, 0.45, 0.00,          // spine3
      0.00, 0.60, 0.00,          // neck
      0.00, 0.72, 0.00,          // head
      0.09, -0.05, 0.00,         // left hip
      0.10, -0.45, 0.00,         // left knee
      0.11, -0.85, 0.00,         // left ankle
      0.12, -0.90, 0.12,         // left foot
      -0.09, -0.05, 0.00,        // right hip
      -0.10, -0.45, 0.00,        // right knee
      -0.11, -0.85, 0.00,        // right ankle
      -0.12, -0.90, 0.12,        // right foot
      0.05, 0.52, 0.00,          // left collar
      0.18, 0.55, 0.00,          // left shoulder
      0.45, 0.55, 0.00,          // left elbow
      0.70, 0.55, 0.00,          // left wrist
      -0.05, 0.52, 0.00,         // right collar
      -0.18, 0.55, 0.00,         // right shoulder
      -0.45, 0.55, 0.00,         // right elbow
      -0.70, 0.55, 0.00;         // right wrist

  // two surface sites per joint, then one midpoint per bone except the
  // head bone, which brings the count to exactly 64
  int v = 2 * j + (j - 2);
  def.template_vertices.resize(v, 3);
  def.skin_weights = Eigen::MatrixXd::Zero(v, j);
  def.joint_regressor = Eigen::MatrixXd::Zero(j, v);
  for (int k = 0; k < j; ++k) {
    Eigen::Vector3d d = site_offset(k);
    def.template_vertices.row(2 * k) = joints.row(k) + d.transpose();
    def.template_vertices.row(2 * k + 1) = joints.row(k) - d.transpose();
    def.skin_weights(2 * k, k) = 1.0;
    def.skin_weights(2 * k + 1, k) = 1.0;
    def.joint_regressor(k, 2 * k) = 0.5;
    def.joint_regressor(k, 2 * k + 1) = 0.5;
  }
  int next = 2 * j;
  for (int k = 1; k < j; ++k) {
    if (k == 5) continue;  // head bone midpoint dropped to land on V=64
    int p = def.parents[k];
    def.template_vertices.row(next) = 0.5 * (joints.row(k) + joints.row(p));
    def.skin_weights(next, k) = 0.5;
    def.skin_weights(next, p) = 0.5;
    ++next;
  }
  check(next == v, Status::runtime_error, "toy model vertex count mismatch");

  // one pair of triangles per bone, spanning the site vertices of the
  // joint and of its parent
  def.faces.resize(2 * (j - 1), 3);
  for (int k = 1; k < j; ++k) {
    int p = def.parents[k];
    def.faces.row(2 * (k - 1)) << 2 * k, 2 * k + 1, 2 * p;
    def.faces.row(2 * (k - 1) + 1) << 2 * k + 1, 2 * p, 2 * p + 1;
  }

  // smooth deterministic displacement fields, a few centimetres per unit
  // coefficient; basis 0 is a near-uniform scale so stature is controllable
  def.shape_dirs.resize(v * 3, b);
  for (int i = 0; i < v; ++i) {
    Eigen::Vector3d pos = def.template_vertices.row(i);
    for (int a = 0; a < 3; ++a) {
      def.shape_dirs(i * 3 + a, 0) = 0.05 * pos[a];
      for (int k = 1; k < b; ++k) {
        double phase = 1.3 * k + 2.1 * a;
        def.shape_dirs(i * 3 + a, k) =
            0.02 * std::sin(3.0 * (k + 1) * pos.y() + phase) +
            0.01 * std::cos(2.0 * k * pos.x() - 0.7 * a);
      }
    }
  }

  def.validate();
  return def;
}

BodyModelDefinition load_body_model(const std::string& path) {
  Archive a = Archive::load(path);
  BodyModelDefinition def;
  auto dims = a.dims("template");
  check(dims.size() == 2 && dims[1] == 3, Status::data_error,
        "body model archive: template must be [V,3]");
  int v = static_cast<int>(dims[0]);
  auto tmpl = a.f64("template");
  def.template_vertices.resize(v, 3);
  for (int i = 0; i < v; ++i)
    for (int c = 0; c < 3; ++c) def.template_vertices(i, c) = tmpl[i * 3 + c];

  auto fdims = a.dims("faces");
  check(fdims.size() == 2 && fdims[1] == 3, Status::data_error,
        "body model archive: faces must be [F,3]");
  auto fdata = a.i64("faces");
  int f = static_cast<int>(fdims[0]);
  def.faces.resize(f, 3);
  for (int i = 0; i < f; ++i)
    for (int c = 0; c < 3; ++c)
      def.faces(i, c) = static_cast<int>(fdata[i * 3 + c]);

  auto sdims = a.dims("shape_basis");
  check(sdims.size() == 3 && sdims[0] == dims[0] && sdims[1] == 3,
        Status::data_error, "body model archive: shape basis must be [V,3,B]");
  int b = static_cast<int>(sdims[2]);
  auto sdata = a.f64("shape_basis");
  def.shape_dirs.resize(v * 3, b);
  for (int r = 0; r < v * 3; ++r)
    for (int c = 0; c < b; ++c) def.shape_dirs(r, c) = sdata[r * b + c];

  auto jdims = a.dims("J_regressor");
  check(jdims.size() == 2 && jdims[1] == dims[0], Status::data_error,
        "body model archive: joint regressor must be [J,V]");
  int j = static_cast<int>(jdims[0]);
  auto jdata = a.f64("J_regressor");
  def.joint_regressor.resize(j, v);
  for (int r = 0; r < j; ++r)
    for (int c = 0; c < v; ++c) def.joint_regressor(r, c) = jdata[r * v + c];

  auto pdata = a.i64("parents");
  check(static_cast<int>(pdata.size()) == j, Status::data_error,
        "body model archive: parents size mismatch");
  def.parents.assign(pdata.begin(), pdata.end());

  auto wdims = a.dims("weights");
  check(wdims.size() == 2 && wdims[0] == dims[0] && wdims[1] == jdims[0],
        Status::data_error, "body model archive: weights must be [V,J]");
  auto wdata = a.f64("weights");
  def.skin_weights.resize(v, j);
  for (int r = 0; r < v; ++r)
    for (int c = 0; c < j; ++c) def.skin_weights(r, c) = wdata[r * j + c];

  def.validate();
  return def;
}

void save_body_model(const std::string& path, const BodyModelDefinition& def) {
  def.validate();
  int v = def.num_vertices(), j = def.num_joints(), b = def.num_betas();
  int f = def.num_faces();
  Archive a;
  std::vector<double> tmpl(static_cast<std::size_t>(v) * 3);
  for (int i = 0; i < v; ++i)
    for (int c = 0; c < 3; ++c) tmpl[i * 3 + c] = def.template_vertices(i, c);
  a.put_f64("template", {static_cast<std::uint64_t>(v), 3}, tmpl);

  std::vector<std::int64_t> faces(static_cast<std::size_t>(f) * 3);
  for (int i = 0; i < f; ++i)
    for (int c = 0; c < 3; ++c) faces[i * 3 + c] = def.faces(i, c);
  a.put_i64("faces", {static_cast<std::uint64_t>(f), 3}, faces);

  std::vector<double> dirs(static_cast<std::size_t>(v) * 3 * b);
  for (int r = 0; r < v * 3; ++r)
    for (int c = 0; c < b; ++c) dirs[r * b + c] = def.shape_dirs(r, c);
  a.put_f64("shape_basis",
            {static_cast<std::uint64_t>(v), 3, static_cast<std::uint64_t>(b)},
            dirs);

  std::vector<double> jreg(static_cast<std::size_t>(j) * v);
  for (int r = 0; r < j; ++r)
    for (int c = 0; c < v; ++c) jreg[r * v + c] = def.joint_regressor(r, c);
  a.put_f64("J_regressor",
            {static_cast<std::uint64_t>(j), static_cast<std::uint64_t>(v)},
            jreg);

  a.put_i64("parents", {static_cast<std::uint64_t>(j)},
            std::vector<std::int64_t>(def.parents.begin(), def.parents.end()));

  std::vector<double> wts(static_cast<std::size_t>(v) * j);
  for (int r = 0; r < v; ++r)
    for (int c = 0; c < j; ++c) wts[r * j + c] = def.skin_weights(r, c);
  a.put_f64("weights",
            {static_cast<std::uint64_t>(v), static_cast<std::uint64_t>(j)},
            wts);

  a.put_bytes("meta.json", concat("{\"vertices\":", v, ",\"joints\":", j,
                                  ",\"betas\":", b, "}"));
  a.save(path);
}

namespace {

// %.6f with negative zero folded to plain zero so rewriting parsed output
// is byte-stable
std::string format_coord(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

}  // namespace

void write_obj(const std::string& path, const Eigen::MatrixXd& vertices,
               const Eigen::MatrixXi& faces) {
  check_arg(vertices.cols() == 3, "write_obj: vertices must be [V,3]");
  check_arg(faces.size() == 0 || faces.cols() == 3,
            "write_obj: faces must be [F,3]");
  std::ostringstream out;
  for (Eigen::Index i = 0; i < vertices.rows(); ++i)
    out << "v " << format_coord(vertices(i, 0)) << ' '
        << format_coord(vertices(i, 1)) << ' ' << format_coord(vertices(i, 2))
        << '\n';
  for (Eigen::Index i = 0; i < faces.rows(); ++i)
    out << "f " << faces(i, 0) + 1 << ' ' << faces(i, 1) + 1 << ' '
        << faces(i, 2) + 1 << '\n';
  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    check(f.good(), Status::runtime_error, "write_obj: cannot open ", tmp);
    f << out.str();
    check(f.good(), Status::runtime_error, "write_obj: write failed on ", tmp);
  }
  check(std::rename(tmp.c_str(), path.c_str()) == 0, Status::runtime_error,
        "write_obj: rename to ", path, " failed");
}

ObjMesh read_obj(const std::string& path) {
  std::ifstream f(path);
  check(f.good(), Status::data_error, "read_obj: cannot open ", path);
  std::vector<Eigen::Vector3d> verts;
  std::vector<Eigen::Vector3i> faces;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      Eigen::Vector3d v;
      ss >> v.x() >> v.y() >> v.z();
      check(!ss.fail(), Status::data_error, "read_obj: bad vertex at line ",
            line_no);
      verts.push_back(v);
    } else if (tag == "f") {
      Eigen::Vector3i idx;
      ss >> idx.x() >> idx.y() >> idx.z();
      check(!ss.fail(), Status::data_error, "read_obj: bad face at line ",
            line_no);
      faces.push_back(idx - Eigen::Vector3i::Ones());
    }
  }
  ObjMesh mesh;
  mesh.vertices.resize(static_cast<Eigen::Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i)
    mesh.vertices.row(static_cast<Eigen::Index>(i)) = verts[i].transpose();
  mesh.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
  for (std::size_t i = 0; i < faces.size(); ++i)
    mesh.faces.row(static_cast<Eigen::Index>(i)) = faces[i].transpose();
  return mesh;
}

}  // namespace meev
