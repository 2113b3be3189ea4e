#include "repcycle/body_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <set>

#include <Eigen/Geometry>

#include "repcycle/error.hpp"
#include "repcycle/rng.hpp"
#include "repcycle/rotation.hpp"

namespace repcycle::body {
namespace {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// ---------------------------------------------------------------------------
// Toy body description. Joint positions are sums of per-joint offsets and
// every ring vertex is an affine function of offsets and radii, so the shape
// basis computed as a parameter difference is exactly linear.

struct ToyJoint {
  std::string name;
  int parent = -1;
  Vec3 offset = Vec3::Zero();
};

struct ToyBone {
  int start = 0;
  int end = -1;                  // child joint or -1 for a tip bone
  Vec3 tip = Vec3::Zero();       // used when end == -1
  std::array<double, 4> radii{};  // start x, start z, end x, end z
  int part = kTorso;
  int tip_slot = -1;
};

struct ToyBody {
  std::vector<ToyJoint> joints;
  std::vector<ToyBone> bones;
};

ToyBody toy_skeleton(int joint_count) {
  const bool has_head = joint_count >= 16;
  const int spine_count = joint_count == 14 ? 0 : (joint_count == 15 ? 1 : joint_count - 15);
  const double torso_height = 0.5;
  const double torso_step = torso_height / (spine_count + 1);
  const double arm_angle = std::numbers::pi / 6.0;

  ToyBody body;
  auto add_joint = [&](std::string name, int parent, Vec3 offset) {
    body.joints.push_back({std::move(name), parent, offset});
    return static_cast<int>(body.joints.size()) - 1;
  };

  // Torso radius profile along the pelvis-to-neck axis (fraction 0..1).
  auto torso_radius = [](double f) {
    const double rx = f < 0.7 ? 0.14 + (0.16 - 0.14) * f / 0.7 : 0.16 + (0.12 - 0.16) * (f - 0.7) / 0.3;
    const double rz = f < 0.5 ? 0.095 + 0.01 * f / 0.5 : 0.105 + (0.08 - 0.105) * (f - 0.5) / 0.5;
    return std::array<double, 2>{rx, rz};
  };

  const int pelvis = add_joint("pelvis", -1, Vec3::Zero());
  int top = pelvis;
  std::vector<int> torso_chain{pelvis};
  for (int i = 0; i < spine_count; ++i) {
    top = add_joint("spine_" + std::to_string(i + 1), top, Vec3(0.0, torso_step, 0.0));
    torso_chain.push_back(top);
  }
  const int neck = add_joint("neck", top, Vec3(0.0, torso_step, 0.0));
  torso_chain.push_back(neck);
  for (std::size_t i = 0; i + 1 < torso_chain.size(); ++i) {
    const auto r0 = torso_radius(static_cast<double>(i) / (torso_chain.size() - 1));
    const auto r1 = torso_radius(static_cast<double>(i + 1) / (torso_chain.size() - 1));
    body.bones.push_back({torso_chain[i], torso_chain[i + 1], Vec3::Zero(), {r0[0], r0[1], r1[0], r1[1]}, kTorso});
  }
  if (has_head) {
    const int head = add_joint("head", neck, Vec3(0.0, 0.08, 0.0));
    body.bones.push_back({neck, head, Vec3::Zero(), {0.05, 0.05, 0.055, 0.055}, kHead});
    body.bones.push_back({head, -1, Vec3(0.0, 0.16, 0.0), {0.085, 0.09, 0.09, 0.095}, kHead});
  } else {
    body.bones.push_back({neck, -1, Vec3(0.0, 0.24, 0.0), {0.07, 0.075, 0.09, 0.095}, kHead});
  }

  const double shoulder_y = 0.45 - torso_step * spine_count;
  for (int side = 0; side < 2; ++side) {
    const double sx = side == 0 ? 1.0 : -1.0;
    const std::string prefix = side == 0 ? "left_" : "right_";
    const Vec3 arm_dir(sx * std::sin(arm_angle), -std::cos(arm_angle), 0.0);
    const int shoulder = add_joint(prefix + "shoulder", top, Vec3(sx * 0.19, shoulder_y, 0.0));
    const int elbow = add_joint(prefix + "elbow", shoulder, arm_dir * 0.28);
    const int wrist = add_joint(prefix + "wrist", elbow, arm_dir * 0.25);
    body.bones.push_back({shoulder, elbow, Vec3::Zero(), {0.05, 0.05, 0.04, 0.04}, side == 0 ? kLeftUpperArm : kRightUpperArm});
    body.bones.push_back({elbow, wrist, Vec3::Zero(), {0.04, 0.04, 0.032, 0.032}, side == 0 ? kLeftLowerArm : kRightLowerArm});
    body.bones.push_back({wrist, -1, arm_dir * 0.09, {0.03, 0.018, 0.028, 0.014}, side == 0 ? kLeftHand : kRightHand});
  }
  for (int side = 0; side < 2; ++side) {
    const double sx = side == 0 ? 1.0 : -1.0;
    const std::string prefix = side == 0 ? "left_" : "right_";
    const int hip = add_joint(prefix + "hip", pelvis, Vec3(sx * 0.09, -0.06, 0.0));
    const int knee = add_joint(prefix + "knee", hip, Vec3(0.0, -0.42, 0.0));
    const int ankle = add_joint(prefix + "ankle", knee, Vec3(0.0, -0.40, 0.0));
    body.bones.push_back({hip, knee, Vec3::Zero(), {0.075, 0.075, 0.052, 0.052}, side == 0 ? kLeftUpperLeg : kRightUpperLeg});
    body.bones.push_back({knee, ankle, Vec3::Zero(), {0.05, 0.05, 0.038, 0.038}, side == 0 ? kLeftLowerLeg : kRightLowerLeg});
    body.bones.push_back({ankle, -1, Vec3(0.0, -0.04, 0.14), {0.04, 0.03, 0.035, 0.02}, side == 0 ? kLeftFoot : kRightFoot});
  }
  return body;
}

// Dial vector: per-joint offsets, per-bone tip offsets and per-bone radii.
struct ToyDials {
  std::vector<Vec3> offsets;
  std::vector<Vec3> tips;
  std::vector<std::array<double, 4>> radii;

  ToyDials zero_like() const {
    ToyDials d = *this;
    for (auto& o : d.offsets) o.setZero();
    for (auto& t : d.tips) t.setZero();
    for (auto& r : d.radii) r.fill(0.0);
    return d;
  }
};

ToyDials dials_of(const ToyBody& body) {
  ToyDials d;
  for (const auto& j : body.joints) d.offsets.push_back(j.offset);
  for (const auto& b : body.bones) {
    d.tips.push_back(b.tip);
    d.radii.push_back(b.radii);
  }
  return d;
}

ToyDials add(const ToyDials& a, const ToyDials& b) {
  ToyDials out = a;
  for (std::size_t i = 0; i < out.offsets.size(); ++i) out.offsets[i] += b.offsets[i];
  for (std::size_t i = 0; i < out.tips.size(); ++i) out.tips[i] += b.tips[i];
  for (std::size_t i = 0; i < out.radii.size(); ++i)
    for (int k = 0; k < 4; ++k) out.radii[i][k] += b.radii[i][k];
  return out;
}

struct BoneFrame {
  Vec3 axis;
  Vec3 lateral;
  Vec3 depth;
};

BoneFrame frame_for(const Vec3& direction) {
  BoneFrame f;
  f.axis = direction.normalized();
  Vec3 lateral = Vec3::UnitX() - Vec3::UnitX().dot(f.axis) * f.axis;
  if (lateral.norm() < 1e-6) {
    lateral = Vec3::UnitZ() - Vec3::UnitZ().dot(f.axis) * f.axis;
  }
  f.lateral = lateral.normalized();
  f.depth = f.axis.cross(f.lateral);
  return f;
}

class ToyMesher {
 public:
  ToyMesher(const ToyBody& body, int detail)
      : body_(body), segments_(4 + 2 * detail), rings_(2 + detail) {
    const auto base = dials_of(body);
    const auto positions = joint_positions(base);
    for (const auto& bone : body_.bones) {
      frames_.push_back(frame_for(bone_end(bone, base, positions, &bone - body_.bones.data()) -
                                  positions[bone.start]));
    }
  }

  int vertices_per_bone() const { return rings_ * segments_ + 2; }

  std::vector<Vec3> joint_positions(const ToyDials& dials) const {
    std::vector<Vec3> pos(body_.joints.size());
    for (std::size_t j = 0; j < body_.joints.size(); ++j) {
      const int p = body_.joints[j].parent;
      pos[j] = (p < 0 ? Vec3::Zero() : pos[p]) + dials.offsets[j];
    }
    return pos;
  }

  Points vertices(const ToyDials& dials) const {
    const auto pos = joint_positions(dials);
    Points v(static_cast<Eigen::Index>(body_.bones.size()) * vertices_per_bone(), 3);
    Eigen::Index row = 0;
    for (std::size_t b = 0; b < body_.bones.size(); ++b) {
      const auto& bone = body_.bones[b];
      const auto& frame = frames_[b];
      const Vec3 start = pos[bone.start];
      const Vec3 end = bone_end(bone, dials, pos, b);
      const auto& r = dials.radii[b];
      for (int k = 0; k < rings_; ++k) {
        const double s = static_cast<double>(k) / (rings_ - 1);
        const double rx = (1.0 - s) * r[0] + s * r[2];
        const double rz = (1.0 - s) * r[1] + s * r[3];
        const Vec3 center = (1.0 - s) * start + s * end;
        for (int q = 0; q < segments_; ++q) {
          const double phi = 2.0 * std::numbers::pi * q / segments_;
          v.row(row++) = center + rx * std::cos(phi) * frame.lateral + rz * std::sin(phi) * frame.depth;
        }
      }
      v.row(row++) = start - 0.25 * (r[0] + r[1]) * frame.axis;
      v.row(row++) = end + 0.25 * (r[2] + r[3]) * frame.axis;
    }
    return v;
  }

  Faces faces(std::vector<int>& labels) const {
    const int per_bone_faces = segments_ * (rings_ - 1) * 2 + 2 * segments_;
    Faces f(static_cast<Eigen::Index>(body_.bones.size()) * per_bone_faces, 3);
    labels.clear();
    Eigen::Index row = 0;
    for (std::size_t b = 0; b < body_.bones.size(); ++b) {
      const int base = static_cast<int>(b) * vertices_per_bone();
      auto ring = [&](int k, int q) { return base + k * segments_ + (q % segments_); };
      for (int k = 0; k + 1 < rings_; ++k) {
        for (int q = 0; q < segments_; ++q) {
          f.row(row++) << ring(k, q), ring(k, q + 1), ring(k + 1, q + 1);
          f.row(row++) << ring(k, q), ring(k + 1, q + 1), ring(k + 1, q);
        }
      }
      const int start_pole = base + rings_ * segments_;
      const int end_pole = start_pole + 1;
      for (int q = 0; q < segments_; ++q) {
        f.row(row++) << start_pole, ring(0, q + 1), ring(0, q);
        f.row(row++) << end_pole, ring(rings_ - 1, q), ring(rings_ - 1, q + 1);
      }
      labels.insert(labels.end(), per_bone_faces, body_.bones[b].part);
    }
    return f;
  }

  // Skinning: each bone follows its start joint, blending toward the start
  // joint's parent near the start and toward the child joint near the end.
  Eigen::MatrixXd skin_weights() const {
    constexpr double kBlendSpan = 0.35;
    constexpr double kBlendPeak = 0.5;
    const auto joint_count = static_cast<Eigen::Index>(body_.joints.size());
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(body_.bones.size()) * vertices_per_bone(), joint_count);
    Eigen::Index row = 0;
    for (const auto& bone : body_.bones) {
      const int parent = body_.joints[bone.start].parent;
      auto assign = [&](double s) {
        const double wp = parent >= 0 ? kBlendPeak * std::max(0.0, 1.0 - s / kBlendSpan) : 0.0;
        const double wc = bone.end >= 0 ? kBlendPeak * std::max(0.0, 1.0 - (1.0 - s) / kBlendSpan) : 0.0;
        if (parent >= 0) w(row, parent) += wp;
        if (bone.end >= 0) w(row, bone.end) += wc;
        w(row, bone.start) += 1.0 - wp - wc;
        ++row;
      };
      for (int k = 0; k < rings_; ++k) {
        const double s = static_cast<double>(k) / (rings_ - 1);
        for (int q = 0; q < segments_; ++q) assign(s);
      }
      assign(0.0);
      assign(1.0);
    }
    return w;
  }

  // Joint j is the centroid of the first ring of the bone that starts at j.
  Eigen::MatrixXd joint_regressor() const {
    Eigen::MatrixXd reg = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(body_.joints.size()),
                                                static_cast<Eigen::Index>(body_.bones.size()) * vertices_per_bone());
    std::vector<bool> done(body_.joints.size(), false);
    for (std::size_t b = 0; b < body_.bones.size(); ++b) {
      const int j = body_.bones[b].start;
      if (done[j]) continue;
      done[j] = true;
      const int base = static_cast<int>(b) * vertices_per_bone();
      for (int q = 0; q < segments_; ++q) reg(j, base + q) = 1.0 / segments_;
    }
    for (std::size_t j = 0; j < done.size(); ++j) {
      require(done[j], ErrorCode::kInvalidConfiguration, "toy skeleton joint without a bone: " + body_.joints[j].name);
    }
    return reg;
  }

 private:
  Vec3 bone_end(const ToyBone& bone, const ToyDials& dials, const std::vector<Vec3>& pos, std::size_t b) const {
    return bone.end >= 0 ? pos[bone.end] : Vec3(pos[bone.start] + dials.tips[b]);
  }

  const ToyBody& body_;
  int segments_;
  int rings_;
  std::vector<BoneFrame> frames_;
};

bool name_in(const std::string& name, std::initializer_list<std::string_view> keys) {
  return std::any_of(keys.begin(), keys.end(), [&](std::string_view k) { return name.find(k) != std::string::npos; });
}

// The ten shape directions, expressed as deltas on the dial vector.
std::vector<ToyDials> shape_directions(const ToyBody& body, const ToyDials& base) {
  std::vector<ToyDials> dirs(kDefaultShapeCount, base.zero_like());
  const auto& joints = body.joints;
  const auto& bones = body.bones;
  const int torso_bones = static_cast<int>(std::count_if(bones.begin(), bones.end(), [](const ToyBone& b) { return b.part == kTorso; }));
  int torso_index = 0;
  for (std::size_t b = 0; b < bones.size(); ++b) {
    const auto& bone = bones[b];
    const auto& r = base.radii[b];
    const bool arm = is_arm_part(bone.part);
    const bool leg = is_leg_part(bone.part);
    for (int k = 0; k < 4; ++k) dirs[0].radii[b][k] = 0.08 * r[k];  // girth
    if (arm || leg) {
      for (int k = 0; k < 4; ++k) dirs[9].radii[b][k] = 0.10 * r[k];  // limb thickness
      dirs[1].tips[b] = 0.04 * base.tips[b];
      (arm ? dirs[4] : dirs[3]).tips[b] = 0.05 * base.tips[b];
    }
    if (bone.part == kHead) {
      for (int k = 0; k < 4; ++k) dirs[8].radii[b][k] = 0.10 * r[k];
      dirs[8].tips[b] = 0.08 * base.tips[b];
    }
    if (bone.part == kTorso) {
      const double f0 = static_cast<double>(torso_index) / torso_bones;
      const double f1 = static_cast<double>(torso_index + 1) / torso_bones;
      dirs[5].radii[b][0] = 0.015 * f0;  // shoulder width widens the upper torso
      dirs[5].radii[b][2] = 0.015 * f1;
      dirs[6].radii[b][0] = 0.015 * (1.0 - f0);  // hip width widens the lower torso
      dirs[6].radii[b][2] = 0.015 * (1.0 - f1);
      dirs[7].radii[b][1] = 0.025 * std::sin(std::numbers::pi * f0);  // belly
      dirs[7].radii[b][3] = 0.025 * std::sin(std::numbers::pi * f1);
      ++torso_index;
    }
  }
  for (std::size_t j = 0; j < joints.size(); ++j) {
    const auto& name = joints[j].name;
    const Vec3& off = base.offsets[j];
    if (name_in(name, {"elbow", "wrist", "knee", "ankle"})) dirs[1].offsets[j] = 0.04 * off;
    if (name_in(name, {"spine", "neck"})) dirs[2].offsets[j] = 0.06 * off;
    if (name_in(name, {"knee", "ankle"})) dirs[3].offsets[j] = 0.05 * off;
    if (name_in(name, {"elbow", "wrist"})) dirs[4].offsets[j] = 0.05 * off;
    if (name_in(name, {"shoulder"})) dirs[5].offsets[j] = Vec3(off.x() > 0 ? 0.02 : -0.02, 0.0, 0.0);
    if (name_in(name, {"hip"})) dirs[6].offsets[j] = Vec3(off.x() > 0 ? 0.015 : -0.015, 0.0, 0.0);
  }
  return dirs;
}

Points to_points(const Eigen::Ref<const Eigen::VectorXd>& flat) {
  Points p(flat.size() / 3, 3);
  for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i) = flat.segment<3>(3 * i).transpose();
  return p;
}

struct JointTransforms {
  std::vector<Mat3> rotation;     // global rotation of each joint
  std::vector<Vec3> translation;  // global position of each joint (posed, before global translation)
  std::vector<Mat3> local;        // local rotations
};

void check_inputs(const BodyTemplate& tmpl, const ShapeParams& beta) {
  require(beta.size() == tmpl.shape_count(), ErrorCode::kShapeMismatch,
          "pose_body: beta has " + std::to_string(beta.size()) + " coefficients, template expects " +
              std::to_string(tmpl.shape_count()));
  require(beta.beta.allFinite(), ErrorCode::kInvalidInput, "pose_body: non-finite beta");
}

Points rest_joints_for(const BodyTemplate& tmpl, const Points& shaped) {
  return tmpl.joint_regressor * shaped;
}

JointTransforms forward_kinematics(const BodyTemplate& tmpl, std::span<const Mat3> rotations, const Points& joints,
                                   const std::vector<int>& order) {
  const int n = tmpl.joint_count();
  JointTransforms t;
  t.rotation.resize(n);
  t.translation.resize(n);
  t.local.assign(rotations.begin(), rotations.end());
  for (int j : order) {
    const int p = tmpl.parents[j];
    const Vec3 rest = joints.row(j).transpose();
    if (p < 0) {
      t.rotation[j] = rotations[j];
      t.translation[j] = rest;
    } else {
      t.rotation[j] = t.rotation[p] * rotations[j];
      t.translation[j] = t.rotation[p] * (rest - joints.row(p).transpose()) + t.translation[p];
    }
  }
  return t;
}

PosedMesh skin(const BodyTemplate& tmpl, const Points& shaped, const Points& joints, const JointTransforms& fk,
               const Vec3& translation) {
  const int n = tmpl.joint_count();
  std::vector<Vec3> offset(n);
  for (int j = 0; j < n; ++j) offset[j] = fk.translation[j] - fk.rotation[j] * joints.row(j).transpose();

  PosedMesh mesh;
  mesh.vertices.resize(tmpl.vertex_count(), 3);
  for (int i = 0; i < tmpl.vertex_count(); ++i) {
    const Vec3 v = shaped.row(i).transpose();
    Vec3 acc = Vec3::Zero();
    for (int j = 0; j < n; ++j) {
      const double w = tmpl.skin_weights(i, j);
      if (w != 0.0) acc += w * (fk.rotation[j] * v + offset[j]);
    }
    mesh.vertices.row(i) = (acc + translation).transpose();
  }
  mesh.joints.resize(n, 3);
  for (int j = 0; j < n; ++j) mesh.joints.row(j) = (fk.translation[j] + translation).transpose();
  mesh.faces = tmpl.faces;
  mesh.part_labels = tmpl.part_labels;
  return mesh;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view part_name(int label) {
  static constexpr std::array<std::string_view, kPartCount + 1> kNames = {
      "background",      "head",           "torso",           "left_upper_arm", "right_upper_arm",
      "left_lower_arm",  "right_lower_arm", "left_hand",      "right_hand",     "left_upper_leg",
      "right_upper_leg", "left_lower_leg", "right_lower_leg", "left_foot",      "right_foot"};
  return label >= 0 && label <= kPartCount ? kNames[label] : "invalid";
}

int mirror_part(int label) {
  if (label >= kLeftUpperArm && label <= kRightFoot) {
    return label % 2 == 1 ? label + 1 : label - 1;
  }
  return label;
}

bool is_arm_part(int label) { return label >= kLeftUpperArm && label <= kRightHand; }
bool is_leg_part(int label) { return label >= kLeftUpperLeg && label <= kRightFoot; }

PoseParams PoseParams::identity(int joint_count) {
  PoseParams p;
  p.axis_angles = Points::Zero(joint_count, 3);
  return p;
}

int BodyTemplate::joint_index(std::string_view name) const {
  for (std::size_t j = 0; j < joint_names.size(); ++j) {
    if (joint_names[j] == name) return static_cast<int>(j);
  }
  return -1;
}

std::vector<int> BodyTemplate::topological_order() const {
  const int n = joint_count();
  std::vector<std::vector<int>> children(n);
  int root = -1;
  for (int j = 0; j < n; ++j) {
    const int p = parents[j];
    if (p < 0) {
      require(root < 0, ErrorCode::kInvalidConfiguration, "joint tree has more than one root");
      root = j;
    } else {
      require(p < n, ErrorCode::kInvalidConfiguration, "joint parent index out of range");
      children[p].push_back(j);
    }
  }
  require(root >= 0, ErrorCode::kInvalidConfiguration, "joint tree has no root");
  std::vector<int> order;
  order.reserve(n);
  std::vector<int> stack{root};
  while (!stack.empty()) {
    const int j = stack.back();
    stack.pop_back();
    order.push_back(j);
    for (auto it = children[j].rbegin(); it != children[j].rend(); ++it) stack.push_back(*it);
  }
  require(static_cast<int>(order.size()) == n, ErrorCode::kInvalidConfiguration, "joint tree is not connected/acyclic");
  return order;
}

void BodyTemplate::validate() const {
  const auto v = vertex_count();
  const auto j = joint_count();
  require(v > 0 && face_count() > 0 && j > 0, ErrorCode::kInvalidConfiguration, "empty template");
  require(rest_joints.rows() == j, ErrorCode::kInvalidConfiguration, "rest_joints row count != joint count");
  require(skin_weights.rows() == v && skin_weights.cols() == j, ErrorCode::kInvalidConfiguration,
          "skin_weights must be V x J");
  require(shape_basis.rows() == 3 * v, ErrorCode::kInvalidConfiguration, "shape_basis must have 3V rows");
  require(joint_regressor.rows() == j && joint_regressor.cols() == v, ErrorCode::kInvalidConfiguration,
          "joint_regressor must be J x V");
  require(static_cast<int>(part_labels.size()) == face_count(), ErrorCode::kInvalidConfiguration,
          "one part label per face required");
  require(joint_names.empty() || static_cast<int>(joint_names.size()) == j, ErrorCode::kInvalidConfiguration,
          "joint_names length != joint count");
  require(vertices.allFinite() && shape_basis.allFinite() && skin_weights.allFinite(), ErrorCode::kInvalidConfiguration,
          "non-finite template data");
  for (Eigen::Index i = 0; i < v; ++i) {
    require((skin_weights.row(i).array() >= 0.0).all(), ErrorCode::kInvalidConfiguration, "negative skin weight");
    require(std::abs(skin_weights.row(i).sum() - 1.0) <= 1e-9, ErrorCode::kInvalidConfiguration,
            "skin weights do not sum to one at vertex " + std::to_string(i));
  }
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    for (int k = 0; k < 3; ++k) {
      require(faces(f, k) >= 0 && faces(f, k) < v, ErrorCode::kInvalidConfiguration, "face index out of range");
    }
  }
  std::set<int> seen;
  for (int label : part_labels) {
    require(label >= 1 && label <= kPartCount, ErrorCode::kInvalidConfiguration, "face part label outside [1, 14]");
    seen.insert(label);
  }
  require(static_cast<int>(seen.size()) == kPartCount, ErrorCode::kInvalidConfiguration,
          "every part label 1..14 must occur on at least one face");
  (void)topological_order();
}

BodyTemplate build_toy_template(int joint_count, int detail, std::uint64_t seed) {
  require(joint_count >= kMinJointCount, ErrorCode::kInvalidConfiguration,
          "toy body needs at least " + std::to_string(kMinJointCount) + " joints to realize 14 parts, got " +
              std::to_string(joint_count));
  require(detail >= 1, ErrorCode::kInvalidConfiguration, "detail must be >= 1");

  ToyBody body = toy_skeleton(joint_count);
  // Per-seed proportions: small multiplicative jitter on lengths and radii.
  Rng rng = derive_rng(seed, {0x746f79ULL});
  for (auto& j : body.joints) j.offset *= 1.0 + uniform(rng, -0.04, 0.04);
  for (auto& b : body.bones) {
    b.tip *= 1.0 + uniform(rng, -0.04, 0.04);
    const double s = 1.0 + uniform(rng, -0.05, 0.05);
    for (auto& r : b.radii) r *= s;
  }

  const ToyMesher mesher(body, detail);
  const ToyDials base = dials_of(body);
  BodyTemplate t;
  t.vertices = mesher.vertices(base);
  t.faces = mesher.faces(t.part_labels);
  for (const auto& j : body.joints) {
    t.parents.push_back(j.parent);
    t.joint_names.push_back(j.name);
  }
  t.skin_weights = mesher.skin_weights();
  t.joint_regressor = mesher.joint_regressor();
  t.rest_joints = t.joint_regressor * t.vertices;

  const auto directions = shape_directions(body, base);
  t.shape_basis.resize(3 * t.vertex_count(), static_cast<Eigen::Index>(directions.size()));
  for (std::size_t s = 0; s < directions.size(); ++s) {
    const Points displaced = mesher.vertices(add(base, directions[s]));
    const Points delta = displaced - t.vertices;
    t.shape_basis.col(static_cast<Eigen::Index>(s)) = Eigen::Map<const Eigen::VectorXd>(delta.data(), delta.size());
  }
  t.validate();
  return t;
}

BodyTemplate scale_template(const BodyTemplate& tmpl, double factor) {
  BodyTemplate out = tmpl;
  out.vertices *= factor;
  out.rest_joints *= factor;
  out.shape_basis *= factor;
  return out;
}

BodyTemplate height_normalize(const BodyTemplate& tmpl) {
  require(tmpl.vertex_count() > 0, ErrorCode::kDegenerateGeometry, "height_normalize: empty template");
  const double height = tmpl.vertices.col(1).maxCoeff() - tmpl.vertices.col(1).minCoeff();
  require(std::isfinite(height) && height > 1e-12, ErrorCode::kDegenerateGeometry,
          "height_normalize: template has no vertical extent");
  return scale_template(tmpl, 1.0 / height);
}

Points blend_shape(const BodyTemplate& tmpl, const ShapeParams& beta) {
  check_inputs(tmpl, beta);
  const Eigen::VectorXd offsets = tmpl.shape_basis * beta.beta;
  return tmpl.vertices + to_points(offsets);
}

PosedMesh pose_body(const BodyTemplate& tmpl, const ShapeParams& beta, std::span<const Mat3> rotations,
                    const Vec3& translation) {
  require(static_cast<int>(rotations.size()) == tmpl.joint_count(), ErrorCode::kShapeMismatch,
          "pose_body: rotation count != joint count");
  require(translation.allFinite(), ErrorCode::kInvalidInput, "pose_body: non-finite translation");
  for (const auto& r : rotations) require(r.allFinite(), ErrorCode::kInvalidInput, "pose_body: non-finite rotation");
  const Points shaped = blend_shape(tmpl, beta);
  const Points joints = rest_joints_for(tmpl, shaped);
  const auto fk = forward_kinematics(tmpl, rotations, joints, tmpl.topological_order());
  return skin(tmpl, shaped, joints, fk, translation);
}

PosedMesh pose_body(const BodyTemplate& tmpl, const ShapeParams& beta, const PoseParams& pose) {
  require(pose.joint_count() == tmpl.joint_count(), ErrorCode::kShapeMismatch,
          "pose_body: pose has " + std::to_string(pose.joint_count()) + " joints, template has " +
              std::to_string(tmpl.joint_count()));
  require(pose.axis_angles.allFinite(), ErrorCode::kInvalidInput, "pose_body: non-finite theta");
  std::vector<Mat3> rotations(tmpl.joint_count());
  for (int j = 0; j < tmpl.joint_count(); ++j) rotations[j] = rodrigues(pose.axis_angles.row(j).transpose());
  return pose_body(tmpl, beta, rotations, pose.translation);
}

PoseGradient pose_body_vjp(const BodyTemplate& tmpl, const ShapeParams& beta, const PoseParams& pose,
                           const Points& grad_vertices, const Points& grad_joints) {
  const int n = tmpl.joint_count();
  const int v = tmpl.vertex_count();
  require(pose.joint_count() == n, ErrorCode::kShapeMismatch, "pose_body_vjp: joint count mismatch");
  const bool has_gv = grad_vertices.rows() > 0;
  const bool has_gj = grad_joints.rows() > 0;
  require(!has_gv || grad_vertices.rows() == v, ErrorCode::kShapeMismatch, "pose_body_vjp: grad_vertices rows != V");
  require(!has_gj || grad_joints.rows() == n, ErrorCode::kShapeMismatch, "pose_body_vjp: grad_joints rows != J");

  // Forward pass, keeping intermediates.
  std::vector<Mat3> local(n);
  for (int j = 0; j < n; ++j) local[j] = rodrigues(pose.axis_angles.row(j).transpose());
  const Points shaped = blend_shape(tmpl, beta);
  const Points joints = rest_joints_for(tmpl, shaped);
  const auto order = tmpl.topological_order();
  const auto fk = forward_kinematics(tmpl, local, joints, order);

  PoseGradient g;
  g.axis_angles = Points::Zero(n, 3);
  std::vector<Mat3> g_global_rot(n, Mat3::Zero());
  std::vector<Vec3> g_global_pos(n, Vec3::Zero());
  Points g_shaped = Points::Zero(v, 3);
  Points g_rest_joints = Points::Zero(n, 3);

  // vertex_i = sum_j w_ij (Rg_j v_i + tg_j - Rg_j J_j) + T
  if (has_gv) {
    for (int i = 0; i < v; ++i) {
      const Vec3 gv = grad_vertices.row(i).transpose();
      const Vec3 vs = shaped.row(i).transpose();
      g.translation += gv;
      for (int j = 0; j < n; ++j) {
        const double w = tmpl.skin_weights(i, j);
        if (w == 0.0) continue;
        const Vec3 wg = w * gv;
        g_global_rot[j] += wg * (vs - joints.row(j).transpose()).transpose();
        g_global_pos[j] += wg;
        g_shaped.row(i) += (fk.rotation[j].transpose() * wg).transpose();
        g_rest_joints.row(j) -= (fk.rotation[j].transpose() * wg).transpose();
      }
    }
  }
  if (has_gj) {
    for (int j = 0; j < n; ++j) {
      const Vec3 gj = grad_joints.row(j).transpose();
      g.translation += gj;
      g_global_pos[j] += gj;
    }
  }

  // Kinematic chain, children before parents.
  std::vector<Mat3> g_local(n, Mat3::Zero());
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const int j = *it;
    const int p = tmpl.parents[j];
    if (p < 0) {
      g_local[j] += g_global_rot[j];
      g_rest_joints.row(j) += g_global_pos[j].transpose();
      continue;
    }
    const Vec3 bone = (joints.row(j) - joints.row(p)).transpose();
    g_global_rot[p] += g_global_rot[j] * local[j].transpose();
    g_local[j] += fk.rotation[p].transpose() * g_global_rot[j];
    g_global_rot[p] += g_global_pos[j] * bone.transpose();
    const Vec3 g_bone = fk.rotation[p].transpose() * g_global_pos[j];
    g_rest_joints.row(j) += g_bone.transpose();
    g_rest_joints.row(p) -= g_bone.transpose();
    g_global_pos[p] += g_global_pos[j];
  }
  for (int j = 0; j < n; ++j) {
    g.axis_angles.row(j) = rodrigues_vjp(pose.axis_angles.row(j).transpose(), g_local[j]).transpose();
  }

  // joints = regressor * shaped; shaped = vertices + basis * beta.
  g_shaped += tmpl.joint_regressor.transpose() * g_rest_joints;
  const Eigen::Map<const Eigen::VectorXd> flat(g_shaped.data(), g_shaped.size());
  g.beta = tmpl.shape_basis.transpose() * flat;
  return g;
}

}  // namespace repcycle::body
