#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace repcycle::body {

using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

inline constexpr int kPartCount = 14;
inline constexpr int kDefaultShapeCount = 10;
inline constexpr int kMinJointCount = 14;

// Part labels used by faces, label maps and the IoU taxonomy. 0 is background.
// "Left" is the body's own left, which is +x in the rest pose.
enum Part : int {
  kBackground = 0,
  kHead = 1,
  kTorso = 2,
  kLeftUpperArm = 3,
  kRightUpperArm = 4,
  kLeftLowerArm = 5,
  kRightLowerArm = 6,
  kLeftHand = 7,
  kRightHand = 8,
  kLeftUpperLeg = 9,
  kRightUpperLeg = 10,
  kLeftLowerLeg = 11,
  kRightLowerLeg = 12,
  kLeftFoot = 13,
  kRightFoot = 14,
};

std::string_view part_name(int label);
// Left/right counterpart of a label; head, torso and background map to themselves.
int mirror_part(int label);
bool is_arm_part(int label);
bool is_leg_part(int label);

struct ShapeParams {
  Eigen::VectorXd beta;

  static ShapeParams zeros(int count) { return {Eigen::VectorXd::Zero(count)}; }
  int size() const { return static_cast<int>(beta.size()); }
};

// One axis-angle row per joint (row 0 is the root) plus a global translation
// in normalized-height units.
struct PoseParams {
  Points axis_angles;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static PoseParams identity(int joint_count);
  int joint_count() const { return static_cast<int>(axis_angles.rows()); }
};

// Rest-pose articulated mesh. shape_basis is (3V x S): row 3*i + k holds the
// k-th coordinate offset of vertex i per unit of each shape coefficient.
// joint_regressor (J x V, rows summing to one) recovers joint centers from
// (shape-blended) vertices; rest_joints == joint_regressor * vertices.
struct BodyTemplate {
  Points vertices;
  Faces faces;
  std::vector<int> parents;
  Points rest_joints;
  Eigen::MatrixXd skin_weights;
  Eigen::MatrixXd shape_basis;
  std::vector<int> part_labels;
  Eigen::MatrixXd joint_regressor;
  std::vector<std::string> joint_names;

  int vertex_count() const { return static_cast<int>(vertices.rows()); }
  int face_count() const { return static_cast<int>(faces.rows()); }
  int joint_count() const { return static_cast<int>(parents.size()); }
  int shape_count() const { return static_cast<int>(shape_basis.cols()); }

  // Index of the named joint or -1.
  int joint_index(std::string_view name) const;
  // Parents-before-children ordering of the joints.
  std::vector<int> topological_order() const;
  // Throws kInvalidConfiguration when any structural invariant is broken.
  void validate() const;
};

struct PosedMesh {
  Points vertices;
  Points joints;
  Faces faces;
  std::vector<int> part_labels;
};

// Procedural capsule body with 14 part regions and a 10-component shape
// basis. Throws kInvalidConfiguration when joint_count < kMinJointCount or
// detail < 1.
BodyTemplate build_toy_template(int joint_count = 16, int detail = 2, std::uint64_t seed = 0);

// Scales the template about the origin so the rest-pose vertical (y) extent is
// exactly one. Throws kDegenerateGeometry for a flat template.
BodyTemplate height_normalize(const BodyTemplate& tmpl);

// Returns a copy with all lengths multiplied by factor.
BodyTemplate scale_template(const BodyTemplate& tmpl, double factor);

// Shape-blended rest vertices (V x 3).
Points blend_shape(const BodyTemplate& tmpl, const ShapeParams& beta);

PosedMesh pose_body(const BodyTemplate& tmpl, const ShapeParams& beta, const PoseParams& pose);

// Same as pose_body with per-joint rotation matrices (index 0 = root).
PosedMesh pose_body(const BodyTemplate& tmpl, const ShapeParams& beta,
                    std::span<const Eigen::Matrix3d> rotations, const Eigen::Vector3d& translation);

inline const Points& joint_locations(const PosedMesh& mesh) { return mesh.joints; }

struct PoseGradient {
  Eigen::VectorXd beta;
  Points axis_angles;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

// Reverse-mode derivative of pose_body: given dL/dvertices and dL/djoints
// returns dL/d(beta, theta, translation). Either upstream may be empty.
PoseGradient pose_body_vjp(const BodyTemplate& tmpl, const ShapeParams& beta, const PoseParams& pose,
                           const Points& grad_vertices, const Points& grad_joints);

}  // namespace repcycle::body
