#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace skelfuse {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }
  double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

// One frame of tracked joint positions.
struct Pose {
  std::vector<Vec3> joints;
};

// An identified, optionally labelled sequence of poses.
// fps == 0 is a sentinel meaning "non-uniform sampling" (produced by the
// key-pose augmentation); captured data always carries fps > 0.
struct Action {
  std::string id;
  std::optional<std::string> class_label;
  double fps = 0.0;
  std::vector<Pose> poses;

  std::size_t length() const { return poses.size(); }
  std::size_t joint_count() const {
    return poses.empty() ? 0 : poses.front().joints.size();
  }
};

// Skeleton topology: which joints exist, which ones anchor the
// normalizations, and which named subsets the body-model augmentation may
// select.
struct BodyModelDef {
  std::vector<std::string> joint_names;
  int root_index = 0;
  int left_hip_index = 0;
  int right_hip_index = 0;
  std::pair<int, int> thighbone{0, 0};  // (hip, knee)
  std::vector<std::vector<int>> height_chains;
  std::map<std::string, std::vector<int>> subsets;

  int joint_count() const { return static_cast<int>(joint_names.size()); }
};

struct Dataset {
  std::vector<Action> actions;
  std::vector<std::string> classes;  // sorted distinct labels
  BodyModelDef body_model;
};

// Two-fold assignment, action id -> fold in {1, 2}.
struct FoldSplit {
  std::map<std::string, int> assignment;
};

// Throw DataError on violated invariants. expected_joints < 0 skips the
// joint-count comparison.
void validate_action(const Action& action, int expected_joints = -1);
void validate_body_model(const BodyModelDef& model);
void validate_dataset(const Dataset& dataset);

}  // namespace skelfuse
