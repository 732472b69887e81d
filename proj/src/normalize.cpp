#include "skelfuse/normalize.hpp"

#include <cmath>

#include "skelfuse/error.hpp"

namespace skelfuse {

namespace {

constexpr double kDegenerateHipProjection = 1e-9;

struct YRotation {
  double c = 1.0;
  double s = 0.0;
};

Vec3 rotate_about_root(const Vec3& p, const Vec3& root, const YRotation& r) {
  const Vec3 rel = p - root;
  return {root.x + r.c * rel.x + r.s * rel.z, root.y + rel.y,
          root.z - r.s * rel.x + r.c * rel.z};
}

}  // namespace

Action normalize_position(const Action& action, const BodyModelDef& model) {
  const auto root = static_cast<std::size_t>(model.root_index);
  Action out = action;
  for (Pose& pose : out.poses) {
    const Vec3 origin = pose.joints.at(root);
    for (Vec3& p : pose.joints) p = p - origin;
    pose.joints[root] = {0.0, 0.0, 0.0};
  }
  return out;
}

Action normalize_orientation(const Action& action, const BodyModelDef& model,
                             OrientationMode mode,
                             std::vector<std::string>* warnings) {
  const auto root = static_cast<std::size_t>(model.root_index);
  const auto lhip = static_cast<std::size_t>(model.left_hip_index);
  const auto rhip = static_cast<std::size_t>(model.right_hip_index);

  Action out = action;
  YRotation rot;  // carried over degenerate poses; identity before the first
  for (std::size_t i = 0; i < out.poses.size(); ++i) {
    Pose& pose = out.poses[i];
    const Vec3 hip_line = pose.joints.at(rhip) - pose.joints.at(lhip);
    const double d = std::hypot(hip_line.x, hip_line.z);
    if (d < kDegenerateHipProjection) {
      if (warnings) {
        warnings->push_back("action '" + action.id + "' pose " +
                            std::to_string(i) +
                            ": hips coincide horizontally, reusing previous rotation");
      }
    } else {
      rot = {hip_line.x / d, hip_line.z / d};
    }
    if (mode == OrientationMode::WholeAction && i == 0) break;
    const Vec3 origin = pose.joints.at(root);
    for (Vec3& p : pose.joints) p = rotate_about_root(p, origin, rot);
  }
  if (mode == OrientationMode::WholeAction) {
    for (Pose& pose : out.poses) {
      const Vec3 origin = pose.joints.at(root);
      for (Vec3& p : pose.joints) p = rotate_about_root(p, origin, rot);
    }
  }
  return out;
}

double skeleton_height(const Action& action, const BodyModelDef& model) {
  if (model.height_chains.empty()) {
    throw DataError("body model has no height chain");
  }
  double total = 0.0;
  for (const Pose& pose : action.poses) {
    double pose_height = 0.0;
    for (const auto& chain : model.height_chains) {
      double chain_len = 0.0;
      for (std::size_t t = 1; t < chain.size(); ++t) {
        chain_len += (pose.joints.at(static_cast<std::size_t>(chain[t])) -
                      pose.joints.at(static_cast<std::size_t>(chain[t - 1])))
                         .norm();
      }
      pose_height += chain_len;
    }
    total += pose_height / static_cast<double>(model.height_chains.size());
  }
  return total / static_cast<double>(action.poses.size());
}

Action normalize_size(const Action& action, const BodyModelDef& model,
                      double target_height) {
  if (!(target_height > 0.0)) throw DataError("target height must be positive");
  const double height = skeleton_height(action, model);
  if (height == 0.0) {
    throw DataError("skeleton height is zero in action '" + action.id + "'");
  }
  const double scale = target_height / height;
  const auto root = static_cast<std::size_t>(model.root_index);
  Action out = action;
  for (Pose& pose : out.poses) {
    const Vec3 origin = pose.joints.at(root);
    for (Vec3& p : pose.joints) p = origin + (p - origin) * scale;
  }
  return out;
}

}  // namespace skelfuse
