#include "skelfuse/augment.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "skelfuse/core_ops.hpp"
#include "skelfuse/error.hpp"
#include "skelfuse/rng.hpp"

namespace skelfuse {

void validate_augmentation(const AugmentationSpec& spec) {
  switch (spec.kind) {
    case AugmentationKind::None:
      break;
    case AugmentationKind::Crop:
      if (!(spec.range_pct >= 0.0 && spec.range_pct < 100.0)) {
        throw DataError("crop range must be in [0, 100)");
      }
      break;
    case AugmentationKind::Noise:
      if (!(spec.range_pct >= 0.0 && spec.range_pct <= 100.0)) {
        throw DataError("noise range must be in [0, 100]");
      }
      break;
    case AugmentationKind::BodyModel:
      if (spec.subset_name.empty()) throw DataError("body-model subset name missing");
      break;
    case AugmentationKind::KeyPose:
      if (!(spec.dist >= 0.0)) throw DataError("key-pose dist must be non-negative");
      break;
  }
}

Action crop(const Action& action, double range_pct) {
  if (!(range_pct >= 0.0 && range_pct < 100.0)) {
    throw DataError("crop range must be in [0, 100)");
  }
  const std::size_t l = action.poses.size();
  const auto cut = static_cast<std::size_t>(
      std::floor(range_pct / 200.0 * static_cast<double>(l)));
  if (2 * cut >= l) {
    throw DataError("crop of " + std::to_string(range_pct) + "% leaves no poses in '" +
                    action.id + "'");
  }
  Action out;
  out.id = action.id;
  out.class_label = action.class_label;
  out.fps = action.fps;
  out.poses.assign(action.poses.begin() + static_cast<std::ptrdiff_t>(cut),
                   action.poses.end() - static_cast<std::ptrdiff_t>(cut));
  return out;
}

Action add_noise(const Action& action, double range_pct,
                 const BodyModelDef& model, std::uint64_t seed) {
  if (range_pct == 0.0) return action;
  const double bound = range_pct / 100.0 * thighbone_length(action, model);
  Rng rng(seed);
  Action out = action;
  for (Pose& pose : out.poses) {
    for (Vec3& p : pose.joints) {
      p.x += rng.uniform(-bound, bound);
      p.y += rng.uniform(-bound, bound);
      p.z += rng.uniform(-bound, bound);
    }
  }
  return out;
}

std::pair<Action, BodyModelDef> simplify_body(const Action& action,
                                              const BodyModelDef& model,
                                              const std::string& subset_name) {
  const auto it = model.subsets.find(subset_name);
  if (it == model.subsets.end()) {
    throw DataError("unknown body-model subset '" + subset_name + "'");
  }
  const std::vector<int>& subset = it->second;

  std::map<int, int> new_index;  // old joint index -> new joint index
  for (std::size_t k = 0; k < subset.size(); ++k) {
    new_index[subset[k]] = static_cast<int>(k);
  }
  auto require = [&](int old_idx, const char* what) {
    const auto found = new_index.find(old_idx);
    if (found == new_index.end()) {
      throw DataError("subset '" + subset_name + "' omits the " + std::string(what) +
                      " joint; downstream transforms would be undefined");
    }
    return found->second;
  };

  BodyModelDef induced;
  induced.joint_names.reserve(subset.size());
  for (int old_idx : subset) {
    induced.joint_names.push_back(model.joint_names.at(static_cast<std::size_t>(old_idx)));
  }
  induced.root_index = require(model.root_index, "root");
  induced.left_hip_index = require(model.left_hip_index, "left hip");
  induced.right_hip_index = require(model.right_hip_index, "right hip");
  induced.thighbone = {require(model.thighbone.first, "thighbone hip"),
                       require(model.thighbone.second, "thighbone knee")};
  for (const auto& chain : model.height_chains) {
    std::vector<int> kept;
    for (int old_idx : chain) {
      const auto found = new_index.find(old_idx);
      if (found != new_index.end()) kept.push_back(found->second);
    }
    if (kept.size() >= 2) induced.height_chains.push_back(std::move(kept));
  }
  for (const auto& [name, joints] : model.subsets) {
    std::vector<int> remapped;
    remapped.reserve(joints.size());
    bool contained = true;
    for (int old_idx : joints) {
      const auto found = new_index.find(old_idx);
      if (found == new_index.end()) {
        contained = false;
        break;
      }
      remapped.push_back(found->second);
    }
    if (contained) induced.subsets[name] = std::move(remapped);
  }
  validate_body_model(induced);

  Action out;
  out.id = action.id;
  out.class_label = action.class_label;
  out.fps = action.fps;
  out.poses.reserve(action.poses.size());
  for (const Pose& pose : action.poses) {
    Pose reduced;
    reduced.joints.reserve(subset.size());
    for (int old_idx : subset) {
      reduced.joints.push_back(pose.joints.at(static_cast<std::size_t>(old_idx)));
    }
    out.poses.push_back(std::move(reduced));
  }
  return {std::move(out), std::move(induced)};
}

Action key_poses(const Action& action, double dist) {
  if (!(dist >= 0.0)) throw DataError("key-pose dist must be non-negative");
  Action out;
  out.id = action.id;
  out.class_label = action.class_label;
  out.fps = 0.0;  // non-uniform sampling sentinel
  if (action.poses.empty()) return out;
  out.poses.push_back(action.poses.front());
  const Pose* last_kept = &action.poses.front();
  for (std::size_t i = 1; i < action.poses.size(); ++i) {
    if (pose_dissimilarity(action.poses[i], *last_kept) > dist) {
      out.poses.push_back(action.poses[i]);
      last_kept = &action.poses[i];
    }
  }
  return out;
}

}  // namespace skelfuse
