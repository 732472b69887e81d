#include "skelfuse/types.hpp"

#include <algorithm>
#include <set>

#include "skelfuse/error.hpp"

namespace skelfuse {

void validate_action(const Action& action, int expected_joints) {
  if (action.id.empty()) {
    throw DataError("action with empty id");
  }
  if (action.poses.empty()) {
    throw DataError("empty action '" + action.id + "'");
  }
  if (!(action.fps >= 0.0) || !std::isfinite(action.fps)) {
    throw DataError("action '" + action.id + "' has invalid fps");
  }
  const std::size_t j = action.poses.front().joints.size();
  if (j == 0) {
    throw DataError("action '" + action.id + "' has poses without joints");
  }
  if (expected_joints >= 0 && j != static_cast<std::size_t>(expected_joints)) {
    throw DataError("action '" + action.id + "' has " + std::to_string(j) +
                    " joints, expected " + std::to_string(expected_joints));
  }
  for (const Pose& pose : action.poses) {
    if (pose.joints.size() != j) {
      throw DataError("action '" + action.id + "' mixes joint counts");
    }
    for (const Vec3& p : pose.joints) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
        throw DataError("action '" + action.id + "' has non-finite coordinates");
      }
    }
  }
}

void validate_body_model(const BodyModelDef& model) {
  const int j = model.joint_count();
  if (j < 1) throw DataError("body model has no joints");
  auto in_range = [j](int idx) { return idx >= 0 && idx < j; };
  if (!in_range(model.root_index)) throw DataError("body model root index out of range");
  if (!in_range(model.left_hip_index) || !in_range(model.right_hip_index)) {
    throw DataError("body model hip index out of range");
  }
  if (model.left_hip_index == model.right_hip_index) {
    throw DataError("body model left and right hip must differ");
  }
  if (!in_range(model.thighbone.first) || !in_range(model.thighbone.second)) {
    throw DataError("body model thighbone index out of range");
  }
  if (model.thighbone.first == model.thighbone.second) {
    throw DataError("body model thighbone endpoints must differ");
  }
  for (const auto& chain : model.height_chains) {
    if (chain.size() < 2) throw DataError("height chain needs at least two joints");
    for (int idx : chain) {
      if (!in_range(idx)) throw DataError("height chain index out of range");
    }
  }
  for (const auto& [name, subset] : model.subsets) {
    std::set<int> seen;
    for (int idx : subset) {
      if (!in_range(idx)) {
        throw DataError("subset '" + name + "' index out of range");
      }
      if (!seen.insert(idx).second) {
        throw DataError("subset '" + name + "' repeats an index");
      }
    }
    if (seen.count(model.root_index) == 0) {
      throw DataError("subset '" + name + "' omits the root joint");
    }
  }
}

void validate_dataset(const Dataset& dataset) {
  validate_body_model(dataset.body_model);
  std::set<std::string> ids;
  std::set<std::string> classes(dataset.classes.begin(), dataset.classes.end());
  for (const Action& action : dataset.actions) {
    validate_action(action, dataset.body_model.joint_count());
    if (!ids.insert(action.id).second) {
      throw DataError("duplicate action id '" + action.id + "'");
    }
    if (action.class_label && classes.count(*action.class_label) == 0) {
      throw DataError("action '" + action.id + "' has unlisted class '" +
                      *action.class_label + "'");
    }
  }
}

}  // namespace skelfuse
