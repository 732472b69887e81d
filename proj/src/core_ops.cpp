#include "skelfuse/core_ops.hpp"

#include <algorithm>
#include <map>

#include "skelfuse/error.hpp"
#include "skelfuse/rng.hpp"

namespace skelfuse {

Action downsample(const Action& action, std::size_t factor) {
  if (factor == 0) throw DataError("downsample factor must be >= 1");
  Action out;
  out.id = action.id;
  out.class_label = action.class_label;
  out.fps = action.fps / static_cast<double>(factor);
  out.poses.reserve((action.poses.size() + factor - 1) / factor);
  for (std::size_t i = 0; i < action.poses.size(); i += factor) {
    out.poses.push_back(action.poses[i]);
  }
  return out;
}

double pose_dissimilarity(const Pose& a, const Pose& b) {
  if (a.joints.size() != b.joints.size()) {
    throw DataError("pose dissimilarity: joint counts differ");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.joints.size(); ++i) {
    sum += (a.joints[i] - b.joints[i]).norm();
  }
  return sum;
}

double thighbone_length(const Action& action, const BodyModelDef& model) {
  const auto [hip, knee] = model.thighbone;
  const std::size_t j = action.joint_count();
  if (hip < 0 || knee < 0 || static_cast<std::size_t>(hip) >= j ||
      static_cast<std::size_t>(knee) >= j) {
    throw DataError("thighbone indices out of range for action '" + action.id + "'");
  }
  double sum = 0.0;
  for (const Pose& pose : action.poses) {
    sum += (pose.joints[static_cast<std::size_t>(hip)] -
            pose.joints[static_cast<std::size_t>(knee)])
               .norm();
  }
  const double mean = sum / static_cast<double>(action.poses.size());
  if (mean == 0.0) {
    throw DataError("degenerate thighbone in action '" + action.id + "'");
  }
  return mean;
}

FoldSplit balanced_two_fold_split(const Dataset& dataset, std::uint64_t seed) {
  std::map<std::string, std::vector<std::string>> by_class;
  for (const Action& action : dataset.actions) {
    if (!action.class_label) {
      throw DataError("cannot split: action '" + action.id + "' is unlabeled");
    }
    by_class[*action.class_label].push_back(action.id);
  }
  if (by_class.empty()) throw DataError("cannot split an empty dataset");

  Rng rng(mix_seed(seed, "fold-split"));
  FoldSplit split;
  int start_fold = 1;
  for (auto& [label, ids] : by_class) {
    std::sort(ids.begin(), ids.end());
    rng.shuffle(ids);
    int fold = start_fold;
    for (const std::string& id : ids) {
      split.assignment.emplace(id, fold);
      fold = 3 - fold;
    }
    if (ids.size() % 2 == 1) start_fold = 3 - start_fold;
  }
  return split;
}

}  // namespace skelfuse
