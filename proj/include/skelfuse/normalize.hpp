#pragma once

#include <string>
#include <vector>

#include "skelfuse/types.hpp"

namespace skelfuse {

enum class NormalizationKind { None, Position, Full };  // "none" | "p" | "pos"

struct NormalizationVariant {
  NormalizationKind kind = NormalizationKind::None;
  double target_height = 1.75;  // used by the size step of Full
};

// Orientation can rotate every pose independently (default) or rotate the
// whole action by the first pose's correction, which preserves turning
// motion. Both are exposed; per-pose is the default behavior.
enum class OrientationMode { PerPose, WholeAction };

// Translate every pose so the root joint sits exactly at the origin.
Action normalize_position(const Action& action, const BodyModelDef& model);

// Rotate each pose about the vertical (y) axis around the root joint so the
// horizontal projection of the left->right hip vector points along +x.
// y-coordinates are untouched. A pose whose hips project to (almost) the
// same horizontal point keeps the previous pose's rotation (identity for the
// first pose); such poses are reported through `warnings` when provided.
Action normalize_orientation(const Action& action, const BodyModelDef& model,
                             OrientationMode mode = OrientationMode::PerPose,
                             std::vector<std::string>* warnings = nullptr);

// Uniformly scale all joints about the root of each pose so the skeleton
// height matches target_height. Height is the mean over poses of the summed
// bone lengths along each configured height chain, averaged across chains.
Action normalize_size(const Action& action, const BodyModelDef& model,
                      double target_height);

double skeleton_height(const Action& action, const BodyModelDef& model);

}  // namespace skelfuse
