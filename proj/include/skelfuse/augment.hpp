#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "skelfuse/types.hpp"

namespace skelfuse {

enum class AugmentationKind { None, Crop, Noise, BodyModel, KeyPose };

// Parameters are meaningful only for the matching kind; the JSON layer
// rejects specs that carry parameters for a different kind.
struct AugmentationSpec {
  AugmentationKind kind = AugmentationKind::None;
  double range_pct = 0.0;        // Crop, Noise
  std::string subset_name;       // BodyModel
  double dist = 0.0;             // KeyPose
  std::uint64_t seed = 0;        // Noise
};

void validate_augmentation(const AugmentationSpec& spec);

// Trim floor((range_pct / 200) * length) poses from each end.
Action crop(const Action& action, double range_pct);

// Perturb every coordinate by an independent uniform draw from (-b, b) with
// b = (range_pct / 100) * thighbone_length(action). Draws are consumed in
// pose, joint, axis order, so a fixed seed reproduces the same output.
Action add_noise(const Action& action, double range_pct,
                 const BodyModelDef& model, std::uint64_t seed);

// Keep only the joints of the named subset, in subset order, and derive the
// induced body model: root/hips/thighbone re-indexed, height chains filtered
// to surviving joints (chains left with fewer than two joints are dropped),
// and subsets whose joints all survive re-indexed as well.
std::pair<Action, BodyModelDef> simplify_body(const Action& action,
                                              const BodyModelDef& model,
                                              const std::string& subset_name);

// Greedy key-pose scan: the first pose is always kept; a later pose is kept
// iff its dissimilarity to the last kept pose exceeds dist. The output fps is
// set to the 0 sentinel (non-uniform sampling).
Action key_poses(const Action& action, double dist);

}  // namespace skelfuse
