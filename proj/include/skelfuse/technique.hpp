#pragma once

#include <string>
#include <utility>

#include "json.hpp"
#include "skelfuse/augment.hpp"
#include "skelfuse/normalize.hpp"
#include "skelfuse/types.hpp"

namespace skelfuse {

// One complete pre-processing recipe: a normalization variant plus one
// augmentation for training data and one for test data. One classifier is
// trained per technique.
struct TechniqueSpec {
  std::string id;
  NormalizationVariant normalization;
  AugmentationSpec train_augmentation;
  AugmentationSpec test_augmentation;
};

enum class PipelineRole { Train, Test };

// Applies the normalization steps in fixed position -> orientation -> size
// order (those that the variant enables), then the augmentation selected by
// `role`. Returns the transformed action together with the body model that
// describes it (re-indexed when the body-model augmentation ran).
//
// The per-action noise seed is derived from (spec seed, action id, role), so
// distinct actions receive distinct jitter while the whole pipeline stays
// reproducible.
std::pair<Action, BodyModelDef> apply_pipeline(
    const Action& action, const BodyModelDef& model, const TechniqueSpec& spec,
    PipelineRole role, OrientationMode orientation = OrientationMode::PerPose);

// JSON shape: {"id": ..., "norm": "none"|"p"|"pos", "target_height": 1.75,
//              "train_aug": {...}, "test_aug": {...}}
// with augmentation objects such as {"kind": "crop", "range_pct": 10}.
// target_height is optional and only meaningful for "pos". Unknown keys and
// parameters that do not belong to the declared kind are rejected.
TechniqueSpec technique_from_json(const nlohmann::json& doc);
nlohmann::ordered_json technique_to_json(const TechniqueSpec& spec);

AugmentationSpec augmentation_from_json(const nlohmann::json& doc);
nlohmann::ordered_json augmentation_to_json(const AugmentationSpec& spec);

std::string describe(const NormalizationVariant& norm);
std::string describe(const AugmentationSpec& aug);

}  // namespace skelfuse
