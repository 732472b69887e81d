#include "skelfuse/technique.hpp"

#include <set>

#include "skelfuse/error.hpp"
#include "skelfuse/rng.hpp"

namespace skelfuse {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void expect_keys(const json& obj, const std::set<std::string>& allowed,
                 const std::string& where) {
  for (const auto& item : obj.items()) {
    if (allowed.count(item.key()) == 0) {
      throw DataError(where + ": unknown key '" + item.key() + "'");
    }
  }
}

double number_at(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || !obj[key].is_number()) {
    throw DataError(where + ": missing numeric '" + std::string(key) + "'");
  }
  return obj[key].get<double>();
}

std::string format_pct(double value) {
  // trims trailing zeros so ids/descriptions read naturally (10, 2.5, ...)
  std::string s = std::to_string(value);
  s.erase(s.find_last_not_of('0') + 1);
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

}  // namespace

std::pair<Action, BodyModelDef> apply_pipeline(const Action& action,
                                               const BodyModelDef& model,
                                               const TechniqueSpec& spec,
                                               PipelineRole role,
                                               OrientationMode orientation) {
  Action current = action;
  BodyModelDef current_model = model;

  switch (spec.normalization.kind) {
    case NormalizationKind::None:
      break;
    case NormalizationKind::Position:
      current = normalize_position(current, current_model);
      break;
    case NormalizationKind::Full:
      current = normalize_position(current, current_model);
      current = normalize_orientation(current, current_model, orientation);
      current = normalize_size(current, current_model, spec.normalization.target_height);
      break;
  }

  const AugmentationSpec& aug =
      role == PipelineRole::Train ? spec.train_augmentation : spec.test_augmentation;
  switch (aug.kind) {
    case AugmentationKind::None:
      break;
    case AugmentationKind::Crop:
      current = crop(current, aug.range_pct);
      break;
    case AugmentationKind::Noise: {
      const std::uint64_t seed =
          mix_seed(aug.seed, action.id, role == PipelineRole::Train ? 1 : 2);
      current = add_noise(current, aug.range_pct, current_model, seed);
      break;
    }
    case AugmentationKind::BodyModel: {
      auto [reduced, induced] = simplify_body(current, current_model, aug.subset_name);
      current = std::move(reduced);
      current_model = std::move(induced);
      break;
    }
    case AugmentationKind::KeyPose:
      current = key_poses(current, aug.dist);
      break;
  }
  return {std::move(current), std::move(current_model)};
}

AugmentationSpec augmentation_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("kind") || !doc["kind"].is_string()) {
    throw DataError("augmentation: expected an object with a 'kind'");
  }
  const std::string kind = doc["kind"].get<std::string>();
  const std::string where = "augmentation '" + kind + "'";
  AugmentationSpec spec;
  if (kind == "none") {
    expect_keys(doc, {"kind"}, where);
    spec.kind = AugmentationKind::None;
  } else if (kind == "crop") {
    expect_keys(doc, {"kind", "range_pct"}, where);
    spec.kind = AugmentationKind::Crop;
    spec.range_pct = number_at(doc, "range_pct", where);
  } else if (kind == "noise") {
    expect_keys(doc, {"kind", "range_pct", "seed"}, where);
    spec.kind = AugmentationKind::Noise;
    spec.range_pct = number_at(doc, "range_pct", where);
    if (doc.contains("seed")) {
      if (!doc["seed"].is_number_integer()) throw DataError(where + ": seed must be an integer");
      spec.seed = doc["seed"].get<std::uint64_t>();
    }
  } else if (kind == "body_model") {
    expect_keys(doc, {"kind", "subset"}, where);
    if (!doc.contains("subset") || !doc["subset"].is_string()) {
      throw DataError(where + ": missing 'subset'");
    }
    spec.kind = AugmentationKind::BodyModel;
    spec.subset_name = doc["subset"].get<std::string>();
  } else if (kind == "key_pose") {
    expect_keys(doc, {"kind", "dist"}, where);
    spec.kind = AugmentationKind::KeyPose;
    spec.dist = number_at(doc, "dist", where);
  } else {
    throw DataError("unknown augmentation kind '" + kind + "'");
  }
  validate_augmentation(spec);
  return spec;
}

ordered_json augmentation_to_json(const AugmentationSpec& spec) {
  ordered_json doc;
  switch (spec.kind) {
    case AugmentationKind::None:
      doc["kind"] = "none";
      break;
    case AugmentationKind::Crop:
      doc["kind"] = "crop";
      doc["range_pct"] = spec.range_pct;
      break;
    case AugmentationKind::Noise:
      doc["kind"] = "noise";
      doc["range_pct"] = spec.range_pct;
      doc["seed"] = spec.seed;
      break;
    case AugmentationKind::BodyModel:
      doc["kind"] = "body_model";
      doc["subset"] = spec.subset_name;
      break;
    case AugmentationKind::KeyPose:
      doc["kind"] = "key_pose";
      doc["dist"] = spec.dist;
      break;
  }
  return doc;
}

TechniqueSpec technique_from_json(const json& doc) {
  if (!doc.is_object()) throw DataError("technique: expected an object");
  expect_keys(doc, {"id", "norm", "target_height", "train_aug", "test_aug"}, "technique");
  if (!doc.contains("id") || !doc["id"].is_string()) {
    throw DataError("technique: missing string 'id'");
  }
  TechniqueSpec spec;
  spec.id = doc["id"].get<std::string>();
  if (spec.id.empty()) throw DataError("technique: empty id");
  for (char c : spec.id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '.';
    if (!ok) {
      throw DataError("technique id '" + spec.id +
                      "' may only contain [A-Za-z0-9._-] (ids name cache files)");
    }
  }
  if (!doc.contains("norm") || !doc["norm"].is_string()) {
    throw DataError("technique '" + spec.id + "': missing 'norm'");
  }
  const std::string norm = doc["norm"].get<std::string>();
  if (norm == "none") {
    spec.normalization.kind = NormalizationKind::None;
  } else if (norm == "p") {
    spec.normalization.kind = NormalizationKind::Position;
  } else if (norm == "pos") {
    spec.normalization.kind = NormalizationKind::Full;
  } else {
    throw DataError("technique '" + spec.id + "': norm must be none|p|pos");
  }
  if (doc.contains("target_height")) {
    if (!doc["target_height"].is_number()) {
      throw DataError("technique '" + spec.id + "': target_height must be a number");
    }
    spec.normalization.target_height = doc["target_height"].get<double>();
    if (!(spec.normalization.target_height > 0.0)) {
      throw DataError("technique '" + spec.id + "': target_height must be positive");
    }
  }
  for (const char* key : {"train_aug", "test_aug"}) {
    if (!doc.contains(key)) {
      throw DataError("technique '" + spec.id + "': missing '" + std::string(key) + "'");
    }
  }
  try {
    spec.train_augmentation = augmentation_from_json(doc["train_aug"]);
    spec.test_augmentation = augmentation_from_json(doc["test_aug"]);
  } catch (const DataError& e) {
    throw DataError("technique '" + spec.id + "': " + e.what());
  }
  return spec;
}

ordered_json technique_to_json(const TechniqueSpec& spec) {
  ordered_json doc;
  doc["id"] = spec.id;
  switch (spec.normalization.kind) {
    case NormalizationKind::None: doc["norm"] = "none"; break;
    case NormalizationKind::Position: doc["norm"] = "p"; break;
    case NormalizationKind::Full: doc["norm"] = "pos"; break;
  }
  if (spec.normalization.kind == NormalizationKind::Full) {
    doc["target_height"] = spec.normalization.target_height;
  }
  doc["train_aug"] = augmentation_to_json(spec.train_augmentation);
  doc["test_aug"] = augmentation_to_json(spec.test_augmentation);
  return doc;
}

std::string describe(const NormalizationVariant& norm) {
  switch (norm.kind) {
    case NormalizationKind::None: return "--";
    case NormalizationKind::Position: return "P";
    case NormalizationKind::Full: return "P+O+S";
  }
  return "?";
}

std::string describe(const AugmentationSpec& aug) {
  switch (aug.kind) {
    case AugmentationKind::None: return "--";
    case AugmentationKind::Crop: return "Crop(" + format_pct(aug.range_pct) + "%)";
    case AugmentationKind::Noise: return "Noise(" + format_pct(aug.range_pct) + "%)";
    case AugmentationKind::BodyModel: return "BodyModel(" + aug.subset_name + ")";
    case AugmentationKind::KeyPose: return "KeyPose(" + format_pct(aug.dist) + ")";
  }
  return "?";
}

}  // namespace skelfuse
