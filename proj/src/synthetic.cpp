#include "skelfuse/synthetic.hpp"

#include <cmath>
#include <set>

#include "skelfuse/error.hpp"
#include "skelfuse/rng.hpp"

namespace skelfuse {

namespace {

constexpr double kTwoPi = 6.283185307179586;
constexpr double kFps = 30.0;

char digit(int v) { return static_cast<char>('0' + v); }

std::string class_name(int c) {
  return std::string("class_") + digit(c / 10) + digit(c % 10);
}

std::string action_id(int c, int a) {
  return std::string("c") + digit(c / 10) + digit(c % 10) + "_a" + digit(a / 100) +
         digit((a / 10) % 10) + digit(a % 10);
}

}  // namespace

void validate_synthetic_spec(const SyntheticSpec& spec) {
  if (spec.classes < 2) throw DataError("synthetic spec needs at least 2 classes");
  if (spec.classes > 100) throw DataError("synthetic spec supports at most 100 classes");
  if (spec.actions_per_class < 1) throw DataError("synthetic spec needs >= 1 action per class");
  if (spec.actions_per_class > 1000) throw DataError("synthetic spec supports at most 1000 actions per class");
  if (spec.joints < 6) throw DataError("synthetic body model needs >= 6 joints");
  if (spec.length_min < 2 || spec.length_max < spec.length_min) {
    throw DataError("synthetic lengths must satisfy 2 <= min <= max");
  }
  if (spec.noise < 0.0) throw DataError("synthetic noise must be non-negative");
  if (!spec.signatures.empty()) {
    if (spec.signatures.size() != static_cast<std::size_t>(spec.classes)) {
      throw DataError("signatures must list one entry per class");
    }
    for (const auto& per_class : spec.signatures) {
      if (per_class.size() != static_cast<std::size_t>(spec.joints)) {
        throw DataError("signatures must list one triple per joint");
      }
    }
  }
}

std::vector<Vec3> synthetic_rest_pose(int joints) {
  std::vector<Vec3> rest;
  rest.reserve(static_cast<std::size_t>(joints));
  rest.push_back({0.0, 1.0, 0.0});      // root
  rest.push_back({-0.12, 0.94, 0.0});   // left hip
  rest.push_back({0.12, 0.94, 0.0});    // right hip
  rest.push_back({-0.12, 0.52, 0.0});   // left knee
  rest.push_back({0.12, 0.52, 0.0});    // right knee
  rest.push_back({0.0, 1.68, 0.0});     // head
  for (int k = 6; k < joints; ++k) {
    const double angle = kTwoPi * static_cast<double>(k - 6) /
                         std::max(1.0, static_cast<double>(joints - 6));
    rest.push_back({0.35 * std::cos(angle), 1.05 + 0.3 * std::sin(angle),
                    0.18 * std::cos(angle * 0.5)});
  }
  return rest;
}

BodyModelDef synthetic_body_model(int joints) {
  if (joints < 6) throw DataError("synthetic body model needs >= 6 joints");
  BodyModelDef model;
  model.joint_names = {"root", "left_hip", "right_hip", "left_knee", "right_knee",
                       "head"};
  for (int k = 6; k < joints; ++k) {
    model.joint_names.push_back("limb_" + std::to_string(k - 6));
  }
  model.root_index = 0;
  model.left_hip_index = 1;
  model.right_hip_index = 2;
  model.thighbone = {1, 3};
  model.height_chains = {{3, 1, 0, 5}, {4, 2, 0, 5}};
  std::vector<int> all(static_cast<std::size_t>(joints));
  for (int k = 0; k < joints; ++k) all[static_cast<std::size_t>(k)] = k;
  model.subsets["all"] = all;
  if (joints > 6) model.subsets["core6"] = {0, 1, 2, 3, 4, 5};
  validate_body_model(model);
  return model;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  validate_synthetic_spec(spec);

  Dataset dataset;
  dataset.body_model = synthetic_body_model(spec.joints);
  const std::vector<Vec3> rest = synthetic_rest_pose(spec.joints);

  // Class signatures: distinct base frequency per class, seeded per-joint
  // phase and amplitude. Frequencies are high enough that even the shortest
  // action covers a good part of a cycle. Hip-region joints (root, hips,
  // knees) sway less so the hip line never collapses under orientation
  // normalization.
  std::vector<std::vector<JointSignature>> signatures = spec.signatures;
  if (signatures.empty()) {
    signatures.resize(static_cast<std::size_t>(spec.classes));
    for (int c = 0; c < spec.classes; ++c) {
      Rng rng(mix_seed(spec.seed, "signature", static_cast<std::uint64_t>(c)));
      auto& per_class = signatures[static_cast<std::size_t>(c)];
      per_class.resize(static_cast<std::size_t>(spec.joints));
      const double base_freq = 1.2 + 0.45 * static_cast<double>(c);
      for (int j = 0; j < spec.joints; ++j) {
        JointSignature& sig = per_class[static_cast<std::size_t>(j)];
        sig.frequency = base_freq * rng.uniform(0.95, 1.05);
        sig.phase = rng.uniform(0.0, kTwoPi);
        sig.amplitude = rng.uniform(0.06, 0.2);
        if (j <= 4) sig.amplitude *= 0.25;
      }
    }
  }

  for (int c = 0; c < spec.classes; ++c) {
    const auto& per_class = signatures[static_cast<std::size_t>(c)];
    for (int a = 0; a < spec.actions_per_class; ++a) {
      Rng rng(mix_seed(spec.seed, "action", static_cast<std::uint64_t>(c) * 100000u +
                                                static_cast<std::uint64_t>(a)));
      Action action;
      action.id = action_id(c, a);
      action.class_label = class_name(c);
      action.fps = kFps;
      const auto length = static_cast<std::size_t>(
          spec.length_min +
          static_cast<int>(rng.below(
              static_cast<std::uint64_t>(spec.length_max - spec.length_min + 1))));
      // mild per-action variation; a full-circle phase shift would erase the
      // class-level phase pattern on short actions
      const double action_phase = rng.uniform(-0.4, 0.4);
      const double amp_jitter = rng.uniform(0.9, 1.1);
      action.poses.reserve(length);
      for (std::size_t frame = 0; frame < length; ++frame) {
        const double t = static_cast<double>(frame) / kFps;
        Pose pose;
        pose.joints.reserve(static_cast<std::size_t>(spec.joints));
        for (int j = 0; j < spec.joints; ++j) {
          const JointSignature& sig = per_class[static_cast<std::size_t>(j)];
          const double arg = kTwoPi * sig.frequency * t + sig.phase + action_phase;
          const double amp = sig.amplitude * amp_jitter;
          Vec3 p = rest[static_cast<std::size_t>(j)];
          p.x += amp * std::sin(arg);
          p.y += amp * std::sin(arg + kTwoPi / 3.0);
          p.z += amp * std::sin(arg + 2.0 * kTwoPi / 3.0);
          if (spec.noise > 0.0) {
            p.x += rng.uniform(-spec.noise, spec.noise);
            p.y += rng.uniform(-spec.noise, spec.noise);
            p.z += rng.uniform(-spec.noise, spec.noise);
          }
          pose.joints.push_back(p);
        }
        action.poses.push_back(std::move(pose));
      }
      dataset.actions.push_back(std::move(action));
    }
  }
  std::set<std::string> classes;
  for (const Action& action : dataset.actions) classes.insert(*action.class_label);
  dataset.classes.assign(classes.begin(), classes.end());
  validate_dataset(dataset);
  return dataset;
}

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw DataError("synthetic spec must be an object");
  static const std::set<std::string> allowed = {
      "classes", "actions_per_class", "joints",     "length_min",
      "length_max", "noise",          "seed",       "signatures"};
  for (const auto& item : doc.items()) {
    if (allowed.count(item.key()) == 0) {
      throw DataError("synthetic spec: unknown key '" + item.key() + "'");
    }
  }
  SyntheticSpec spec;
  try {
    if (doc.contains("classes")) spec.classes = doc["classes"].get<int>();
    if (doc.contains("actions_per_class")) {
      spec.actions_per_class = doc["actions_per_class"].get<int>();
    }
    if (doc.contains("joints")) spec.joints = doc["joints"].get<int>();
    if (doc.contains("length_min")) spec.length_min = doc["length_min"].get<int>();
    if (doc.contains("length_max")) spec.length_max = doc["length_max"].get<int>();
    if (doc.contains("noise")) spec.noise = doc["noise"].get<double>();
    if (doc.contains("seed")) spec.seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("signatures")) {
      for (const auto& per_class : doc["signatures"]) {
        std::vector<JointSignature> sigs;
        for (const auto& triple : per_class) {
          if (!triple.is_array() || triple.size() != 3) {
            throw DataError("signature entries must be [frequency, phase, amplitude]");
          }
          sigs.push_back({triple[0].get<double>(), triple[1].get<double>(),
                          triple[2].get<double>()});
        }
        spec.signatures.push_back(std::move(sigs));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("synthetic spec: ") + e.what());
  }
  validate_synthetic_spec(spec);
  return spec;
}

}  // namespace skelfuse
