#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "skelfuse/types.hpp"

namespace skelfuse {

// Per-joint oscillation: position(t) = rest + amplitude * sin(2*pi*frequency*t
// + phase), with fixed per-axis phase offsets so trajectories are 3D.
struct JointSignature {
  double frequency = 1.0;  // Hz
  double phase = 0.0;
  double amplitude = 0.1;
};

struct SyntheticSpec {
  int classes = 2;
  int actions_per_class = 10;
  int joints = 8;
  int length_min = 20;
  int length_max = 40;
  double noise = 0.0;  // uniform(-noise, noise) added to every coordinate
  std::uint64_t seed = 0;
  // optional, [classes][joints]; derived from the seed when empty
  std::vector<std::vector<JointSignature>> signatures;
};

void validate_synthetic_spec(const SyntheticSpec& spec);

// Fixed humanoid-ish topology for j >= 6 joints: root, both hips, both
// knees, head, then deterministic extremities. Ships subsets "all" and, for
// j > 6, "core6".
BodyModelDef synthetic_body_model(int joints);
std::vector<Vec3> synthetic_rest_pose(int joints);

// Deterministic labeled dataset whose classes differ in per-joint frequency
// and amplitude signatures; separable by construction at low noise.
Dataset generate_synthetic(const SyntheticSpec& spec);

SyntheticSpec synthetic_spec_from_json(const nlohmann::json& doc);

}  // namespace skelfuse
