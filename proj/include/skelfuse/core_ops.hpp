#pragma once

#include <cstdint>

#include "skelfuse/types.hpp"

namespace skelfuse {

// Keeps poses at indices 0, factor, 2*factor, ... and divides fps by the
// factor. The first pose is always retained.
Action downsample(const Action& action, std::size_t factor);

// Sum over joints of the Euclidean distance between corresponding joints.
double pose_dissimilarity(const Pose& a, const Pose& b);

// Mean over all poses of the hip-to-knee distance. Errors when the bone is
// degenerate (zero length) in every pose, since noise bounds derived from it
// would be undefined.
double thighbone_length(const Action& action, const BodyModelDef& model);

// Per class: sort action ids, shuffle with the seeded generator, then deal
// them to the folds alternately. The fold that receives the surplus of an
// odd-sized class alternates across classes, so the overall fold sizes differ
// by at most one as well.
FoldSplit balanced_two_fold_split(const Dataset& dataset, std::uint64_t seed);

}  // namespace skelfuse
