#pragma once

#include <optional>
#include <span>
#include <vector>

#include "skelfuse/bilstm.hpp"
#include "skelfuse/technique.hpp"
#include "skelfuse/types.hpp"

namespace skelfuse {

// Result of a strict majority vote: a class index when more than floor(k/2)
// of the k voters agree, otherwise unknown. Unknown is never a pseudo-class;
// it cannot win anything downstream.
struct VoteOutcome {
  std::optional<int> winner;

  bool unknown() const { return !winner.has_value(); }
};

// Boyer-Moore majority scan plus a verification pass; a class is returned
// only when its vote count strictly exceeds floor(k/2). At most one class
// can clear that bar, so there is never a majority tie to break.
VoteOutcome strict_majority(std::span<const int> votes);

// Three-stage fused classification with injectable branch classification;
// `classify_branch(i, variant)` must return the class index branch i assigns.
// Any branch failure propagates (all-or-nothing).
template <class ClassifyBranch>
VoteOutcome fuse_classify_with(const Action& query, const BodyModelDef& model,
                               std::span<const TechniqueSpec> techniques,
                               ClassifyBranch&& classify_branch) {
  std::vector<int> votes;
  votes.reserve(techniques.size());
  for (std::size_t i = 0; i < techniques.size(); ++i) {
    auto [variant, variant_model] =
        apply_pipeline(query, model, techniques[i], PipelineRole::Test);
    (void)variant_model;
    votes.push_back(classify_branch(i, variant));
  }
  return strict_majority(votes);
}

// The production path: stage 1 applies each technique's test pipeline to the
// query, stage 2 classifies each variant with its own model, stage 3 takes
// the strict majority of the k outputs.
VoteOutcome fuse_classify(const Action& query, const BodyModelDef& model,
                          std::span<const TechniqueSpec> techniques,
                          std::span<const BiLstmParams> models);

}  // namespace skelfuse
