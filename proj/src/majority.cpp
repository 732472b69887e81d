#include "skelfuse/majority.hpp"

#include "skelfuse/error.hpp"

namespace skelfuse {

VoteOutcome strict_majority(std::span<const int> votes) {
  if (votes.empty()) throw DataError("strict majority of zero votes");

  int candidate = votes.front();
  std::size_t balance = 0;
  for (int v : votes) {
    if (balance == 0) {
      candidate = v;
      balance = 1;
    } else if (v == candidate) {
      ++balance;
    } else {
      --balance;
    }
  }
  std::size_t count = 0;
  for (int v : votes) {
    if (v == candidate) ++count;
  }
  if (count > votes.size() / 2) return {candidate};
  return {std::nullopt};
}

VoteOutcome fuse_classify(const Action& query, const BodyModelDef& model,
                          std::span<const TechniqueSpec> techniques,
                          std::span<const BiLstmParams> models) {
  if (techniques.size() != models.size()) {
    throw DataError("fuse_classify: techniques and models are not aligned");
  }
  if (techniques.empty()) throw DataError("fuse_classify: no techniques");
  return fuse_classify_with(query, model, techniques,
                            [&](std::size_t i, const Action& variant) {
                              return classify(models[i], variant).predicted_class;
                            });
}

}  // namespace skelfuse
