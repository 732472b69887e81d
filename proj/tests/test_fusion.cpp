#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <map>
#include <set>

#include "doctest.h"
#include "fd_check.hpp"
#include "skelfuse/combinations.hpp"
#include "skelfuse/error.hpp"
#include "skelfuse/majority.hpp"
#include "test_support.hpp"

using namespace skelfuse;

namespace {

// Test-only oracle: the traditional plurality rule (largest vote count wins,
// ties broken toward the smallest class index).
int plurality_winner(const std::vector<int>& votes) {
  std::map<int, int> counts;
  for (int v : votes) ++counts[v];
  int best = votes.front();
  int best_count = 0;
  for (const auto& [cls, count] : counts) {
    if (count > best_count) {
      best = cls;
      best_count = count;
    }
  }
  return best;
}

struct RandomInstance {
  std::vector<std::string> ids;
  std::vector<PartialOutputs> outputs;  // one per technique
};

RandomInstance random_instance(Rng& rng, int techniques, int classes, int actions,
                               double correct_prob = 0.6) {
  RandomInstance inst;
  std::vector<std::string> labels;
  for (int c = 0; c < classes; ++c) labels.push_back("cls" + std::to_string(c));
  std::vector<std::string> truth;
  for (int a = 0; a < actions; ++a) {
    inst.ids.push_back("act" + std::to_string(1000 + a));
    truth.push_back(labels[rng.below(static_cast<std::uint64_t>(classes))]);
  }
  for (int t = 0; t < techniques; ++t) {
    PartialOutputs out;
    out.technique_id = "tech" + std::to_string(t);
    for (int a = 0; a < actions; ++a) {
      const std::string& target = truth[static_cast<std::size_t>(a)];
      std::string predicted = target;
      if (rng.unit() > correct_prob) {
        predicted = labels[rng.below(static_cast<std::uint64_t>(classes))];
      }
      out.rows.push_back({inst.ids[static_cast<std::size_t>(a)], target, predicted});
    }
    inst.outputs.push_back(std::move(out));
  }
  return inst;
}

// Slow reference: re-run the strict majority per action from the stored
// outputs and count fused-correct actions.
double slow_combination_accuracy(const RandomInstance& inst, std::uint32_t mask) {
  std::map<std::string, int> interned;
  auto intern = [&](const std::string& s) {
    return interned.emplace(s, static_cast<int>(interned.size())).first->second;
  };
  std::size_t correct = 0;
  for (std::size_t a = 0; a < inst.ids.size(); ++a) {
    std::vector<int> votes;
    int truth = -1;
    for (std::size_t t = 0; t < inst.outputs.size(); ++t) {
      if ((mask & (std::uint32_t{1} << t)) == 0) continue;
      votes.push_back(intern(inst.outputs[t].rows[a].predicted_class));
      truth = intern(inst.outputs[t].rows[a].true_class);
    }
    const VoteOutcome outcome = strict_majority(votes);
    if (!outcome.unknown() && *outcome.winner == truth) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(inst.ids.size());
}

}  // namespace

TEST_CASE("strict majority") {
  SUBCASE("clear winner") {
    const std::vector<int> votes = {0, 0, 0, 1, 2};  // 3 of 5 > floor(5/2)
    const VoteOutcome out = strict_majority(votes);
    REQUIRE_FALSE(out.unknown());
    CHECK(*out.winner == 0);
  }
  SUBCASE("two against two is unknown") {
    const std::vector<int> votes = {0, 0, 1, 1};
    CHECK(strict_majority(votes).unknown());
  }
  SUBCASE("a single vote wins") {
    const std::vector<int> votes = {4};
    const VoteOutcome out = strict_majority(votes);
    REQUIRE_FALSE(out.unknown());
    CHECK(*out.winner == 4);
  }
  SUBCASE("empty vote list errors") {
    CHECK_THROWS_AS(strict_majority(std::vector<int>{}), DataError);
  }
  SUBCASE("at most one class can clear the bar; the scan finds exactly it") {
    Rng rng(31);
    for (int trial = 0; trial < 10000; ++trial) {
      const int k = 1 + static_cast<int>(rng.below(9));
      const int m = 1 + static_cast<int>(rng.below(5));
      std::vector<int> votes;
      for (int i = 0; i < k; ++i) {
        votes.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(m))));
      }
      // brute-force count
      std::map<int, int> counts;
      for (int v : votes) ++counts[v];
      std::vector<int> winners;
      for (const auto& [cls, count] : counts) {
        if (count > k / 2) winners.push_back(cls);
      }
      REQUIRE(winners.size() <= 1);
      const VoteOutcome out = strict_majority(votes);
      if (winners.empty()) {
        CHECK(out.unknown());
      } else {
        REQUIRE_FALSE(out.unknown());
        CHECK(*out.winner == winners.front());
      }
    }
  }
}

TEST_CASE("classification counts") {
  SUBCASE("closed form equals the binomial summation for n = 1..20") {
    for (int n = 1; n <= 20; ++n) {
      const NaiveCount count = naive_combination_count(n);
      CHECK(count.closed_form == count.summation);
    }
  }
  SUBCASE("n = 16 over 1164 test actions") {
    const NaiveCount count = naive_combination_count(16);
    CHECK(count.closed_form == 524288ull);  // 16 * 2^15 per action
    CHECK(naive_total_classifications(16, 1164) == 610271232ull);  // ~6.1e8
    CHECK(cached_classification_count(16, 1164) == 18624ull);      // ~19K
    // caching saves a factor of 2^(n-1) per action
    CHECK(count.closed_form / 16 == 32768ull);
  }
  SUBCASE("small cases") {
    CHECK(naive_combination_count(1).closed_form == 1ull);
    CHECK(naive_combination_count(3).closed_form == 12ull);  // 1*3 + 2*3 + 3*1
    CHECK(naive_combination_count(3).summation == 12ull);
    CHECK(cached_classification_count(1, 1) == 1ull);
  }
  SUBCASE("overflow and domain guards") {
    CHECK_THROWS_AS(naive_combination_count(0), DataError);
    CHECK_THROWS_AS(naive_combination_count(58), DataError);
    CHECK_THROWS_AS(cached_classification_count(0, 5), DataError);
  }
}

TEST_CASE("true-positive lists") {
  SUBCASE("all correct / all wrong / mixed") {
    PartialOutputs perfect{"good", {{"a", "x", "x"}, {"b", "y", "y"}}};
    PartialOutputs broken{"bad", {{"a", "x", "y"}, {"b", "y", "x"}}};
    PartialOutputs mixed{"mid", {{"a", "x", "x"}, {"b", "y", "x"}}};
    const std::vector<PartialOutputs> outputs = {perfect, broken, mixed};
    const auto tp = build_true_positive_lists(outputs);
    REQUIRE(tp.size() == 3);
    CHECK(tp[0].ids == std::vector<std::string>{"a", "b"});
    CHECK(tp[1].ids.empty());
    CHECK(tp[2].ids == std::vector<std::string>{"a"});
  }
  SUBCASE("filtered subset matches a row scan") {
    Rng rng(37);
    const RandomInstance inst = random_instance(rng, 4, 3, 50);
    const auto tp = build_true_positive_lists(inst.outputs);
    for (std::size_t t = 0; t < inst.outputs.size(); ++t) {
      std::set<std::string> expected;
      for (const PartialOutputRow& row : inst.outputs[t].rows) {
        if (row.predicted_class == row.true_class) expected.insert(row.action_id);
      }
      CHECK(tp[t].ids == std::vector<std::string>(expected.begin(), expected.end()));
    }
  }
  SUBCASE("inconsistent action sets error") {
    PartialOutputs a{"a", {{"x", "c", "c"}, {"y", "c", "c"}}};
    PartialOutputs b{"b", {{"x", "c", "c"}, {"z", "c", "c"}}};
    const std::vector<PartialOutputs> outputs = {a, b};
    CHECK_THROWS_AS(build_true_positive_lists(outputs), DataError);
  }
}

TEST_CASE("combination evaluation") {
  const std::vector<std::string> ids = {"a", "b", "c", "d"};

  const std::vector<TruePositiveList> tp = {
      {"t1", {"a", "b"}}, {"t2", {"a", "c"}}, {"t3", {"a"}}};
  CombinationEvaluator evaluator(tp, ids);

  SUBCASE("hand-enumerated three-list case") {
    // counts over {t1,t2,t3}: a=3, b=1, c=1; only a clears floor(3/2)=1
    const CombinationResult r = evaluator.evaluate(0b111);
    CHECK(r.cardinality == 3);
    CHECK(r.accuracy == doctest::Approx(0.25));
  }
  SUBCASE("k = 1 reduces to membership") {
    CHECK(evaluator.evaluate(0b001).accuracy == doctest::Approx(0.5));
    CHECK(evaluator.evaluate(0b100).accuracy == doctest::Approx(0.25));
  }
  SUBCASE("full lists give accuracy 1") {
    const std::vector<TruePositiveList> full = {
        {"t1", {"a", "b", "c", "d"}}, {"t2", {"a", "b", "c", "d"}}};
    CombinationEvaluator ev(full, ids);
    CHECK(ev.evaluate(0b11).accuracy == 1.0);
  }
  SUBCASE("empty combination errors") {
    CHECK_THROWS_AS(evaluator.evaluate(0), DataError);
  }
  SUBCASE("enumeration is ascending and complete") {
    std::vector<std::uint32_t> masks;
    for_each_combination(evaluator,
                         [&](const CombinationResult& r) { masks.push_back(r.mask); });
    REQUIRE(masks.size() == 7);  // 2^3 - 1
    CHECK(std::is_sorted(masks.begin(), masks.end()));
    CHECK(masks.front() == 1);
    CHECK(masks.back() == 7);

    // each streamed result equals a direct recomputation
    for (const CombinationResult& r : evaluate_all_combinations(evaluator)) {
      CHECK(r.accuracy == evaluator.evaluate(r.mask).accuracy);
      CHECK(r.cardinality == std::popcount(r.mask));
    }
  }
  SUBCASE("enumeration guard beyond 24 techniques") {
    std::vector<TruePositiveList> many;
    std::vector<std::string> wide_ids = {"a"};
    for (int t = 0; t < 25; ++t) many.push_back({"t" + std::to_string(t), {"a"}});
    CombinationEvaluator wide(many, wide_ids);
    CHECK_THROWS_AS(evaluate_all_combinations(wide), DataError);
  }
}

TEST_CASE("fast path equals the slow strict-majority path") {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(6));
    const int m = 2 + static_cast<int>(rng.below(4));
    const int actions = 5 + static_cast<int>(rng.below(30));
    const RandomInstance inst = random_instance(rng, n, m, actions);
    const auto tp = build_true_positive_lists(inst.outputs);
    CombinationEvaluator evaluator(tp, inst.ids);
    for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
      CHECK(evaluator.evaluate(mask).accuracy == slow_combination_accuracy(inst, mask));
    }
  }
}

TEST_CASE("fused accuracy never exceeds the plurality rule") {
  Rng rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(7));
    const int m = 2 + static_cast<int>(rng.below(5));
    const int actions = 3 + static_cast<int>(rng.below(25));
    const RandomInstance inst = random_instance(rng, n, m, actions, 0.5);
    const std::uint32_t mask = (1u << n) - 1;

    std::map<std::string, int> interned;
    auto intern = [&](const std::string& s) {
      return interned.emplace(s, static_cast<int>(interned.size())).first->second;
    };
    std::size_t plurality_correct = 0;
    for (std::size_t a = 0; a < inst.ids.size(); ++a) {
      std::vector<int> votes;
      int truth = -1;
      for (std::size_t t = 0; t < inst.outputs.size(); ++t) {
        votes.push_back(intern(inst.outputs[t].rows[a].predicted_class));
        truth = intern(inst.outputs[t].rows[a].true_class);
      }
      if (plurality_winner(votes) == truth) ++plurality_correct;
    }
    const double plurality =
        static_cast<double>(plurality_correct) / static_cast<double>(inst.ids.size());
    CHECK(slow_combination_accuracy(inst, mask) <= plurality + 1e-12);
  }
}

TEST_CASE("counting true positives reproduces the strict-majority decision") {
  Rng rng(47);

  SUBCASE("randomized instances, every combination") {
    for (int trial = 0; trial < 30; ++trial) {
      const int n = 1 + static_cast<int>(rng.below(6));
      const RandomInstance inst =
          random_instance(rng, n, 2 + static_cast<int>(rng.below(4)),
                          4 + static_cast<int>(rng.below(20)));
      const auto tp = build_true_positive_lists(inst.outputs);
      for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
        CHECK(fusion_accuracy_equivalence_check(tp, inst.outputs, mask));
      }
    }
  }
  SUBCASE("a wrong class winning the majority counts as incorrect on both paths") {
    // two of three classifiers agree on the wrong class
    PartialOutputs t1{"t1", {{"a", "good", "bad"}}};
    PartialOutputs t2{"t2", {{"a", "good", "bad"}}};
    PartialOutputs t3{"t3", {{"a", "good", "good"}}};
    const std::vector<PartialOutputs> outputs = {t1, t2, t3};
    const auto tp = build_true_positive_lists(outputs);
    CHECK(fusion_accuracy_equivalence_check(tp, outputs, 0b111));
    const std::vector<std::string> ids = {"a"};
    CombinationEvaluator evaluator(tp, ids);
    CHECK(evaluator.evaluate(0b111).accuracy == 0.0);
  }
}

TEST_CASE("top combinations") {
  SUBCASE("matches an exhaustive sort oracle") {
    Rng rng(53);
    const RandomInstance inst = random_instance(rng, 6, 3, 40);
    const auto tp = build_true_positive_lists(inst.outputs);
    CombinationEvaluator evaluator(tp, inst.ids);
    const auto all = evaluate_all_combinations(evaluator);

    const std::vector<int> ks = {3, 5};
    const auto top = top_combinations(all, ks, 4);

    for (int k : ks) {
      std::vector<CombinationResult> bucket;
      for (const CombinationResult& r : all) {
        if (r.cardinality == k) bucket.push_back(r);
      }
      std::stable_sort(bucket.begin(), bucket.end(),
                       [](const CombinationResult& a, const CombinationResult& b) {
                         if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
                         return a.mask < b.mask;
                       });
      std::vector<CombinationResult> expected(bucket.begin(),
                                              bucket.begin() + std::min<std::size_t>(4, bucket.size()));
      std::vector<CombinationResult> got;
      for (const CombinationResult& r : top) {
        if (r.cardinality == k) got.push_back(r);
      }
      REQUIRE(got.size() == expected.size());
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(got[i].mask == expected[i].mask);
        CHECK(got[i].accuracy == expected[i].accuracy);
      }
    }
  }
  SUBCASE("16 techniques, top 5 for k in {3,5,7,9} gives 20 rows") {
    Rng rng(59);
    const RandomInstance inst = random_instance(rng, 16, 4, 30, 0.7);
    const auto tp = build_true_positive_lists(inst.outputs);
    CombinationEvaluator evaluator(tp, inst.ids);
    const auto all = evaluate_all_combinations(evaluator);
    const auto top = top_combinations(all, {3, 5, 7, 9}, 5);
    CHECK(top.size() == 20);
  }
  SUBCASE("ties break toward the smaller mask") {
    // two single-technique combinations with identical accuracy
    const std::vector<std::string> ids = {"a", "b"};
    const std::vector<TruePositiveList> tp = {{"t1", {"a"}}, {"t2", {"b"}}};
    CombinationEvaluator evaluator(tp, ids);
    const auto all = evaluate_all_combinations(evaluator);
    const auto top = top_combinations(all, {1}, 2);
    REQUIRE(top.size() == 2);
    CHECK(top[0].mask == 0b01);
    CHECK(top[1].mask == 0b10);
  }
  SUBCASE("a single technique at k = 1 reports its standalone accuracy") {
    const std::vector<std::string> ids = {"a", "b", "c", "d"};
    const std::vector<TruePositiveList> tp = {{"solo", {"a", "c", "d"}}};
    CombinationEvaluator evaluator(tp, ids);
    const auto top = top_combinations(evaluate_all_combinations(evaluator), {1}, 5);
    REQUIRE(top.size() == 1);
    CHECK(top[0].accuracy == doctest::Approx(0.75));
  }
}

TEST_CASE("fused classification of a single query") {
  Rng rng(61);
  const Dims dims{2, 3, 6, 3};
  const BiLstmParams params = testsupport::random_params(dims, 5);
  const Action query = testsupport::random_action(rng, 2, 6, "query");
  const BodyModelDef model = [] {
    BodyModelDef m;
    m.joint_names = {"root", "other"};
    m.root_index = 0;
    m.left_hip_index = 0;
    m.right_hip_index = 1;
    m.thighbone = {0, 1};
    m.height_chains = {{0, 1}};
    return m;
  }();
  TechniqueSpec identity;
  identity.id = "raw";

  SUBCASE("k = 1 equals the standalone classifier") {
    const std::vector<TechniqueSpec> techniques = {identity};
    const std::vector<BiLstmParams> models = {params};
    const VoteOutcome out = fuse_classify(query, model, techniques, models);
    REQUIRE_FALSE(out.unknown());
    CHECK(*out.winner == classify(params, query).predicted_class);
  }
  SUBCASE("identical models and identity techniques agree unanimously") {
    const std::vector<TechniqueSpec> techniques = {identity, identity, identity};
    const std::vector<BiLstmParams> models = {params, params, params};
    const VoteOutcome out = fuse_classify(query, model, techniques, models);
    REQUIRE_FALSE(out.unknown());
    CHECK(*out.winner == classify(params, query).predicted_class);
  }
  SUBCASE("mocked branch outputs [A, A, B] fuse to A") {
    const std::vector<TechniqueSpec> techniques = {identity, identity, identity};
    const VoteOutcome out = fuse_classify_with(
        query, model, techniques, [](std::size_t branch, const Action&) {
          return branch < 2 ? 7 : 9;
        });
    REQUIRE_FALSE(out.unknown());
    CHECK(*out.winner == 7);
  }
  SUBCASE("misaligned models and techniques error") {
    const std::vector<TechniqueSpec> techniques = {identity, identity};
    const std::vector<BiLstmParams> models = {params};
    CHECK_THROWS_AS(fuse_classify(query, model, techniques, models), DataError);
  }
}

TEST_CASE("partial output cache files") {
  testsupport::TempDir tmp("fusion_cache");

  SUBCASE("CSV round trip") {
    PartialOutputs out{"tech_a", {{"a1", "x", "x"}, {"a2", "y", "x"}}};
    const auto path = tmp.path / "tech_a.csv";
    write_partial_outputs_csv(out, path);
    const PartialOutputs loaded = read_partial_outputs_csv(path, "tech_a");
    REQUIRE(loaded.rows.size() == 2);
    CHECK(loaded.rows[0].action_id == "a1");
    CHECK(loaded.rows[1].predicted_class == "x");
    CHECK(loaded.rows[1].true_class == "y");
  }
  SUBCASE("missing cache raises a cache error") {
    CHECK_THROWS_AS(read_partial_outputs_csv(tmp.path / "absent.csv", "t"), CacheError);
  }
  SUBCASE("manifest round trip") {
    CacheManifest manifest;
    manifest.dataset_hash = "0123456789abcdef";
    manifest.train_fold = 1;
    manifest.test_fold = 2;
    manifest.total_test_actions = 42;
    manifest.technique_ids = {"a", "b"};
    manifest.class_labels = {"x", "y", "z"};
    const auto path = tmp.path / "manifest.json";
    write_cache_manifest(manifest, path);
    const CacheManifest loaded = read_cache_manifest(path);
    CHECK(loaded.dataset_hash == manifest.dataset_hash);
    CHECK(loaded.train_fold == 1);
    CHECK(loaded.test_fold == 2);
    CHECK(loaded.total_test_actions == 42);
    CHECK(loaded.technique_ids == manifest.technique_ids);
    CHECK(loaded.class_labels == manifest.class_labels);
  }
}
