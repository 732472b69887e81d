#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "skelfuse/core_ops.hpp"
#include "skelfuse/dataset_io.hpp"
#include "skelfuse/error.hpp"
#include "skelfuse/synthetic.hpp"
#include "test_support.hpp"

using namespace skelfuse;
using testsupport::TempDir;

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Dataset random_dataset(Rng& rng, int joints, int actions) {
  Dataset dataset;
  dataset.body_model = synthetic_body_model(joints);
  std::set<std::string> classes;
  for (int i = 0; i < actions; ++i) {
    Action a = testsupport::random_action(rng, joints, 2 + static_cast<int>(rng.below(6)),
                                          "act_" + std::to_string(i));
    const std::string label = "class_" + std::to_string(rng.below(3));
    a.class_label = label;
    classes.insert(label);
    dataset.actions.push_back(std::move(a));
  }
  dataset.classes.assign(classes.begin(), classes.end());
  return dataset;
}

}  // namespace

TEST_CASE("dataset save/load round trip") {
  TempDir tmp("core_io");
  Rng rng(7);
  const Dataset dataset = random_dataset(rng, 6, 5);
  const auto path = tmp.path / "ds.jsonl";
  save_dataset(dataset, path);

  const Dataset loaded = load_dataset(path, dataset.body_model);
  REQUIRE(loaded.actions.size() == dataset.actions.size());
  for (std::size_t i = 0; i < dataset.actions.size(); ++i) {
    CHECK(loaded.actions[i].id == dataset.actions[i].id);
    CHECK(loaded.actions[i].class_label == dataset.actions[i].class_label);
    CHECK(loaded.actions[i].fps == dataset.actions[i].fps);
    REQUIRE(loaded.actions[i].poses.size() == dataset.actions[i].poses.size());
    for (std::size_t p = 0; p < dataset.actions[i].poses.size(); ++p) {
      for (std::size_t j = 0; j < dataset.actions[i].poses[p].joints.size(); ++j) {
        CHECK(loaded.actions[i].poses[p].joints[j] ==
              dataset.actions[i].poses[p].joints[j]);
      }
    }
  }

  // canonical files reproduce byte for byte
  const auto path2 = tmp.path / "ds2.jsonl";
  save_dataset(loaded, path2);
  CHECK(slurp(path) == slurp(path2));
}

TEST_CASE("dataset load keeps two actions and their ids") {
  TempDir tmp("core_two");
  const auto path = tmp.path / "two.jsonl";
  {
    std::ofstream out(path);
    out << R"({"id":"walk_01","class":"walk","fps":120,"frames":[[[0,1,0],[0.1,0.9,0],[-0.1,0.9,0],[0.1,0.5,0],[-0.1,0.5,0],[0,1.7,0]]]})"
        << "\n";
    out << R"({"id":"run_01","class":null,"fps":120,"frames":[[[0,1,0],[0.1,0.9,0],[-0.1,0.9,0],[0.1,0.5,0],[-0.1,0.5,0],[0,1.7,0]]]})"
        << "\n";
  }
  const Dataset loaded = load_dataset(path, synthetic_body_model(6));
  REQUIRE(loaded.actions.size() == 2);
  CHECK(loaded.actions[0].id == "walk_01");
  CHECK(loaded.actions[1].id == "run_01");
  CHECK(loaded.actions[0].class_label.has_value());
  CHECK_FALSE(loaded.actions[1].class_label.has_value());
  CHECK(loaded.classes == std::vector<std::string>{"walk"});
}

TEST_CASE("dataset load rejects bad records") {
  TempDir tmp("core_bad");
  const BodyModelDef model = synthetic_body_model(6);
  const char* frame =
      "[[0,1,0],[0.1,0.9,0],[-0.1,0.9,0],[0.1,0.5,0],[-0.1,0.5,0],[0,1.7,0]]";

  SUBCASE("empty action") {
    const auto path = tmp.path / "empty.jsonl";
    std::ofstream(path) << R"({"id":"x","class":null,"fps":30,"frames":[]})" << "\n";
    CHECK_THROWS_WITH_AS(load_dataset(path, model),
                         doctest::Contains("empty action"), DataError);
  }
  SUBCASE("malformed json reports the line") {
    const auto path = tmp.path / "mal.jsonl";
    {
      std::ofstream out(path);
      out << R"({"id":"a","class":null,"fps":30,"frames":[)" << frame << "]}\n";
      out << "{oops\n";
    }
    CHECK_THROWS_WITH_AS(load_dataset(path, model), doctest::Contains(":2:"), DataError);
  }
  SUBCASE("duplicate id") {
    const auto path = tmp.path / "dup.jsonl";
    {
      std::ofstream out(path);
      out << R"({"id":"a","class":null,"fps":30,"frames":[)" << frame << "]}\n";
      out << R"({"id":"a","class":null,"fps":30,"frames":[)" << frame << "]}\n";
    }
    CHECK_THROWS_WITH_AS(load_dataset(path, model), doctest::Contains("duplicate"),
                         DataError);
  }
  SUBCASE("joint count mismatch") {
    const auto path = tmp.path / "joints.jsonl";
    std::ofstream(path) << R"({"id":"a","class":null,"fps":30,"frames":[[[0,0,0]]]})"
                        << "\n";
    CHECK_THROWS_AS(load_dataset(path, model), DataError);
  }
  SUBCASE("unknown key") {
    const auto path = tmp.path / "extra.jsonl";
    std::ofstream(path) << R"({"id":"a","class":null,"fps":30,"frames":[)" << frame
                        << R"(],"bogus":1})" << "\n";
    CHECK_THROWS_WITH_AS(load_dataset(path, model), doctest::Contains("unknown key"),
                         DataError);
  }
}

TEST_CASE("save_dataset writes one record per action") {
  TempDir tmp("core_lines");
  Dataset dataset;
  dataset.body_model = synthetic_body_model(6);

  SUBCASE("zero actions -> zero records") {
    const auto path = tmp.path / "empty.jsonl";
    save_dataset(dataset, path);
    CHECK(slurp(path).empty());
  }
  SUBCASE("one action -> one line") {
    Rng rng(1);
    dataset.actions.push_back(testsupport::random_action(rng, 6, 3, "solo"));
    const auto path = tmp.path / "one.jsonl";
    save_dataset(dataset, path);
    const std::string text = slurp(path);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1);
  }
}

TEST_CASE("downsample") {
  Rng rng(11);

  SUBCASE("900 frames at 120 fps, factor 10") {
    Action a = testsupport::random_action(rng, 2, 900, "long", 120.0);
    const Action d = downsample(a, 10);
    CHECK(d.poses.size() == 90);
    CHECK(d.fps == doctest::Approx(12.0));
  }
  SUBCASE("factor 1 is the identity") {
    const Action a = testsupport::random_action(rng, 3, 17, "same", 30.0);
    const Action d = downsample(a, 1);
    REQUIRE(d.poses.size() == a.poses.size());
    CHECK(d.fps == a.fps);
    for (std::size_t i = 0; i < a.poses.size(); ++i) {
      CHECK(d.poses[i].joints[0] == a.poses[i].joints[0]);
    }
  }
  SUBCASE("13 frames, factor 10 keeps indices 0 and 10") {
    const Action a = testsupport::line_action(
        {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
    const Action d = downsample(a, 10);
    // index-enumeration oracle: kept indices are the multiples of the factor
    std::vector<double> expected;
    for (std::size_t i = 0; i < a.poses.size(); i += 10) {
      expected.push_back(a.poses[i].joints[0].x);
    }
    REQUIRE(d.poses.size() == expected.size());
    CHECK(d.poses.size() == 2);
    CHECK(d.poses[0].joints[0].x == expected[0]);
    CHECK(d.poses[1].joints[0].x == expected[1]);
  }
  SUBCASE("length is ceil(l / factor)") {
    for (int trial = 0; trial < 200; ++trial) {
      const int l = 1 + static_cast<int>(rng.below(40));
      const int f = 1 + static_cast<int>(rng.below(12));
      const Action a = testsupport::random_action(rng, 1, l);
      const Action d = downsample(a, static_cast<std::size_t>(f));
      CHECK(d.poses.size() == static_cast<std::size_t>((l + f - 1) / f));
      CHECK_FALSE(d.poses.empty());
    }
  }
  SUBCASE("factor 0 errors") {
    const Action a = testsupport::line_action({1, 2});
    CHECK_THROWS_AS(downsample(a, 0), DataError);
  }
}

TEST_CASE("pose dissimilarity") {
  Rng rng(23);

  SUBCASE("identical poses -> 0") {
    const Pose p = testsupport::random_pose(rng, 5);
    CHECK(pose_dissimilarity(p, p) == 0.0);
  }
  SUBCASE("per-joint unit shift sums to the joint count") {
    const int j = 7;
    Pose a = testsupport::random_pose(rng, j);
    Pose b = a;
    for (Vec3& v : b.joints) v.x += 1.0;
    CHECK(pose_dissimilarity(a, b) == doctest::Approx(static_cast<double>(j)).epsilon(1e-12));
  }
  SUBCASE("matches the per-joint-distance oracle") {
    for (int trial = 0; trial < 50; ++trial) {
      const int j = 1 + static_cast<int>(rng.below(8));
      const Pose a = testsupport::random_pose(rng, j);
      const Pose b = testsupport::random_pose(rng, j);
      double expected = 0.0;
      for (int i = 0; i < j; ++i) {
        const double dx = a.joints[static_cast<std::size_t>(i)].x - b.joints[static_cast<std::size_t>(i)].x;
        const double dy = a.joints[static_cast<std::size_t>(i)].y - b.joints[static_cast<std::size_t>(i)].y;
        const double dz = a.joints[static_cast<std::size_t>(i)].z - b.joints[static_cast<std::size_t>(i)].z;
        expected += std::sqrt(dx * dx + dy * dy + dz * dz);
      }
      CHECK(pose_dissimilarity(a, b) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
  SUBCASE("metric properties") {
    for (int trial = 0; trial < 100; ++trial) {
      const int j = 1 + static_cast<int>(rng.below(5));
      const Pose a = testsupport::random_pose(rng, j);
      const Pose b = testsupport::random_pose(rng, j);
      const Pose c = testsupport::random_pose(rng, j);
      const double ab = pose_dissimilarity(a, b);
      const double ba = pose_dissimilarity(b, a);
      const double ac = pose_dissimilarity(a, c);
      const double cb = pose_dissimilarity(c, b);
      CHECK(ab >= 0.0);
      CHECK(ab == ba);
      CHECK(ab <= ac + cb + 1e-12);                 // triangle inequality
      CHECK(pose_dissimilarity(a, a) == 0.0);       // identity of indiscernibles
    }
  }
  SUBCASE("joint count mismatch errors") {
    const Pose a = testsupport::random_pose(rng, 2);
    const Pose b = testsupport::random_pose(rng, 3);
    CHECK_THROWS_AS(pose_dissimilarity(a, b), DataError);
  }
}

TEST_CASE("thighbone length") {
  BodyModelDef model = synthetic_body_model(6);  // thighbone = (1, 3)

  SUBCASE("constant bone") {
    Action a;
    a.id = "t";
    a.fps = 30.0;
    for (int i = 0; i < 4; ++i) {
      Pose pose;
      pose.joints.assign(6, Vec3{});
      pose.joints[1] = {0, 0, 0};
      pose.joints[3] = {0, -0.4, 0};
      a.poses.push_back(pose);
    }
    CHECK(thighbone_length(a, model) == doctest::Approx(0.4).epsilon(1e-12));
  }
  SUBCASE("mean of 0.4 and 0.6 is 0.5") {
    Action a;
    a.id = "t";
    a.fps = 30.0;
    for (double len : {0.4, 0.6}) {
      Pose pose;
      pose.joints.assign(6, Vec3{});
      pose.joints[3] = {0, -len, 0};
      a.poses.push_back(pose);
    }
    CHECK(thighbone_length(a, model) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("matches the brute-force per-pose mean") {
    Rng rng(5);
    const Action a = testsupport::random_action(rng, 6, 9, "rand");
    double expected = 0.0;
    for (const Pose& pose : a.poses) {
      expected += (pose.joints[1] - pose.joints[3]).norm();
    }
    expected /= static_cast<double>(a.poses.size());
    CHECK(thighbone_length(a, model) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("degenerate bone in every pose errors") {
    Action a;
    a.id = "t";
    a.fps = 30.0;
    Pose pose;
    pose.joints.assign(6, Vec3{1, 2, 3});
    a.poses.push_back(pose);
    CHECK_THROWS_WITH_AS(thighbone_length(a, model), doctest::Contains("degenerate"),
                         DataError);
  }
}

namespace {

Dataset dataset_with_class_sizes(const std::vector<int>& sizes) {
  Dataset dataset;
  dataset.body_model = synthetic_body_model(6);
  Rng rng(99);
  int serial = 0;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    const std::string label = "class_" + std::to_string(1000 + c);
    dataset.classes.push_back(label);
    for (int i = 0; i < sizes[c]; ++i) {
      Action a = testsupport::random_action(rng, 6, 2, "a0000" + std::to_string(serial++));
      a.class_label = label;
      dataset.actions.push_back(std::move(a));
    }
  }
  return dataset;
}

std::map<std::string, std::pair<int, int>> fold_counts_by_class(const Dataset& dataset,
                                                                const FoldSplit& split) {
  std::map<std::string, std::pair<int, int>> counts;
  for (const Action& a : dataset.actions) {
    auto& c = counts[*a.class_label];
    if (split.assignment.at(a.id) == 1) {
      ++c.first;
    } else {
      ++c.second;
    }
  }
  return counts;
}

}  // namespace

TEST_CASE("balanced two-fold split") {
  SUBCASE("a class of 4 splits 2/2") {
    const Dataset d = dataset_with_class_sizes({4});
    const FoldSplit split = balanced_two_fold_split(d, 3);
    const auto counts = fold_counts_by_class(d, split);
    CHECK(counts.begin()->second.first == 2);
    CHECK(counts.begin()->second.second == 2);
  }
  SUBCASE("a class of 5 splits 3/2 one way or the other") {
    const Dataset d = dataset_with_class_sizes({5});
    const FoldSplit split = balanced_two_fold_split(d, 3);
    const auto counts = fold_counts_by_class(d, split);
    const auto [f1, f2] = counts.begin()->second;
    CHECK(f1 + f2 == 5);
    CHECK(std::abs(f1 - f2) == 1);
  }
  SUBCASE("surplus alternates, so equal totals stay equal") {
    // 130 classes, 2328 actions: 118 even classes of 18 plus 12 odd classes
    // of 17; the twelve surpluses must alternate 1,2,1,2,...
    std::vector<int> sizes(130, 18);
    for (int i = 0; i < 12; ++i) sizes[static_cast<std::size_t>(i * 10)] = 17;
    const Dataset d = dataset_with_class_sizes(sizes);
    REQUIRE(d.actions.size() == 2328);
    const FoldSplit split = balanced_two_fold_split(d, 42);
    int fold1 = 0;
    for (const auto& [id, fold] : split.assignment) {
      if (fold == 1) ++fold1;
    }
    CHECK(fold1 == 1164);
    CHECK(split.assignment.size() - static_cast<std::size_t>(fold1) == 1164);
  }
  SUBCASE("per-class balance, full coverage, disjoint folds") {
    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<int> sizes;
      const int classes = 1 + static_cast<int>(rng.below(8));
      for (int c = 0; c < classes; ++c) sizes.push_back(1 + static_cast<int>(rng.below(9)));
      const Dataset d = dataset_with_class_sizes(sizes);
      const FoldSplit split = balanced_two_fold_split(d, rng.raw());
      CHECK(split.assignment.size() == d.actions.size());  // union covers everything
      for (const auto& [label, counts] : fold_counts_by_class(d, split)) {
        CHECK(std::abs(counts.first - counts.second) <= 1);
      }
    }
  }
  SUBCASE("deterministic for a fixed seed") {
    const Dataset d = dataset_with_class_sizes({5, 7, 2});
    const FoldSplit a = balanced_two_fold_split(d, 123);
    const FoldSplit b = balanced_two_fold_split(d, 123);
    CHECK(a.assignment == b.assignment);
    const FoldSplit c = balanced_two_fold_split(d, 124);
    CHECK(a.assignment != c.assignment);
  }
  SUBCASE("unlabeled action errors") {
    Dataset d = dataset_with_class_sizes({3});
    d.actions.front().class_label.reset();
    CHECK_THROWS_WITH_AS(balanced_two_fold_split(d, 0), doctest::Contains("unlabeled"),
                         DataError);
  }
}

TEST_CASE("fold split file round trip") {
  TempDir tmp("core_folds");
  const Dataset d = dataset_with_class_sizes({4, 5});
  const FoldSplit split = balanced_two_fold_split(d, 9);
  const auto path = tmp.path / "folds.csv";
  save_fold_split(split, path);
  const FoldSplit loaded = load_fold_split(path);
  CHECK(loaded.assignment == split.assignment);
}

TEST_CASE("body model file round trip and validation") {
  TempDir tmp("core_bm");
  const BodyModelDef model = synthetic_body_model(8);
  const auto path = tmp.path / "bm.json";
  save_body_model(model, path);
  const BodyModelDef loaded = load_body_model(path);
  CHECK(loaded.joint_names == model.joint_names);
  CHECK(loaded.root_index == model.root_index);
  CHECK(loaded.thighbone == model.thighbone);
  CHECK(loaded.height_chains == model.height_chains);
  CHECK(loaded.subsets == model.subsets);

  BodyModelDef bad = model;
  bad.left_hip_index = bad.right_hip_index;
  CHECK_THROWS_AS(validate_body_model(bad), DataError);

  BodyModelDef bad2 = model;
  bad2.subsets["no_root"] = {1, 2};
  CHECK_THROWS_WITH_AS(validate_body_model(bad2), doctest::Contains("root"), DataError);
}
