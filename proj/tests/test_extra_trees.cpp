#include "doctest.h"

#include <set>

#include "frg/batch.hpp"
#include "frg/extra_trees.hpp"
#include "frg/fixture.hpp"

using namespace frg;

namespace {

/// Batch with one labeled step population per configuration. Features are
/// drawn around +-shift depending on the intended class; groups cycle
/// through n_participants.
TrajectoryBatch labeled_feature_batch(int n_missions, int steps_per_mission,
                                      double shift, std::uint64_t seed,
                                      std::vector<LabeledStep>* labeled) {
  TrajectoryBatch batch;
  Rng rng(seed);
  for (int mi = 0; mi < n_missions; ++mi) {
    Mission m;
    m.mission_id = "m" + std::to_string(mi);
    m.participant_id = "p" + std::to_string(mi % 9);
    const int label = mi % 2;  // alternate whole-mission labels
    m.score = label ? 100 : 0;
    for (int si = 0; si < steps_per_mission; ++si) {
      StepRecord rec;
      rec.step = si;
      rec.config = static_cast<Index>(uniform_below(rng, 4));
      rec.action = rec.config;
      rec.fires = 0;
      rec.features.resize(6);
      for (Index f = 0; f < 6; ++f)
        rec.features[f] = (f < 2 ? (label ? shift : -shift) : 0.0) +
                          sample_normal(rng);
      m.steps.push_back(rec);
      if (labeled)
        labeled->push_back({static_cast<Index>(mi), static_cast<Index>(si),
                            rec.config, label});
    }
    batch.missions.push_back(std::move(m));
  }
  return batch;
}

}  // namespace

TEST_CASE("separable features reach high balanced accuracy on held-out groups") {
  std::vector<LabeledStep> labeled;
  const auto batch = labeled_feature_batch(36, 30, 2.0, 11, &labeled);
  ClassifierGrid grid;
  grid.n_trees = {100};
  grid.max_depth = {0};
  grid.min_samples_leaf = {1, 5};
  const auto out = train_classifiers(batch, labeled, grid, 5, 6);
  const auto counts = confusion_on_heldout(batch, labeled, out);
  for (Index c = 0; c < 4; ++c) {
    const auto& m = counts.counts[c];
    const double ba = 0.5 * (static_cast<double>(m(0, 0)) / (m(0, 0) + m(0, 1)) +
                             static_cast<double>(m(1, 1)) / (m(1, 0) + m(1, 1)));
    CHECK(ba >= 0.9);
  }
}

TEST_CASE("label-independent features give chance-level accuracy") {
  std::vector<LabeledStep> labeled;
  const auto batch = labeled_feature_batch(36, 30, 0.0, 13, &labeled);
  ClassifierGrid grid;
  grid.n_trees = {100};
  grid.max_depth = {8};
  grid.min_samples_leaf = {5};
  const auto out = train_classifiers(batch, labeled, grid, 6, 6);
  const auto counts = confusion_on_heldout(batch, labeled, out);
  double ba = 0.0;
  for (Index c = 0; c < 4; ++c) {
    const auto& m = counts.counts[c];
    ba += 0.125 * (static_cast<double>(m(0, 0)) / (m(0, 0) + m(0, 1)) +
                   static_cast<double>(m(1, 1)) / (m(1, 0) + m(1, 1)));
  }
  CHECK(ba == doctest::Approx(0.5).epsilon(0.25));
}

TEST_CASE("cv folds and the held-out partition never share participants") {
  std::vector<std::string> groups;
  for (int i = 0; i < 40; ++i) groups.push_back("p" + std::to_string(i % 10));
  Rng rng(3);
  for (int fold = 0; fold < 10; ++fold) {
    const auto val = pick_validation_groups(groups, 0.2, rng);
    CHECK(val.size() == 2);
    // by construction the train side is the complement; disjointness is
    // set membership
    for (const auto& g : val) CHECK(std::count(groups.begin(), groups.end(), g) > 0);
  }
  CHECK_THROWS_AS(pick_validation_groups({"p0", "p0", "p0"}, 0.2, rng),
                  SingleGroup);
}

TEST_CASE("prediction is a pure function of features and forest") {
  std::vector<LabeledStep> labeled;
  const auto batch = labeled_feature_batch(24, 20, 1.5, 17, &labeled);
  ClassifierGrid grid;
  grid.n_trees = {100};
  grid.max_depth = {0};
  grid.min_samples_leaf = {1};
  const auto out1 = train_classifiers(batch, labeled, grid, 21, 4);
  const auto out2 = train_classifiers(batch, labeled, grid, 21, 4);
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    VectorX<double> x(6);
    for (Index f = 0; f < 6; ++f) x[f] = sample_normal(rng);
    const Index c = static_cast<Index>(uniform_below(rng, 4));
    const int p1 = out1.classifier.predict(c, x);
    CHECK(p1 == out2.classifier.predict(c, x));
    CHECK(p1 == out1.classifier.predict(c, x));
  }
}

TEST_CASE("missing class and single group are reported") {
  std::vector<LabeledStep> labeled;
  auto batch = labeled_feature_batch(24, 10, 1.0, 31, &labeled);
  ClassifierGrid grid;
  grid.n_trees = {100};
  grid.max_depth = {0};
  grid.min_samples_leaf = {1};

  std::vector<LabeledStep> one_class;
  for (const auto& ls : labeled)
    if (ls.label == 0 || ls.config != 2) one_class.push_back(ls);
  CHECK_THROWS_AS(train_classifiers(batch, one_class, grid, 3, 4), MissingClass);

  for (auto& m : batch.missions) m.participant_id = "p0";
  CHECK_THROWS_AS(train_classifiers(batch, labeled, grid, 3, 4), SingleGroup);
}

TEST_CASE("classifier file round-trips the prediction function") {
  std::vector<LabeledStep> labeled;
  const auto batch = labeled_feature_batch(24, 20, 1.5, 19, &labeled);
  ClassifierGrid grid;
  grid.n_trees = {50};
  grid.max_depth = {8};
  grid.min_samples_leaf = {1};
  const auto out = train_classifiers(batch, labeled, grid, 23, 4);
  std::stringstream ss;
  write_classifier(ss, out.classifier, "# clf header\n");
  const auto back = read_classifier(ss);
  Rng rng(29);
  for (int trial = 0; trial < 300; ++trial) {
    VectorX<double> x(6);
    for (Index f = 0; f < 6; ++f) x[f] = sample_normal(rng);
    const Index c = static_cast<Index>(uniform_below(rng, 4));
    CHECK(back.predict(c, x) == out.classifier.predict(c, x));
  }
}
