#include "doctest.h"

#include <sstream>

#include "frg/batch.hpp"
#include "frg/fixture.hpp"
#include "oracles.hpp"

using namespace frg;

namespace {

TrajectoryBatch batch_with_scores(const std::vector<double>& scores) {
  TrajectoryBatch batch;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    Mission m;
    m.mission_id = "m" + std::to_string(i);
    m.participant_id = "p" + std::to_string(i % 6);
    m.score = scores[i];
    StepRecord rec;
    rec.step = 0;
    rec.config = 0;
    rec.action = 0;
    rec.fires = 0;
    rec.features = VectorX<double>::Zero(2);
    m.steps.push_back(rec);
    batch.missions.push_back(std::move(m));
  }
  return batch;
}

}  // namespace

TEST_CASE("quartile split on 1..8") {
  const auto batch = batch_with_scores({1, 2, 3, 4, 5, 6, 7, 8});
  const auto split = split_by_quartiles(batch);
  CHECK(split.q1_threshold == doctest::Approx(2.75));
  CHECK(split.q3_threshold == doctest::Approx(6.25));
  CHECK(split.low == std::vector<Index>{0, 1});
  CHECK(split.high == std::vector<Index>{6, 7});
  CHECK(split.mid == std::vector<Index>{2, 3, 4, 5});
}

TEST_CASE("quartile split sends threshold ties to mid") {
  const auto batch = batch_with_scores({5, 5, 5, 5, 5});
  const auto split = split_by_quartiles(batch);
  CHECK(split.low.empty());
  CHECK(split.high.empty());
  CHECK(split.mid.size() == 5);
}

TEST_CASE("quartile split partitions any batch") {
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> scores;
    const int n = 4 + static_cast<int>(uniform_below(rng, 80));
    for (int i = 0; i < n; ++i)
      scores.push_back(std::floor(uniform01(rng) * 12));
    const auto batch = batch_with_scores(scores);
    const auto split = split_by_quartiles(batch);
    std::vector<char> seen(n, 0);
    for (const auto& part : {split.low, split.mid, split.high})
      for (const Index i : part) {
        CHECK(!seen[i]);
        seen[i] = 1;
      }
    for (int i = 0; i < n; ++i) CHECK(seen[i]);
    for (const Index i : split.low) CHECK(scores[i] < split.q1_threshold);
    for (const Index i : split.high) CHECK(scores[i] > split.q3_threshold);
  }
}

TEST_CASE("uniform scores give quarter-sized tails") {
  Rng rng(5);
  std::vector<double> scores;
  for (int i = 0; i < 72; ++i) scores.push_back(uniform01(rng));
  const auto split = split_by_quartiles(batch_with_scores(scores));
  CHECK(split.low.size() == 18);
  CHECK(split.high.size() == 18);
  CHECK(split.mid.size() == 36);

  // sort-and-count oracle: Q1 strictly above exactly the low missions
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  std::size_t below = 0;
  for (const double s : scores)
    if (s < split.q1_threshold) ++below;
  CHECK(below == split.low.size());
}

TEST_CASE("too few missions is an error") {
  CHECK_THROWS_AS(split_by_quartiles(batch_with_scores({1, 2, 3})),
                  TooFewMissions);
}

TEST_CASE("label_steps labels tails only") {
  auto batch = batch_with_scores({1, 2, 3, 4, 5, 6, 7, 8});
  for (auto& m : batch.missions)  // give missions multiple steps
    for (int extra = 0; extra < 4; ++extra) {
      auto rec = m.steps[0];
      rec.step = extra + 1;
      m.steps.push_back(rec);
    }
  const auto split = split_by_quartiles(batch);
  const auto labeled = label_steps(batch, split);
  std::size_t n_low = 0, n_high = 0;
  for (const auto& ls : labeled) {
    if (ls.label == 0) ++n_low;
    if (ls.label == 1) ++n_high;
    // mid missions emit nothing
    for (const Index mi : split.mid) CHECK(ls.mission != mi);
  }
  CHECK(n_low == 2 * 5);
  CHECK(n_high == 2 * 5);
}

TEST_CASE("batch file round-trips") {
  const auto fx = build_frg_fixture();
  SyntheticBatchConfig cfg;
  cfg.n_missions = 6;
  cfg.seed = 42;
  const auto batch = make_synthetic_batch(collection_model(fx.model), cfg);
  std::stringstream ss;
  write_batch(ss, batch, "# header\n");
  const auto back = read_batch(ss);
  REQUIRE(back.missions.size() == batch.missions.size());
  for (std::size_t mi = 0; mi < batch.missions.size(); ++mi) {
    const auto& a = batch.missions[mi];
    const auto& b = back.missions[mi];
    CHECK(a.mission_id == b.mission_id);
    CHECK(a.participant_id == b.participant_id);
    CHECK(a.score == b.score);
    REQUIRE(a.steps.size() == b.steps.size());
    for (std::size_t si = 0; si < a.steps.size(); ++si) {
      CHECK(a.steps[si].config == b.steps[si].config);
      CHECK(a.steps[si].action == b.steps[si].action);
      CHECK(a.steps[si].fires == b.steps[si].fires);
      CHECK((a.steps[si].features - b.steps[si].features).cwiseAbs().maxCoeff() == 0.0);
    }
  }
  // byte-identical second serialization
  std::stringstream ss2;
  write_batch(ss2, back, "# header\n");
  std::stringstream ss3;
  write_batch(ss3, batch, "# header\n");
  CHECK(ss2.str() == ss3.str());
}

TEST_CASE("malformed batch rows name the line") {
  std::stringstream ss;
  ss << "mission_id,participant_id,step,mode,alarm,action,fires,score,f1\n";
  ss << "m0,p0,0,manual,on,manual_on,0,5,0.5\n";
  ss << "m0,p0,1,manual,bogus,manual_on,0,5,0.5\n";
  CHECK_THROWS_WITH_AS(read_batch(ss), doctest::Contains("line 3"),
                       std::runtime_error);

  std::stringstream missing;
  missing << "mission_id,participant_id,step,mode,alarm,action,fires,score,f1\n";
  missing << "m0,p0,0,manual,on,manual_on,0,5\n";
  CHECK_THROWS_AS(read_batch(missing), std::runtime_error);
}

TEST_CASE("synthetic batch is deterministic and structurally sound") {
  const auto fx = build_frg_fixture();
  const auto world = collection_model(fx.model);
  SyntheticBatchConfig cfg;
  cfg.n_missions = 24;
  cfg.seed = 7;
  const auto b1 = make_synthetic_batch(world, cfg);
  const auto b2 = make_synthetic_batch(world, cfg);
  std::stringstream s1, s2;
  write_batch(s1, b1);
  write_batch(s2, b2);
  CHECK(s1.str() == s2.str());

  for (const auto& m : b1.missions) {
    CHECK(!m.steps.empty());
    CHECK(m.steps.size() <= 60);
    double total = 0.0;
    CHECK(m.steps[0].config == 0);  // missions start in manual mode, alarms on
    for (std::size_t si = 0; si < m.steps.size(); ++si) {
      total += m.steps[si].fires;
      if (si > 0)
        CHECK(m.steps[si].config ==
              layout::config_of_action(m.steps[si - 1].action));
    }
    CHECK(m.score == total);
  }
}

TEST_CASE("estimate_rewards averages fires per assigned state") {
  TrajectoryBatch batch;
  Mission m;
  m.mission_id = "m0";
  m.participant_id = "p0";
  m.score = 3;
  for (int i = 0; i < 3; ++i) {
    StepRecord rec;
    rec.step = i;
    rec.config = 3;
    rec.action = 3;
    rec.fires = 1.0;
    rec.features = VectorX<double>::Zero(1);
    m.steps.push_back(rec);
  }
  batch.missions.push_back(m);
  // all steps assigned to a_p_off
  std::vector<std::vector<Index>> assigned{{6, 6, 6}};
  std::vector<Index> unvisited;
  const auto reward = estimate_rewards(batch, assigned, &unvisited);
  CHECK(reward[6] == doctest::Approx(1.0));
  for (Index s = 0; s < 9; ++s)
    if (s != 6) CHECK(reward[s] == 0.0);
  CHECK(unvisited.size() == 7);  // everything except a_p_off and g

  // no fires anywhere -> all-zero rewards
  for (auto& st : batch.missions[0].steps) st.fires = 0.0;
  const auto zero = estimate_rewards(batch, assigned);
  CHECK(zero.cwiseAbs().maxCoeff() == 0.0);
}
