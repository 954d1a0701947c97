#include "support.hpp"

#include "seal/scorer.hpp"

using namespace seal;

namespace {

ScorerInput random_input(CounterRng& rng) {
  const Trajectory ego = test::random_trajectory(rng, 40 + static_cast<int>(rng.below(51)));
  const Trajectory cand = test::random_trajectory(rng, kFutureSteps + 1, kCurrentStep);
  return encode_pair(ego, cand);
}

std::vector<CorpusEntry> small_corpus(int scenarios) {
  std::vector<CorpusEntry> out;
  for (const Scenario& s : synthetic_suite(21, scenarios, 1)) {
    const auto part = oracle_corpus(s, 3);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

}  // namespace

TEST_CASE("manual gradients match central differences") {
  for (bool per_head : {false, true}) {
    CounterRng rng(per_head ? 7 : 8);
    const ScorerModel model = ScorerModel::initialised(5);
    const ScorerInput input = random_input(rng);
    const CritScore target{0.3, 0.8};
    ScorerModel::Gradient grad(model);
    grad.zero();
    model.loss_and_gradient(input, target, per_head, &grad);
    const Eigen::VectorXd g = grad.flat();
    const Eigen::VectorXd theta = model.parameters();
    REQUIRE(g.size() == theta.size());
    REQUIRE(theta.size() == ScorerModel::parameter_count());

    ScorerModel probe = model;
    const double h = 1e-6;
    for (int k = 0; k < 100; ++k) {
      const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(theta.size())));
      Eigen::VectorXd t = theta;
      t[i] += h;
      probe.set_parameters(t);
      const double up = probe.loss_and_gradient(input, target, per_head, nullptr);
      t[i] -= 2 * h;
      probe.set_parameters(t);
      const double down = probe.loss_and_gradient(input, target, per_head, nullptr);
      const double fd = (up - down) / (2 * h);
      const double rel = std::abs(fd - g[i]) / std::max(1e-7, std::abs(fd) + std::abs(g[i]));
      CHECK(rel < 1e-4);
    }
  }
}

TEST_CASE("predictions stay in the unit square") {
  CounterRng rng(9);
  const ScorerModel model = ScorerModel::initialised(1);
  for (int i = 0; i < 1000; ++i) {
    const CritScore c = model.predict(random_input(rng));
    CHECK(c.f_coll >= 0.0);
    CHECK(c.f_coll <= 1.0);
    CHECK(c.f_diff >= 0.0);
    CHECK(c.f_diff <= 1.0);
  }
}

TEST_CASE("features are expressed in the candidate frame") {
  CounterRng rng(10);
  const ScorerModel model = ScorerModel::initialised(2);
  for (int i = 0; i < 100; ++i) {
    const Trajectory ego = test::random_trajectory(rng, 60);
    const Trajectory cand = test::random_trajectory(rng, kFutureSteps + 1, kCurrentStep);
    const CritScore a = predict_score(model, ego, cand);
    const CritScore b = predict_score(model, test::rigid(ego, 0, {100, 100}), test::rigid(cand, 0, {100, 100}));
    CHECK(std::abs(a.f_coll - b.f_coll) < 1e-9);
    CHECK(std::abs(a.f_diff - b.f_diff) < 1e-9);
    const CritScore c = predict_score(model, test::rigid(ego, 1.1, {-40, 7}), test::rigid(cand, 1.1, {-40, 7}));
    CHECK(std::abs(a.f_coll - c.f_coll) < 1e-9);
    CHECK(std::abs(a.f_diff - c.f_diff) < 1e-9);
  }
}

TEST_CASE("identical triples are memorised") {
  CounterRng rng(11);
  CorpusEntry e;
  e.ego_prev = test::random_trajectory(rng, 91);
  e.candidate = test::random_trajectory(rng, kFutureSteps + 1, kCurrentStep);
  e.score = {0.7, 0.4};
  std::vector<CorpusEntry> corpus;
  for (int i = 0; i < 500; ++i) {
    e.scenario_id = "s" + std::to_string(i % 10);
    e.candidate_index = i / 10;
    corpus.push_back(e);
  }
  ScorerTrainingOptions opt;
  opt.epochs = 200;
  const ScorerTrainingResult r = train_scorer(corpus, 0, opt);
  CHECK(r.validation_loss < 1e-4);
  CHECK(predict_score(r.model, e.ego_prev, e.candidate).sum() == doctest::Approx(1.1).epsilon(1e-2));
}

TEST_CASE("training is deterministic and rejects small corpora") {
  const auto corpus = small_corpus(16);
  REQUIRE(corpus.size() == 16 * kNumCandidates);
  ScorerTrainingOptions opt;
  opt.epochs = 3;
  const ScorerTrainingResult a = train_scorer(corpus, 4, opt), b = train_scorer(corpus, 4, opt);
  CHECK(a.model.parameters() == b.model.parameters());
  CHECK(a.validation_scenarios == b.validation_scenarios);
  CHECK(a.validation_loss == b.validation_loss);

  const std::vector<CorpusEntry> tiny(corpus.begin(), corpus.begin() + 499);
  CHECK_THROWS_AS(train_scorer(tiny, 4, opt), ValidationError);
}

TEST_CASE("validation split holds out whole scenarios") {
  const auto corpus = small_corpus(16);
  ScorerTrainingOptions opt;
  opt.epochs = 1;
  const auto r = train_scorer(corpus, 9, opt);
  CHECK(r.validation_scenarios.size() == 3);  // round(0.2 * 16)
}

TEST_CASE("model and corpus files round-trip") {
  const auto dir = test::scratch_dir("scorer_io");
  const ScorerModel m = ScorerModel::initialised(12);
  save_model(m, dir / "model.json");
  const ScorerModel back = load_model(dir / "model.json");
  CHECK(back.parameters() == m.parameters());
  CHECK(back.architecture_hash() == m.architecture_hash());
  CHECK(back.feature_mean == m.feature_mean);
  CHECK(back.feature_scale == m.feature_scale);

  const auto corpus = small_corpus(2);
  save_corpus(corpus, dir / "corpus.jsonl");
  const auto loaded = load_corpus(dir / "corpus.jsonl");
  REQUIRE(loaded.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) CHECK(corpus_line(loaded[i]) == corpus_line(corpus[i]));
  CHECK_THROWS_AS(parse_corpus_line("{\"scenario_id\": 3}"), ParseError);
}

TEST_CASE("oracle corpus: one scored triple per candidate against the baseline roll-out") {
  const Scenario s = generate_synthetic(3, Template::StraightMerge, 1);
  const auto corpus = oracle_corpus(s, 8);
  REQUIRE(corpus.size() == kNumCandidates);
  const Trajectory base = baseline_ego_rollout(s);
  const CandidateSet set = sample_candidates(s, 8);
  EgoHistory h;
  h.push(base);
  for (int i : {0, 13, 31}) {
    const auto& e = corpus[static_cast<std::size_t>(i)];
    CHECK(e.candidate_index == i);
    CHECK(e.ego_prev == base);
    CHECK(e.candidate == set.candidates[static_cast<std::size_t>(i)]);
    const CritScore o = oracle_score(s, e.candidate, h);
    CHECK(e.score.f_coll == o.f_coll);
    CHECK(e.score.f_diff == o.f_diff);
  }
}

TEST_CASE("learned ranking averages predicted sums over the history") {
  CounterRng rng(13);
  const ScorerModel model = ScorerModel::initialised(3);
  EgoHistory h;
  for (int i = 0; i < 3; ++i) h.push(test::random_trajectory(rng, 91));
  CandidateSet set;
  for (int i = 0; i < 6; ++i) set.candidates.push_back(test::random_trajectory(rng, kFutureSteps + 1, kCurrentStep));
  const Ranking r = rank_learned(model, set, h);
  REQUIRE(r.scores.size() == 6);
  std::vector<double> expect;
  for (const auto& c : set.candidates) {
    double sum = 0;
    for (const auto& e : h.entries()) sum += predict_score(model, e, c).sum();
    expect.push_back(sum / 3);
  }
  for (int i = 0; i < 6; ++i) CHECK(r.scores[static_cast<std::size_t>(i)] == doctest::Approx(expect[static_cast<std::size_t>(i)]));
  CHECK(r.best == static_cast<int>(std::max_element(expect.begin(), expect.end()) - expect.begin()));

  CandidateSet same;
  same.candidates.assign(4, set.candidates[0]);
  CHECK(rank_learned(model, same, h).best == 0);
  CHECK_THROWS_AS(rank_learned(model, set, EgoHistory()), ValidationError);
}

TEST_CASE("spearman basics") {
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1));
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1));
  CHECK(spearman({1, 2, 3, 4, 5}, {1, 4, 9, 16, 25}) == doctest::Approx(1));
}
