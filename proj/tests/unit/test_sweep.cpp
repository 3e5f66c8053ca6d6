#include <doctest.h>

#include "knnner/decode.hpp"
#include "knnner/error.hpp"
#include "knnner/eval.hpp"
#include "knnner/sweep.hpp"
#include "synthetic.hpp"

using namespace knnner;

namespace {

struct Fixture {
  Tagset ts = testing::small_tagset();
  Corpus train;
  Corpus dev;
  Datastore ds = Datastore::from_embeddings(ts, 1, std::vector<float>{1}, {MainLabel{0}});

  Fixture() {
    auto centers = testing::make_centers(ts.main_label_count(), 8, 21);
    testing::SyntheticOptions opt;
    opt.sentences = 30;
    opt.sigma = 0.2;
    train = testing::make_corpus(ts, centers, opt);
    opt.seed = 9;
    opt.sentences = 15;
    opt.flip_rate = 0.3;
    opt.id_prefix = "dev";
    dev = testing::make_corpus(ts, centers, opt);
    ds = build_datastore(train, ts);
  }

  EvalReport baseline() const {
    std::vector<SentenceEntities> gold, pred;
    for (const auto& r : dev.records) {
      gold.push_back(gold_entities(r, ts));
      pred.push_back({r.id, decode_entities(predict_baseline(r, ts), ts)});
    }
    return micro_prf(gold, pred, ts);
  }
};

}  // namespace

TEST_CASE("default grid") {
  SweepGrid grid;
  CHECK(grid.ks == std::vector<std::size_t>{8, 16, 32, 64, 128, 256, 512});
  REQUIRE(grid.lambdas.size() == 11);
  CHECK(grid.lambdas.front() == 0.0);
  CHECK(grid.lambdas[3] == 0.3);
  CHECK(grid.lambdas.back() == 1.0);
  CHECK(grid.tau == 1.0);
}

TEST_CASE("grid validation") {
  Fixture f;
  SweepGrid bad;
  bad.ks = {};
  CHECK_THROWS_AS(run_sweep(f.dev, f.ds, bad, f.ts), Error);
  bad = SweepGrid{};
  bad.ks = {8, 8};
  CHECK_THROWS_AS(run_sweep(f.dev, f.ds, bad, f.ts), Error);
  bad = SweepGrid{};
  bad.lambdas = {1.5};
  CHECK_THROWS_AS(run_sweep(f.dev, f.ds, bad, f.ts), Error);
  bad = SweepGrid{};
  bad.ks = {0};
  CHECK_THROWS_AS(run_sweep(f.dev, f.ds, bad, f.ts), Error);
}

TEST_CASE("single lambda=1 cell equals the baseline evaluation") {
  Fixture f;
  SweepGrid grid;
  grid.ks = {8};
  grid.lambdas = {1.0};
  auto result = run_sweep(f.dev, f.ds, grid, f.ts);
  REQUIRE(result.rows.size() == 1);
  auto base = f.baseline();
  CHECK(result.rows[0].f1 == base.f1);
  CHECK(result.rows[0].precision == base.precision);
  CHECK(result.rows[0].recall == base.recall);
  CHECK(result.best == result.rows[0]);
}

TEST_CASE("default sweep structure") {
  Fixture f;
  auto result = run_sweep(f.dev, f.ds, SweepGrid{}, f.ts);
  REQUIRE(result.rows.size() == 77);
  for (std::size_t i = 1; i < result.rows.size(); ++i) {
    const auto& a = result.rows[i - 1];
    const auto& b = result.rows[i];
    CHECK((a.k < b.k || (a.k == b.k && a.lambda < b.lambda)));
  }
  const SweepRow* first_lambda1 = nullptr;
  for (const auto& r : result.rows) {
    if (r.lambda != 1.0) continue;
    if (!first_lambda1) first_lambda1 = &r;
    CHECK(r.f1 == first_lambda1->f1);
    CHECK(r.precision == first_lambda1->precision);
  }
  for (const auto& r : result.rows) CHECK(r.f1 <= result.best.f1);

  auto csv = result.to_csv();
  CHECK(csv.rfind("k,lambda,precision,recall,f1\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 79);
  CHECK(csv.find("\n# best: k=") != std::string::npos);
  CHECK(csv == run_sweep(f.dev, f.ds, SweepGrid{}, f.ts).to_csv());
}

TEST_CASE("retrieve-once equals per-k retrieval") {
  Fixture f;
  SweepGrid grid;
  grid.ks = {1, 8, 64, 512};
  auto once = run_sweep(f.dev, f.ds, grid, f.ts, Retrieval::Once);
  auto per_k = run_sweep(f.dev, f.ds, grid, f.ts, Retrieval::PerK);
  CHECK(once.rows == per_k.rows);
  CHECK(once.best == per_k.best);
}

TEST_CASE("grid order in the input does not matter") {
  Fixture f;
  SweepGrid a;
  a.ks = {64, 8};
  a.lambdas = {1.0, 0.0, 0.5};
  SweepGrid b;
  b.ks = {8, 64};
  b.lambdas = {0.0, 0.5, 1.0};
  CHECK(run_sweep(f.dev, f.ds, a, f.ts).rows == run_sweep(f.dev, f.ds, b, f.ts).rows);
}

TEST_CASE("best-row tie breaking") {
  // All-O gold and an all-O store give F1 = 1 in every cell.
  Fixture f;
  for (auto& r : f.dev.records) {
    std::fill(r.gold_main->begin(), r.gold_main->end(), MainLabel::outside());
    for (auto& s : *r.gold_sub) s.clear();
    for (std::size_t i = 0; i < r.size(); ++i) {
      auto row = r.p_main->row(i);
      std::fill(row.begin(), row.end(), 0.0);
      row[0] = 1.0;
    }
  }
  auto only_o = Datastore::from_embeddings(f.ts, f.ds.dim(), f.ds.vectors(),
                                           std::vector<MainLabel>(f.ds.size(), MainLabel::outside()));
  SweepGrid grid;
  grid.ks = {16, 8};
  grid.lambdas = {0.2, 0.7};
  auto result = run_sweep(f.dev, only_o, grid, f.ts);
  for (const auto& r : result.rows) CHECK(r.f1 == 1.0);
  CHECK(result.best.k == 8);
  CHECK(result.best.lambda == 0.7);
}
