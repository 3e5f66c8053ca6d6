// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "knnner/corpus_io.hpp"
#include "knnner/datastore.hpp"
#include "knnner/decode.hpp"
#include "knnner/eval.hpp"
#include "knnner/fileutil.hpp"
#include "knnner/knn_inference.hpp"
#include "knnner/sweep.hpp"
#include "oracles.hpp"
#include "process.hpp"
#include "synthetic.hpp"

using namespace knnner;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;

  void fail(std::string why) {
    if (ok) detail = std::move(why);
    ok = false;
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<SentenceEntities> decode_all(const Corpus& c, const Tagset& ts,
                                         const std::function<std::vector<TokenPrediction>(const SentenceRecord&)>& f) {
  std::vector<SentenceEntities> out;
  for (const auto& rec : c.records) out.push_back({rec.id, decode_entities(f(rec), ts)});
  return out;
}

bool same_entities(const std::vector<SentenceEntities>& a, const std::vector<SentenceEntities>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].id != b[i].id || a[i].entities != b[i].entities) return false;
  return true;
}

Outcome oracle_equivalence() {
  auto t0 = Clock::now();
  Outcome out;
  auto ts = testing::small_tagset();
  std::mt19937_64 rng(2024);
  const std::size_t dims[] = {4, 16, 64};
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::uniform_int_distribution<std::uint32_t> label(0, ts.main_label_count() - 1);
  std::size_t compared = 0;
  for (int store = 0; store < 200 && out.ok; ++store) {
    std::size_t dim = dims[store % 3];
    std::size_t n = std::uniform_int_distribution<std::size_t>(1, 10000)(rng);
    std::vector<float> emb(n * dim);
    std::vector<MainLabel> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Every tenth row repeats an earlier one so exact ties occur.
      if (i > 0 && i % 10 == 0) {
        std::size_t src = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
        std::copy_n(emb.begin() + src * dim, dim, emb.begin() + i * dim);
      } else {
        for (std::size_t j = 0; j < dim; ++j) emb[i * dim + j] = normal(rng);
      }
      labels[i] = MainLabel{label(rng)};
    }
    auto ds = Datastore::from_embeddings(ts, dim, emb, labels);
    for (int q = 0; q < 10 && out.ok; ++q) {
      std::vector<float> query(dim);
      if (q % 5 == 0) {
        // Query equal to a stored row puts ties at the very top.
        auto row = ds.vector(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
        std::copy(row.begin(), row.end(), query.begin());
      } else {
        for (auto& x : query) x = normal(rng);
      }
      for (std::size_t k : {1, 8, 512}) {
        auto got = knn_search(ds, query, k);
        auto want = testing::naive_knn(ds, query, k);
        ++compared;
        if (got != want) {
          out.fail(fmt::format("store {} (n={}, dim={}) query {} k={} differs from the full scan", store, n,
                               dim, q, k));
          break;
        }
      }
    }
  }
  double secs = seconds_since(t0);
  if (out.ok && secs >= 60.0) out.fail(fmt::format("took {:.1f} s", secs));
  if (out.ok) out.detail = fmt::format("{} searches identical, {:.1f} s", compared, secs);
  return out;
}

Outcome hand_value() {
  Outcome out;
  MainLabel a{1}, b{3};
  NeighborList nbrs{{{0, 1.0, a}, {1, 1.0, b}, {2, 0.0, a}}};
  auto p = knn_distribution(nbrs, 1.0, 9);
  if (std::abs(p[a.value] - 0.57769) > 1e-5 || std::abs(p[b.value] - 0.42231) > 1e-5)
    out.fail(fmt::format("got ({:.6f}, {:.6f})", p[a.value], p[b.value]));
  else
    out.detail = fmt::format("P = ({:.6f}, {:.6f})", p[a.value], p[b.value]);
  return out;
}

Outcome boundary_collapse() {
  Outcome out;
  auto ts = testing::small_tagset();
  auto centers = testing::make_centers(ts.main_label_count(), 16, 31);
  testing::SyntheticOptions opt;
  opt.sentences = 80;
  opt.sigma = 0.2;
  auto train = testing::make_corpus(ts, centers, opt);
  opt.sentences = 50;
  opt.min_len = opt.max_len = 10;
  opt.flip_rate = 0.3;
  opt.seed = 32;
  opt.id_prefix = "dev";
  auto dev = testing::make_corpus(ts, centers, opt);
  if (dev.token_count() != 500) {
    out.fail(fmt::format("fixture has {} tokens", dev.token_count()));
    return out;
  }
  auto ds = build_datastore(train, ts);
  auto baseline = decode_all(dev, ts, [&](const SentenceRecord& r) { return predict_baseline(r, ts); });

  for (std::size_t k : SweepGrid{}.ks) {
    KnnConfig one{k, 1.0, 1.0};
    auto at_one = decode_all(dev, ts, [&](const SentenceRecord& r) { return predict_tokens(r, ds, one, ts); });
    if (!same_entities(at_one, baseline)) out.fail(fmt::format("lambda=1 differs from baseline at k={}", k));

    KnnConfig zero{k, 0.0, 1.0};
    auto at_zero = decode_all(dev, ts, [&](const SentenceRecord& r) { return predict_tokens(r, ds, zero, ts); });
    auto knn_only = decode_all(dev, ts, [&](const SentenceRecord& r) {
      std::vector<TokenPrediction> preds;
      for (std::size_t i = 0; i < r.size(); ++i) {
        auto p = knn_distribution(knn_search(ds, r.emb->row(i), k), 1.0, ts.main_label_count());
        preds.push_back({p.argmax(), threshold_subtypes(r.p_sub->row(i))});
      }
      return preds;
    });
    if (!same_entities(at_zero, knn_only)) out.fail(fmt::format("lambda=0 differs from KNN-only at k={}", k));
  }
  if (out.ok) out.detail = fmt::format("500 tokens, {} k values", SweepGrid{}.ks.size());
  return out;
}

Outcome normalization() {
  Outcome out;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> sim(-1.0, 1.0);
  double worst = 0.0;
  for (int draw = 0; draw < 10000; ++draw) {
    std::size_t labels = draw % 2 ? 9 : 43;
    std::size_t n = std::uniform_int_distribution<std::size_t>(1, 64)(rng);
    // Labels come from a random subset so some are always absent.
    std::size_t used = std::uniform_int_distribution<std::size_t>(1, labels - 1)(rng);
    NeighborList nbrs;
    for (std::uint32_t i = 0; i < n; ++i) {
      auto l = static_cast<std::uint32_t>(std::uniform_int_distribution<std::size_t>(0, used - 1)(rng));
      nbrs.items.push_back({i, sim(rng), MainLabel{l}});
    }
    double tau = std::pow(10.0, -2.0 + 3.0 * unit(rng));
    double lambda = unit(rng);
    std::vector<double> row(labels);
    double z = 0.0;
    for (auto& v : row) z += (v = -std::log(1.0 - unit(rng)));
    for (auto& v : row) v /= z;

    auto p_knn = knn_distribution(nbrs, tau, labels);
    auto p_final = interpolate(LabelDistribution::from_row(row), p_knn, lambda);
    worst = std::max({worst, std::abs(p_knn.sum() - 1.0), std::abs(p_final.sum() - 1.0)});
    std::vector<bool> present(labels, false);
    for (const auto& nb : nbrs.items) present[nb.label.value] = true;
    for (std::size_t l = 0; l < labels; ++l) {
      if (!present[l] && p_knn[l] != 0.0) out.fail(fmt::format("draw {}: absent label {} has mass", draw, l));
    }
  }
  if (worst > 1e-6) out.fail(fmt::format("sum deviates by {:.3g}", worst));
  if (out.ok) out.detail = fmt::format("10000 draws, max |sum-1| = {:.2g}", worst);
  return out;
}

struct CorrectionFixture {
  Tagset ts = testing::small_tagset();
  Corpus train;
  Corpus dev;

  CorrectionFixture() {
    auto centers = testing::make_centers(ts.main_label_count(), 32, 41);
    testing::SyntheticOptions opt;
    opt.sentences = 400;
    opt.sigma = 0.05;
    train = testing::make_corpus(ts, centers, opt);
    opt.sentences = 150;
    opt.flip_rate = 0.3;
    opt.seed = 42;
    opt.id_prefix = "dev";
    dev = testing::make_corpus(ts, centers, opt);
  }
};

Outcome knn_corrects_baseline(const CorrectionFixture& f) {
  auto t0 = Clock::now();
  Outcome out;
  auto ds = build_datastore(f.train, f.ts);
  auto result = run_sweep(f.dev, ds, SweepGrid{}, f.ts);
  double f1_at_one = -1.0;
  const SweepRow* best_mixed = nullptr;
  for (const auto& r : result.rows) {
    if (r.lambda == 1.0) {
      f1_at_one = r.f1;
    } else if (!best_mixed || r.f1 > best_mixed->f1) {
      best_mixed = &r;
    }
  }
  double secs = seconds_since(t0);
  if (!best_mixed || !(best_mixed->f1 > f1_at_one))
    out.fail(fmt::format("best lambda<1 F1 {:.6f} does not exceed lambda=1 F1 {:.6f}",
                         best_mixed ? best_mixed->f1 : 0.0, f1_at_one));
  if (!(result.best.lambda < 1.0)) out.fail("sweep best row has lambda=1");
  if (secs >= 120.0) out.fail(fmt::format("took {:.1f} s", secs));
  if (out.ok)
    out.detail = fmt::format("F1 {:.4f} at k={} lambda={} vs {:.4f} at lambda=1, {:.1f} s", best_mixed->f1,
                             best_mixed->k, best_mixed->lambda, f1_at_one, secs);
  return out;
}

Outcome o_dominance() {
  Outcome out;
  auto ts = testing::small_tagset();
  const std::size_t dim = 32, entity_labels = ts.main_label_count() - 1;
  const std::size_t tight = 6, o_per_cluster = 600;
  const double cos_theta = 0.7, sin_theta = std::sqrt(1.0 - cos_theta * cos_theta);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 1.0);

  // Entity label l has center e_{l-1}. O entries mix that center with a
  // direction from the last (dim - entity_labels) coordinates, which are
  // orthogonal to every center, so each sits at similarity ~0.7.
  std::vector<float> emb;
  std::vector<MainLabel> labels;
  auto push = [&](const std::vector<double>& v, MainLabel l) {
    emb.insert(emb.end(), v.begin(), v.end());
    labels.push_back(l);
  };
  for (std::uint32_t l = 1; l <= entity_labels; ++l) {
    for (std::size_t i = 0; i < tight; ++i) {
      std::vector<double> v(dim);
      for (auto& x : v) x = 0.005 * noise(rng);
      v[l - 1] += 1.0;
      push(v, MainLabel{l});
    }
    for (std::size_t i = 0; i < o_per_cluster; ++i) {
      std::vector<double> u(dim, 0.0);
      double norm = 0.0;
      for (std::size_t j = entity_labels; j < dim; ++j) norm += (u[j] = noise(rng)) * u[j];
      norm = std::sqrt(norm);
      std::vector<double> v(dim);
      for (std::size_t j = 0; j < dim; ++j) v[j] = sin_theta * u[j] / norm;
      v[l - 1] += cos_theta;
      push(v, MainLabel::outside());
    }
  }
  auto ds = Datastore::from_embeddings(ts, dim, emb, labels);

  // Dev sentences made only of B- tokens, each a one-token gold entity.
  Corpus dev;
  dev.dim = dim;
  dev.tagset_hash = ts.hash_hex();
  std::uniform_int_distribution<std::uint32_t> type(0, ts.main_types().size() - 1);
  for (int s = 0; s < 30; ++s) {
    SentenceRecord rec;
    rec.id = fmt::format("o{}", s);
    const std::size_t len = 5;
    rec.emb = Matrix<float>(len, dim);
    rec.p_main = Matrix<double>(len, ts.main_label_count());
    rec.gold_main = std::vector<MainLabel>();
    for (std::size_t i = 0; i < len; ++i) {
      rec.tokens.push_back("w");
      auto l = MainLabel::begin(type(rng));
      rec.gold_main->push_back(l);
      for (std::size_t j = 0; j < dim; ++j) (*rec.emb)(i, j) = static_cast<float>(0.005 * noise(rng));
      (*rec.emb)(i, l.value - 1) += 1.0f;
      for (std::size_t j = 0; j < ts.main_label_count(); ++j)
        (*rec.p_main)(i, j) = 1.0 / static_cast<double>(ts.main_label_count());
    }
    dev.records.push_back(std::move(rec));
  }

  std::size_t r = tight;
  for (const auto& rec : dev.records) {
    for (std::size_t i = 0; i < rec.size() && out.ok; ++i) {
      auto nbrs = knn_search(ds, rec.emb->row(i), 512);
      for (std::size_t rank = r; rank < nbrs.items.size(); ++rank)
        if (!nbrs.items[rank].label.is_outside()) out.fail(fmt::format("{} token {} rank {} not O", rec.id, i, rank + 1));
      double prev = -1.0;
      for (std::size_t k = r; k <= 512 && out.ok; ++k) {
        double p_o = knn_distribution(nbrs.prefix(k), 1.0, ts.main_label_count())[0];
        if (p_o < prev) out.fail(fmt::format("{} token {}: P[O] decreases at k={}", rec.id, i, k));
        prev = p_o;
      }
    }
  }

  SweepGrid grid;
  grid.ks = {8, 512};
  grid.lambdas = {0.0};
  auto result = run_sweep(dev, ds, grid, ts);
  double f1_8 = result.rows[0].f1, f1_512 = result.rows[1].f1;
  if (!(f1_8 > f1_512)) out.fail(fmt::format("F1 {:.4f} at k=8 vs {:.4f} at k=512", f1_8, f1_512));
  if (out.ok) out.detail = fmt::format("r={}, lambda=0 F1 {:.4f} at k=8 -> {:.4f} at k=512", r, f1_8, f1_512);
  return out;
}

Outcome sweep_structure(const CorrectionFixture& f) {
  Outcome out;
  auto ds = build_datastore(f.train, f.ts);
  auto once = run_sweep(f.dev, ds, SweepGrid{}, f.ts, Retrieval::Once);
  auto per_k = run_sweep(f.dev, ds, SweepGrid{}, f.ts, Retrieval::PerK);
  if (once.rows.size() != 77) out.fail(fmt::format("{} rows", once.rows.size()));
  const SweepRow* ref = nullptr;
  for (const auto& row : once.rows) {
    if (row.lambda != 1.0) continue;
    if (!ref) ref = &row;
    if (row.precision != ref->precision || row.recall != ref->recall || row.f1 != ref->f1)
      out.fail(fmt::format("lambda=1 row at k={} differs from k={}", row.k, ref->k));
  }
  if (once.rows != per_k.rows || !(once.best == per_k.best)) out.fail("retrieve-once differs from per-k retrieval");
  auto csv = once.to_csv();
  if (std::count(csv.begin(), csv.end(), '\n') != 79) out.fail("CSV line count");
  if (out.ok) out.detail = "77 rows, lambda=1 column constant, once == per-k";
  return out;
}

Outcome metric_fixtures() {
  Outcome out;
  auto ts = testing::small_tagset();
  std::vector<SentenceEntities> gold = {{"a", {{0, 1, 1, {}}, {3, 3, 2, {}}}}};
  std::vector<SentenceEntities> half = {{"a", {{0, 1, 1, {}}, {5, 6, 0, {}}}}};
  std::vector<SentenceEntities> empty = {{"a", {}}};
  auto expect = [&](const char* name, const std::vector<SentenceEntities>& pred, double v) {
    auto r = micro_prf(gold, pred, ts);
    if (r.precision != v || r.recall != v || r.f1 != v)
      out.fail(fmt::format("{}: ({}, {}, {})", name, r.precision, r.recall, r.f1));
  };
  expect("perfect", gold, 1.0);
  expect("half", half, 0.5);
  expect("empty-pred", empty, 0.0);

  testing::ScratchDir dir("knnner_accept");
  auto centers = testing::make_centers(ts.main_label_count(), 16, 8);
  auto ds = build_datastore(testing::make_corpus(ts, centers, {}), ts);
  write_datastore(ds, dir / "a.knnd");
  auto loaded = read_datastore(dir / "a.knnd", ts);
  write_datastore(loaded, dir / "b.knnd");
  auto a = read_file(dir / "a.knnd");
  if (a != read_file(dir / "b.knnd") || a != serialize_datastore(ds))
    out.fail("datastore round trip is not byte-identical");
  if (loaded.vectors() != ds.vectors() || loaded.labels() != ds.labels()) out.fail("datastore contents changed");
  if (out.ok) out.detail = fmt::format("(1,1,1) (0.5,0.5,0.5) (0,0,0), {} byte datastore round trip", a.size());
  return out;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](const char* name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.fail(fmt::format("exception: {}", e.what()));
    }
    fmt::print("{} {}: {}\n", o.ok ? "PASS" : "FAIL", name, o.detail);
    std::fflush(stdout);
    if (!o.ok) ++failures;
  };

  CorrectionFixture correction;
  report("knn oracle equivalence", oracle_equivalence);
  report("knn distribution hand value", hand_value);
  report("boundary collapse", boundary_collapse);
  report("normalization", normalization);
  report("knn corrects baseline", [&] { return knn_corrects_baseline(correction); });
  report("O dominance", o_dominance);
  report("sweep structure", [&] { return sweep_structure(correction); });
  report("metric fixtures", metric_fixtures);

  fmt::print("{} of 8 criteria passed\n", 8 - failures);
  return failures == 0 ? 0 : 1;
}
