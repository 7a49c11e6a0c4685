#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "stvqa/eval.hpp"
#include "stvqa/manifest.hpp"
#include "stvqa/synthworld.hpp"

using namespace stvqa;

// ---------------------------------------------------------------------------
// accuracy
// ---------------------------------------------------------------------------

TEST_CASE("accuracy: all correct is 100, permutation-invariant") {
  CHECK(accuracy({1, 2, 3}, {1, 2, 3}) == 100.0);
  CHECK(accuracy({1, 2, 3, 4}, {1, 0, 3, 0}) == 50.0);

  Rng rng(3);
  std::vector<int> preds, golds;
  for (int i = 0; i < 200; ++i) {
    preds.push_back(static_cast<int>(rng.uniform_int(0, 4)));
    golds.push_back(static_cast<int>(rng.uniform_int(0, 4)));
  }
  const double base = accuracy(preds, golds);
  std::vector<std::size_t> order(preds.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<int> p2, g2;
  for (std::size_t i : order) {
    p2.push_back(preds[i]);
    g2.push_back(golds[i]);
  }
  CHECK(accuracy(p2, g2) == base);
  CHECK_THROWS(accuracy({}, {}));
  CHECK_THROWS(accuracy({1}, {1, 2}));
}

// ---------------------------------------------------------------------------
// mean_l2
// ---------------------------------------------------------------------------

TEST_CASE("a uniform random word predictor scores about 100/|V|") {
  const int V = 25;
  Rng rng(41);
  std::vector<int> preds, golds;
  for (int i = 0; i < 20000; ++i) {
    preds.push_back(static_cast<int>(rng.uniform_int(0, V - 1)));
    golds.push_back(static_cast<int>(rng.uniform_int(0, V - 1)));
  }
  CHECK(accuracy(preds, golds) == doctest::Approx(100.0 / V).epsilon(0.2));
}

TEST_CASE("mean_l2 closed forms") {
  CHECK(mean_l2({3.0, 7.0}, {3, 7}) == 0.0);
  CHECK(mean_l2({1.0, 3.0}, {2, 2}) == 1.0);
}

TEST_CASE("mean_l2 of the always-0 predictor equals the mean squared gold label") {
  Rng rng(5);
  std::vector<int> golds;
  for (int i = 0; i < 50; ++i) golds.push_back(static_cast<int>(rng.uniform_int(0, 10)));
  const std::vector<double> zeros(golds.size(), 0.0);
  double expect = 0.0;
  for (int g : golds) expect += static_cast<double>(g) * g;
  expect /= static_cast<double>(golds.size());
  CHECK(mean_l2(zeros, golds) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("the label mean minimizes mean_l2 over constant predictors (grid search oracle)") {
  Rng rng(7);
  std::vector<int> golds;
  for (int i = 0; i < 64; ++i) golds.push_back(static_cast<int>(rng.uniform_int(0, 10)));
  double mean = 0.0;
  for (int g : golds) mean += g;
  mean /= static_cast<double>(golds.size());

  double best_c = 0.0, best_v = 1e300;
  for (double c = 0.0; c <= 10.0; c += 0.001) {
    const double v = mean_l2(std::vector<double>(golds.size(), c), golds);
    if (v < best_v) {
      best_v = v;
      best_c = c;
    }
  }
  CHECK(std::fabs(best_c - mean) < 0.002);
  CHECK(mean_l2(std::vector<double>(golds.size(), mean), golds) <= best_v + 1e-9);
}

// ---------------------------------------------------------------------------
// avg_frame_accuracy
// ---------------------------------------------------------------------------

TEST_CASE("avg_frame_accuracy: worked 2-video example gives 37.5") {
  // video A: 2 frames, 1 correct; video B: 4 frames, 1 correct
  const std::vector<std::vector<int>> preds = {{1, 0}, {1, 0, 0, 0}};
  const std::vector<int> golds = {1, 1};
  CHECK(avg_frame_accuracy(preds, golds) == doctest::Approx(37.5).epsilon(1e-12));
}

TEST_CASE("avg_frame_accuracy: all frames correct gives 100") {
  CHECK(avg_frame_accuracy({{2, 2}, {3, 3, 3}}, {2, 3}) == 100.0);
}

TEST_CASE("avg_frame_accuracy with one frame per video reduces to accuracy") {
  Rng rng(11);
  std::vector<std::vector<int>> frame_preds;
  std::vector<int> flat_preds, golds;
  for (int i = 0; i < 100; ++i) {
    const int p = static_cast<int>(rng.uniform_int(0, 4));
    frame_preds.push_back({p});
    flat_preds.push_back(p);
    golds.push_back(static_cast<int>(rng.uniform_int(0, 4)));
  }
  CHECK(avg_frame_accuracy(frame_preds, golds) == accuracy(flat_preds, golds));
}

// ---------------------------------------------------------------------------
// ablation report
// ---------------------------------------------------------------------------

TEST_CASE("single variant, single task: a 1-cell report") {
  const auto rep = ablation_report({Variant::concat}, {Task::count}, {1},
                                   [](Variant, Task, std::uint64_t) { return 4.25; });
  REQUIRE(rep.cells.size() == 1);
  REQUIRE(rep.cells[0].size() == 1);
  CHECK(rep.cells[0][0].mean == 4.25);
  CHECK(rep.cells[0][0].stdev == 0.0);
  CHECK(rep.cells[0][0].n == 1);
}

TEST_CASE("report rows follow the declared variant order; 7x4 table renders") {
  std::vector<Variant> variants(std::begin(kAllVariants), std::end(kAllVariants));
  std::vector<Task> tasks(std::begin(kAllTasks), std::end(kAllTasks));
  int calls = 0;
  const auto rep = ablation_report(variants, tasks, {1, 2, 3},
                                   [&](Variant, Task, std::uint64_t) { return 10.0 + calls++; });
  CHECK(rep.cells.size() == 7);
  CHECK(rep.cells[0].size() == 4);
  CHECK(calls == 7 * 4 * 3);

  const std::string text = rep.render_text();
  // row order matches the ablation-table convention
  const auto p_text = text.find("text");
  const auto p_concat = text.find("concat");
  const auto p_sptp = text.find("spatial_temporal");
  CHECK(p_text != std::string::npos);
  CHECK(p_text < p_concat);
  CHECK(p_concat < p_sptp);
  CHECK(rep.render_records().size() == 28);

  // mean +- stdev math
  const auto rep2 = ablation_report({Variant::concat}, {Task::count}, {1, 2, 3},
                                    [](Variant, Task, std::uint64_t s) { return double(s); });
  CHECK(rep2.cells[0][0].mean == doctest::Approx(2.0));
  CHECK(rep2.cells[0][0].stdev == doctest::Approx(1.0));
}

// ---------------------------------------------------------------------------
// evaluate + dumps
// ---------------------------------------------------------------------------

namespace {

DatasetBundle small_bundle() {
  DatasetConfig cfg;
  cfg.train_items = {{Task::count, 6}, {Task::action, 4}, {Task::transition, 4}, {Task::frameqa, 4}};
  cfg.episode.steps = 6;
  cfg.episode.count_weights = {0.2, 0.0, 0.2, 0.2, 0.2, 0.2, 0, 0, 0, 0, 0};
  cfg.render.grid = 2;
  cfg.render.frame_channels = 4;
  cfg.render.clip_channels = 3;
  return build_dataset(cfg, 77);
}

ModelParams small_model(const Dataset& data) {
  ModelConfig mc;
  mc.variant = Variant::concat;
  mc.hidden_dim = 4;
  mc.embedding_dim = 3;
  mc.attention_hidden = 3;
  mc.grid = 2;
  mc.frame_channels = 4;
  mc.clip_channels = 3;
  mc.dropout_rate = 0.0;
  mc.vocab = data.build_vocab();
  return ModelParams::init(mc, 5);
}

}  // namespace

TEST_CASE("evaluate covers every present task; dump round trip preserves metrics") {
  const DatasetBundle bundle = small_bundle();
  const ModelParams mp = small_model(bundle.train);

  std::vector<PredictionRecord> records;
  const TaskMetrics direct = evaluate(mp, bundle.train, PoolMode::none, &records);
  CHECK(direct.value.count(Task::count) == 1);
  CHECK(direct.value.count(Task::action) == 1);
  CHECK(direct.value.count(Task::transition) == 1);
  CHECK(direct.value.count(Task::frameqa) == 1);
  CHECK(direct.count.at(Task::count) == 6);
  CHECK(records.size() == bundle.train.items.size());

  const char* path = "test_eval_preds.jsonl";
  write_predictions(path, records);
  const auto loaded = read_predictions(path);
  const TaskMetrics via_dump = metrics_from_records(loaded);
  for (const auto& [task, v] : direct.value)
    CHECK(via_dump.value.at(task) == doctest::Approx(v).epsilon(1e-12));
  std::remove(path);
}

TEST_CASE("aggr and avg pooling modes run end to end") {
  const DatasetBundle bundle = small_bundle();
  const ModelParams mp = small_model(bundle.train);
  const TaskMetrics aggr = evaluate(mp, bundle.train, PoolMode::aggr);
  CHECK(aggr.value.count(Task::action) == 1);
  const TaskMetrics avg = evaluate(mp, bundle.train, PoolMode::avg);
  CHECK(avg.value.count(Task::action) == 1);
  CHECK(avg.value.at(Task::action) >= 0.0);
  CHECK(avg.value.at(Task::action) <= 100.0);
}

TEST_CASE("pool mode names round trip and reject junk") {
  CHECK(pool_mode_from_string("aggr") == PoolMode::aggr);
  CHECK(pool_mode_name(PoolMode::avg) == "avg");
  CHECK_THROWS(pool_mode_from_string("bogus"));
}

// ---------------------------------------------------------------------------
// manifest round trips
// ---------------------------------------------------------------------------

TEST_CASE("dataset manifest round trip preserves items and float32-quantized features") {
  const DatasetBundle bundle = small_bundle();
  const std::string dir = "test_eval_manifest";
  const std::string manifest = dir + "/train.jsonl";
  write_manifest(manifest, dir + "/features", bundle.train);
  const Dataset loaded = read_manifest(manifest);

  REQUIRE(loaded.items.size() == bundle.train.items.size());
  for (std::size_t i = 0; i < loaded.items.size(); ++i) {
    CHECK(loaded.items[i].id == bundle.train.items[i].id);
    CHECK(loaded.items[i].question == bundle.train.items[i].question);
    CHECK(loaded.items[i].candidates == bundle.train.items[i].candidates);
    CHECK(loaded.items[i].gold_index == bundle.train.items[i].gold_index);
    CHECK(loaded.items[i].count_label == bundle.train.items[i].count_label);
    CHECK(loaded.items[i].gold_word == bundle.train.items[i].gold_word);
  }
  for (const auto& [ep, orig] : bundle.train.features) {
    const VideoFeatures& got = loaded.features.at(ep);
    REQUIRE(got.frame_grid.size() == orig.frame_grid.size());
    for (std::size_t i = 0; i < got.frame_grid.size(); ++i)
      CHECK(got.frame_grid[i] == static_cast<double>(static_cast<float>(orig.frame_grid[i])));
    // pooled views are re-derived on load: exact means of the loaded grid
    const int locs = got.G * got.G;
    for (int t = 0; t < got.T; ++t)
      for (int c = 0; c < got.Cf; ++c) {
        double s = 0.0;
        for (int l = 0; l < locs; ++l)
          s += got.frame_grid[(static_cast<std::size_t>(t) * locs + l) * got.Cf + c];
        CHECK(got.frame_pooled[static_cast<std::size_t>(t) * got.Cf + c] == s / locs);
      }
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("corpus file round trips") {
  const auto corpus = WorldLexicon::standard().corpus();
  const char* path = "test_eval_corpus.jsonl";
  write_corpus(path, corpus);
  const auto loaded = read_corpus(path);
  REQUIRE(loaded.size() == corpus.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    CHECK(loaded[i].verb == corpus[i].verb);
    CHECK(loaded[i].phrase == corpus[i].phrase);
  }
  std::remove(path);
}

TEST_CASE("feature blob loader rejects bad magic") {
  const char* path = "test_eval_bad.stvf";
  {
    std::ofstream out(path, std::ios::binary);
    out << "JUNKJUNKJUNK";
  }
  CHECK_THROWS_WITH_AS(read_features(path), doctest::Contains("magic"), std::runtime_error);
  std::remove(path);
}
