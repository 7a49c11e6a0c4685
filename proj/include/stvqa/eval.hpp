#pragma once
// Evaluation metrics and the ablation report table.

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stvqa/dataset.hpp"
#include "stvqa/model.hpp"

namespace stvqa {

// percentage of exact matches
double accuracy(const std::vector<int>& predictions, const std::vector<int>& golds);

// mean over items of (pred - gold)^2
double mean_l2(const std::vector<double>& predictions, const std::vector<int>& golds);

// double average: mean over videos of per-video frame accuracy, as a percentage
double avg_frame_accuracy(const std::vector<std::vector<int>>& per_frame_predictions,
                          const std::vector<int>& golds);

// ---------------------------------------------------------------------------
// Whole-dataset evaluation
// ---------------------------------------------------------------------------

// Frame-pooling protocols for single-frame-style baselines: `aggr` averages
// input features over time before the model, `avg` answers from each frame
// separately and applies the double-average accuracy.
enum class PoolMode { none, aggr, avg };
std::string pool_mode_name(PoolMode m);
PoolMode pool_mode_from_string(const std::string& s);

struct PredictionRecord {
  std::string item_id;
  Task task = Task::count;
  Variant variant = Variant::concat;
  double count_pred = 0.0;
  int count_gold = -1;
  int pred_index = -1;
  int gold_index = -1;
  std::vector<double> scores;
  std::string pred_word;
  std::string gold_word;
  std::vector<std::pair<std::string, double>> topk;  // frameqa, top-5
};

struct TaskMetrics {
  std::map<Task, double> value;  // accuracy (%) or mean l2 for count
  std::map<Task, int> count;
};

// Runs the model over every item; fills `records` when given.
TaskMetrics evaluate(const ModelParams& params, const Dataset& data, PoolMode pool = PoolMode::none,
                     std::vector<PredictionRecord>* records = nullptr);

// The same metrics computed purely from dumped records (the external path).
TaskMetrics metrics_from_records(const std::vector<PredictionRecord>& records);

// ---------------------------------------------------------------------------
// Ablation report
// ---------------------------------------------------------------------------

struct EvalCell {
  double mean = 0.0;
  double stdev = 0.0;
  int n = 0;
};

struct EvalReport {
  std::vector<Variant> variants;  // row order as given
  std::vector<Task> tasks;        // column order as given
  std::vector<std::uint64_t> seeds;
  std::vector<std::vector<EvalCell>> cells;  // [variant][task]

  std::string render_text() const;
  std::vector<std::string> render_records() const;  // line-delimited machine form
};

// cell_fn(variant, task, seed) -> metric value for that run
EvalReport ablation_report(
    const std::vector<Variant>& variants, const std::vector<Task>& tasks,
    const std::vector<std::uint64_t>& seeds,
    const std::function<double(Variant, Task, std::uint64_t)>& cell_fn);

}  // namespace stvqa
