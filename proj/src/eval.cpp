#include "stvqa/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace stvqa {

double accuracy(const std::vector<int>& predictions, const std::vector<int>& golds) {
  if (predictions.size() != golds.size() || predictions.empty())
    throw std::invalid_argument("accuracy: prediction/gold size mismatch or empty");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    if (predictions[i] == golds[i]) ++hit;
  return 100.0 * static_cast<double>(hit) / static_cast<double>(predictions.size());
}

double mean_l2(const std::vector<double>& predictions, const std::vector<int>& golds) {
  if (predictions.size() != golds.size() || predictions.empty())
    throw std::invalid_argument("mean_l2: prediction/gold size mismatch or empty");
  double s = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - static_cast<double>(golds[i]);
    s += d * d;
  }
  return s / static_cast<double>(predictions.size());
}

double avg_frame_accuracy(const std::vector<std::vector<int>>& per_frame_predictions,
                          const std::vector<int>& golds) {
  if (per_frame_predictions.size() != golds.size() || golds.empty())
    throw std::invalid_argument("avg_frame_accuracy: prediction/gold size mismatch or empty");
  double total = 0.0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    const auto& frames = per_frame_predictions[i];
    if (frames.empty()) throw std::invalid_argument("avg_frame_accuracy: video with no frames");
    std::size_t hit = 0;
    for (int p : frames)
      if (p == golds[i]) ++hit;
    total += static_cast<double>(hit) / static_cast<double>(frames.size());
  }
  return 100.0 * total / static_cast<double>(golds.size());
}

// ---------------------------------------------------------------------------

std::string pool_mode_name(PoolMode m) {
  switch (m) {
    case PoolMode::none: return "none";
    case PoolMode::aggr: return "aggr";
    case PoolMode::avg: return "avg";
  }
  return "?";
}

PoolMode pool_mode_from_string(const std::string& s) {
  if (s == "none") return PoolMode::none;
  if (s == "aggr") return PoolMode::aggr;
  if (s == "avg") return PoolMode::avg;
  throw std::invalid_argument("unknown pool mode '" + s + "' (valid: none, aggr, avg)");
}

namespace {

PredictionRecord make_record(const ModelParams& params, const QAItem& item, const Prediction& p) {
  PredictionRecord r;
  r.item_id = item.id;
  r.task = item.task;
  r.variant = params.config.variant;
  switch (item.task) {
    case Task::count:
      r.count_pred = p.count_raw;
      r.count_gold = item.count_label;
      break;
    case Task::action:
    case Task::transition:
      r.pred_index = p.pred_index;
      r.gold_index = item.gold_index;
      r.scores = p.scores;
      break;
    case Task::frameqa: {
      r.pred_word = params.config.vocab.words[static_cast<std::size_t>(p.pred_word)];
      r.gold_word = item.gold_word;
      std::vector<int> order(p.distribution.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
      std::partial_sort(order.begin(), order.begin() + std::min<std::size_t>(5, order.size()),
                        order.end(), [&](int a, int b) {
                          return p.distribution[static_cast<std::size_t>(a)] >
                                 p.distribution[static_cast<std::size_t>(b)];
                        });
      for (std::size_t k = 0; k < std::min<std::size_t>(5, order.size()); ++k)
        r.topk.emplace_back(params.config.vocab.words[static_cast<std::size_t>(order[k])],
                            p.distribution[static_cast<std::size_t>(order[k])]);
      break;
    }
  }
  return r;
}

int predicted_label(const Prediction& p, Task t) {
  return task_is_multichoice(t) ? p.pred_index : p.pred_word;
}

int gold_label(const ModelParams& params, const QAItem& item) {
  return task_is_multichoice(item.task) ? item.gold_index : params.config.vocab.id(item.gold_word);
}

}  // namespace

TaskMetrics evaluate(const ModelParams& params, const Dataset& data, PoolMode pool,
                     std::vector<PredictionRecord>* records) {
  if (pool == PoolMode::avg) {
    // per-frame protocol: answer from each single-frame slice, double-average
    std::map<Task, std::vector<std::vector<int>>> frame_preds;
    std::map<Task, std::vector<int>> golds;
    std::map<Task, std::vector<double>> count_preds;
    std::map<Task, std::vector<int>> count_golds;
    for (const QAItem& item : data.items) {
      const VideoFeatures& full = data.features_for(item);
      std::vector<int> per_frame;
      double count_sum = 0.0;
      Prediction last;
      for (int t = 0; t < full.T; ++t) {
        last = predict(params, item, full.single_frame(t));
        per_frame.push_back(predicted_label(last, item.task));
        count_sum += last.count_raw;
      }
      if (records) records->push_back(make_record(params, item, last));
      if (item.task == Task::count) {
        count_preds[item.task].push_back(count_sum / full.T);
        count_golds[item.task].push_back(item.count_label);
      } else {
        frame_preds[item.task].push_back(per_frame);
        golds[item.task].push_back(gold_label(params, item));
      }
    }
    TaskMetrics out;
    for (const auto& [task, g] : golds) {
      out.value[task] = avg_frame_accuracy(frame_preds[task], g);
      out.count[task] = static_cast<int>(g.size());
    }
    for (const auto& [task, g] : count_golds) {
      out.value[task] = mean_l2(count_preds[task], g);
      out.count[task] = static_cast<int>(g.size());
    }
    return out;
  }

  // none/aggr: route through the prediction-record form so these metrics always
  // flow through the dump format
  std::vector<PredictionRecord> local;
  std::vector<PredictionRecord>& recs = records ? *records : local;
  for (const QAItem& item : data.items) {
    const VideoFeatures& full = data.features_for(item);
    const VideoFeatures pooled = pool == PoolMode::aggr ? full.aggregate_time() : VideoFeatures{};
    const VideoFeatures& feats = pool == PoolMode::aggr ? pooled : full;
    recs.push_back(make_record(params, item, predict(params, item, feats)));
  }
  return metrics_from_records(recs);
}

TaskMetrics metrics_from_records(const std::vector<PredictionRecord>& records) {
  std::map<Task, std::vector<int>> preds, golds;
  std::map<Task, std::vector<double>> count_preds;
  std::map<Task, std::vector<int>> count_golds;
  for (const auto& r : records) {
    switch (r.task) {
      case Task::count:
        count_preds[r.task].push_back(r.count_pred);
        count_golds[r.task].push_back(r.count_gold);
        break;
      case Task::action:
      case Task::transition:
        preds[r.task].push_back(r.pred_index);
        golds[r.task].push_back(r.gold_index);
        break;
      case Task::frameqa:
        preds[r.task].push_back(r.pred_word == r.gold_word ? 1 : 0);
        golds[r.task].push_back(1);
        break;
    }
  }
  TaskMetrics out;
  for (const auto& [task, g] : golds) {
    out.value[task] = accuracy(preds[task], g);
    out.count[task] = static_cast<int>(g.size());
  }
  for (const auto& [task, g] : count_golds) {
    out.value[task] = mean_l2(count_preds[task], g);
    out.count[task] = static_cast<int>(g.size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ablation report
// ---------------------------------------------------------------------------

EvalReport ablation_report(
    const std::vector<Variant>& variants, const std::vector<Task>& tasks,
    const std::vector<std::uint64_t>& seeds,
    const std::function<double(Variant, Task, std::uint64_t)>& cell_fn) {
  if (variants.empty() || tasks.empty() || seeds.empty())
    throw std::invalid_argument("ablation_report: variants, tasks and seeds must be non-empty");
  EvalReport rep;
  rep.variants = variants;
  rep.tasks = tasks;
  rep.seeds = seeds;
  rep.cells.resize(variants.size(), std::vector<EvalCell>(tasks.size()));
  for (std::size_t vi = 0; vi < variants.size(); ++vi) {
    for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
      std::vector<double> vals;
      vals.reserve(seeds.size());
      for (std::uint64_t s : seeds) vals.push_back(cell_fn(variants[vi], tasks[ti], s));
      EvalCell& c = rep.cells[vi][ti];
      c.n = static_cast<int>(vals.size());
      for (double v : vals) c.mean += v;
      c.mean /= static_cast<double>(vals.size());
      for (double v : vals) c.stdev += (v - c.mean) * (v - c.mean);
      c.stdev = vals.size() > 1 ? std::sqrt(c.stdev / static_cast<double>(vals.size() - 1)) : 0.0;
    }
  }
  return rep;
}

std::string EvalReport::render_text() const {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << "variant            ";
  for (Task t : tasks) {
    std::string h = task_name(t);
    if (t == Task::count) h += " (l2)";
    os << " | " << h;
    for (std::size_t pad = h.size(); pad < 16; ++pad) os << ' ';
  }
  os << '\n';
  for (std::size_t vi = 0; vi < variants.size(); ++vi) {
    std::string name = variant_name(variants[vi]);
    name.resize(19, ' ');
    os << name;
    for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
      const EvalCell& c = cells[vi][ti];
      std::ostringstream cell;
      cell.setf(std::ios::fixed);
      cell.precision(2);
      cell << c.mean << " +- " << c.stdev;
      std::string s = cell.str();
      s.resize(16, ' ');
      os << " | " << s;
    }
    os << '\n';
  }
  return os.str();
}

std::vector<std::string> EvalReport::render_records() const {
  std::vector<std::string> lines;
  for (std::size_t vi = 0; vi < variants.size(); ++vi)
    for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
      std::ostringstream os;
      os.precision(17);
      const EvalCell& c = cells[vi][ti];
      os << "variant=" << variant_name(variants[vi]) << " task=" << task_name(tasks[ti])
         << " mean=" << c.mean << " stdev=" << c.stdev << " seeds=" << c.n;
      lines.push_back(os.str());
    }
  return lines;
}

}  // namespace stvqa
