// Command-line front end: generate / train / gradcheck / eval / report.
// Every command resolves its configuration (file, then --set overrides, then
// dedicated flags), runs deterministically from one root seed, writes its
// outputs to fresh paths and drops the resolved config next to them.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "stvqa/checkpoint.hpp"
#include "stvqa/config.hpp"
#include "stvqa/manifest.hpp"
#include "stvqa/modelcheck.hpp"
#include "stvqa/synthworld.hpp"
#include "stvqa/train.hpp"

namespace fs = std::filesystem;
using namespace stvqa;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::string variant;
  std::string task;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "config file (key=value with [sections])");
  cmd->add_option("--out", o.out_dir, "output directory (default $STVQA_OUT_ROOT/<command>)");
  cmd->add_option("--seed", o.seed, "root seed");
  cmd->add_option("--variant", o.variant, "model variant");
  cmd->add_option("--task", o.task, "task name or 'mixed'");
  cmd->add_option("--set", o.overrides, "key=value override, repeatable")->take_all();
}

KvConfig resolve_config(const CommonOpts& o, const std::string& variant_key,
                        const std::string& task_key) {
  KvConfig kv;
  if (!o.config_path.empty()) kv = KvConfig::load(o.config_path);
  for (const auto& ov : o.overrides) kv.apply_override(ov);
  if (o.seed >= 0) kv.set_int("seed", o.seed);
  if (!o.variant.empty() && !variant_key.empty()) kv.set(variant_key, o.variant);
  if (!o.task.empty() && !task_key.empty()) kv.set(task_key, o.task);
  return kv;
}

fs::path resolve_out(const CommonOpts& o, const char* command) {
  if (!o.out_dir.empty()) return o.out_dir;
  const char* root = std::getenv("STVQA_OUT_ROOT");
  return fs::path(root ? root : "runs") / command;
}

// outputs go to fresh paths or the command fails
std::string fresh(const fs::path& p) {
  if (fs::exists(p))
    throw std::runtime_error("refusing to overwrite existing output: " + p.string());
  return p.string();
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

DatasetConfig dataset_config_from_kv(const KvConfig& kv) {
  DatasetConfig cfg;
  cfg.episode.steps = static_cast<int>(kv.get_int("data.steps", 16));
  cfg.episode.filler_segments = static_cast<int>(kv.get_int("data.filler_segments", 3));
  cfg.episode.needle_margin = static_cast<int>(kv.get_int("data.needle_margin", 2));
  cfg.render.grid = static_cast<int>(kv.get_int("data.grid", 3));
  cfg.render.frame_channels = static_cast<int>(kv.get_int("data.frame_channels", 16));
  cfg.render.clip_channels = static_cast<int>(kv.get_int("data.clip_channels", 8));
  cfg.render.frames_per_beat = static_cast<int>(kv.get_int("data.beats", 4));
  cfg.render.stride = static_cast<int>(kv.get_int("data.stride", 4));
  cfg.render.window = static_cast<int>(kv.get_int("data.window", 16));
  cfg.render.noise = kv.get_double("data.noise", 0.02);
  cfg.render.needle_gain = kv.get_double("data.needle_gain", 2.0);
  cfg.zero_count_fraction = kv.get_double("data.zero_count_fraction", 0.1);
  cfg.episode.action_count = static_cast<int>(kv.get_int("data.action_count", 0));
  cfg.uniform_distractors = kv.get_int("data.uniform_distractors", 0) != 0;

  const int count_max = static_cast<int>(kv.get_int("data.count_max", 10));
  for (int k = count_max + 1; k <= 10; ++k) cfg.episode.count_weights[static_cast<std::size_t>(k)] = 0.0;

  cfg.train_items[Task::count] = static_cast<int>(kv.get_int("data.train_count", 80));
  cfg.train_items[Task::action] = static_cast<int>(kv.get_int("data.train_action", 40));
  cfg.train_items[Task::transition] = static_cast<int>(kv.get_int("data.train_transition", 40));
  cfg.train_items[Task::frameqa] = static_cast<int>(kv.get_int("data.train_frameqa", 40));
  cfg.test_items[Task::count] = static_cast<int>(kv.get_int("data.test_count", 20));
  cfg.test_items[Task::action] = static_cast<int>(kv.get_int("data.test_action", 10));
  cfg.test_items[Task::transition] = static_cast<int>(kv.get_int("data.test_transition", 10));
  cfg.test_items[Task::frameqa] = static_cast<int>(kv.get_int("data.test_frameqa", 10));
  return cfg;
}

KvConfig dataset_config_to_kv(const DatasetConfig& cfg, std::uint64_t seed) {
  KvConfig kv;
  kv.set_int("seed", static_cast<std::int64_t>(seed));
  kv.set_int("data.steps", cfg.episode.steps);
  kv.set_int("data.filler_segments", cfg.episode.filler_segments);
  kv.set_int("data.needle_margin", cfg.episode.needle_margin);
  kv.set_int("data.grid", cfg.render.grid);
  kv.set_int("data.frame_channels", cfg.render.frame_channels);
  kv.set_int("data.clip_channels", cfg.render.clip_channels);
  kv.set_int("data.beats", cfg.render.frames_per_beat);
  kv.set_int("data.stride", cfg.render.stride);
  kv.set_int("data.window", cfg.render.window);
  kv.set_double("data.noise", cfg.render.noise);
  kv.set_double("data.needle_gain", cfg.render.needle_gain);
  kv.set_double("data.zero_count_fraction", cfg.zero_count_fraction);
  kv.set_int("data.action_count", cfg.episode.action_count);
  kv.set_int("data.uniform_distractors", cfg.uniform_distractors ? 1 : 0);
  kv.set_int("data.train_count", cfg.train_items.at(Task::count));
  kv.set_int("data.train_action", cfg.train_items.at(Task::action));
  kv.set_int("data.train_transition", cfg.train_items.at(Task::transition));
  kv.set_int("data.train_frameqa", cfg.train_items.at(Task::frameqa));
  kv.set_int("data.test_count", cfg.test_items.at(Task::count));
  kv.set_int("data.test_action", cfg.test_items.at(Task::action));
  kv.set_int("data.test_transition", cfg.test_items.at(Task::transition));
  kv.set_int("data.test_frameqa", cfg.test_items.at(Task::frameqa));
  return kv;
}

int cmd_generate(const CommonOpts& opts) {
  const KvConfig kv = resolve_config(opts, "", "");
  const DatasetConfig cfg = dataset_config_from_kv(kv);
  const auto seed = kv.get_u64("seed", 1);
  const fs::path out = resolve_out(opts, "generate");
  fs::create_directories(out);

  const DatasetBundle bundle = build_dataset(cfg, seed);
  const std::string train_path = fresh(out / "train.jsonl");
  const std::string test_path = fresh(out / "test.jsonl");
  write_manifest(train_path, (out / "features").string(), bundle.train);
  write_manifest(test_path, (out / "features").string(), bundle.test);
  write_corpus(fresh(out / "corpus.jsonl"), bundle.corpus);
  dataset_config_to_kv(cfg, seed).save(fresh(out / "resolved.cfg"));

  std::cout << "train manifest: " << train_path << "\n"
            << "test manifest:  " << test_path << "\n"
            << "episodes: " << bundle.episodes.size() << ", train items: "
            << bundle.train.items.size() << ", test items: " << bundle.test.items.size() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

Dataset filter_task(const Dataset& data, const std::string& task_spec) {
  if (task_spec == "mixed" || task_spec.empty()) return data;
  const Task want = task_from_string(task_spec);
  Dataset out;
  for (const auto& it : data.items)
    if (it.task == want) {
      out.items.push_back(it);
      if (!out.features.count(it.episode_id))
        out.features.emplace(it.episode_id, data.features_for(it));
    }
  return out;
}

ModelConfig model_config_for(const KvConfig& kv, Variant variant, const Dataset& train) {
  if (train.items.empty()) throw std::runtime_error("training dataset is empty");
  ModelConfig mc;
  mc.variant = variant;
  mc.hidden_dim = static_cast<int>(kv.get_int("model.hidden_dim", 32));
  mc.embedding_dim = static_cast<int>(kv.get_int("model.embedding_dim", 16));
  mc.attention_hidden = static_cast<int>(kv.get_int("model.attention_hidden", 32));
  mc.dropout_rate = kv.get_double("model.dropout_rate", 0.2);
  mc.ln_eps = kv.get_double("model.ln_eps", 1e-5);
  const VideoFeatures& sample = train.features.begin()->second;
  mc.grid = sample.G;
  mc.frame_channels = sample.Cf;
  mc.clip_channels = sample.Cs;
  mc.vocab = train.build_vocab();
  if (kv.has("model.embedding_import"))
    mc.embedding_dim = load_text_embeddings(kv.require("model.embedding_import")).dim;
  return mc;
}

// pretrained-style rows overwrite the table for vocabulary tokens present in
// the file; everything else keeps its random init and stays trainable
void import_embeddings(ModelParams& params, const std::string& path) {
  const LoadedEmbeddings emb = load_text_embeddings(path);
  if (emb.dim != params.config.embedding_dim)
    throw std::runtime_error("embedding file dim " + std::to_string(emb.dim) +
                             " does not match model embedding_dim " +
                             std::to_string(params.config.embedding_dim));
  Tensor& table = params.set.at("embedding");
  int imported = 0;
  for (int i = 0; i < params.config.vocab.size(); ++i) {
    auto it = emb.rows.find(params.config.vocab.words[static_cast<std::size_t>(i)]);
    if (it == emb.rows.end()) continue;
    std::copy(it->second.begin(), it->second.end(),
              table.data.begin() + static_cast<std::ptrdiff_t>(i) * emb.dim);
    ++imported;
  }
  std::cout << "imported " << imported << " embedding rows from " << path << "\n";
}

TrainHyper train_hyper_from_kv(const KvConfig& kv) {
  TrainHyper hy;
  hy.steps = static_cast<int>(kv.get_int("train.steps", 500));
  hy.batch_size = static_cast<int>(kv.get_int("train.batch_size", 16));
  hy.adam.lr = kv.get_double("train.lr", 0.001);
  hy.adam.beta1 = kv.get_double("train.beta1", 0.9);
  hy.adam.beta2 = kv.get_double("train.beta2", 0.999);
  hy.adam.eps = kv.get_double("train.eps", 1e-8);
  hy.clip_norm = kv.get_double("train.clip_norm", 10.0);
  hy.val_every = static_cast<int>(kv.get_int("train.val_every", 0));
  return hy;
}

struct TrainedModel {
  Checkpoint checkpoint;
  std::vector<std::pair<int, double>> loss_curve;
};

// spatial_temporal trains its temporal part first, then finetunes with the
// spatial attention in the path, initialized from the temporal phase.
TrainedModel run_training(const KvConfig& kv, Variant variant, const Dataset& train_data,
                          const Dataset* val, std::uint64_t seed) {
  const TrainHyper hy = train_hyper_from_kv(kv);
  TrainedModel out;

  if (variant == Variant::spatial_temporal) {
    int pretrain = static_cast<int>(kv.get_int("train.pretrain_steps", hy.steps / 2));
    pretrain = std::clamp(pretrain, 0, hy.steps);

    const ModelConfig tcfg = model_config_for(kv, Variant::temporal, train_data);
    ModelParams tparams = ModelParams::init(tcfg, seed);
    AdamState topt(tparams.set, hy.adam);
    TrainHyper phase1 = hy;
    phase1.steps = pretrain;
    const TrainResult r1 = train(tparams, topt, train_data, phase1, seed, val);

    const ModelConfig scfg = model_config_for(kv, Variant::spatial_temporal, train_data);
    ModelParams sparams = ModelParams::init(scfg, splitmix64(seed ^ fnv1a64("spatial-phase")));
    for (std::size_t i = 0; i < sparams.set.size(); ++i)
      if (tparams.set.has(sparams.set[i].name))
        sparams.set[i].value = tparams.set.at(sparams.set[i].name);

    AdamState sopt(sparams.set, hy.adam);
    TrainHyper phase2 = hy;
    phase2.steps = hy.steps - pretrain;
    const TrainResult r2 = train(sparams, sopt, train_data, phase2, splitmix64(seed + 1), val);

    out.loss_curve = r1.loss_curve;
    for (const auto& [step, loss] : r2.loss_curve)
      out.loss_curve.emplace_back(step + pretrain, loss);
    out.checkpoint.params = std::move(sparams);
    out.checkpoint.opt = std::move(sopt);
    out.checkpoint.has_optimizer = true;
    out.checkpoint.global_step = hy.steps;
    out.checkpoint.seed = seed;
    return out;
  }

  const ModelConfig cfg = model_config_for(kv, variant, train_data);
  ModelParams params = ModelParams::init(cfg, seed);
  if (kv.has("model.embedding_import")) import_embeddings(params, kv.require("model.embedding_import"));
  AdamState opt(params.set, hy.adam);
  const TrainResult r = train(params, opt, train_data, hy, seed, val);
  out.loss_curve = r.loss_curve;
  out.checkpoint.params = std::move(params);
  out.checkpoint.opt = std::move(opt);
  out.checkpoint.has_optimizer = true;
  out.checkpoint.global_step = opt.step_count();
  out.checkpoint.seed = seed;
  return out;
}

int cmd_train(const CommonOpts& opts) {
  KvConfig kv = resolve_config(opts, "model.variant", "train.task");
  const auto seed = kv.get_u64("seed", 1);
  const fs::path out = resolve_out(opts, "train");
  fs::create_directories(out);

  const Dataset full = read_manifest(kv.require("data.train_manifest"));
  const Dataset train_data = filter_task(full, kv.get("train.task", "mixed"));
  Dataset val_data;
  const bool has_val = kv.has("data.val_manifest");
  if (has_val) val_data = filter_task(read_manifest(kv.require("data.val_manifest")),
                                      kv.get("train.task", "mixed"));

  TrainedModel trained;
  const std::string resume = kv.get("train.resume", "");
  if (!resume.empty()) {
    Checkpoint ck = load_checkpoint(resume);
    const std::string want = kv.get("model.variant", variant_name(ck.params.config.variant));
    if (variant_from_string(want) != ck.params.config.variant)
      throw std::runtime_error("resume checkpoint is variant '" +
                               variant_name(ck.params.config.variant) + "' but config asks for '" +
                               want + "'");
    const TrainHyper hy = train_hyper_from_kv(kv);
    const TrainResult r =
        train(ck.params, ck.opt, train_data, hy, seed, has_val ? &val_data : nullptr);
    trained.loss_curve = r.loss_curve;
    ck.global_step = ck.opt.step_count();
    trained.checkpoint = std::move(ck);
  } else {
    const Variant variant = variant_from_string(kv.get("model.variant", "concat"));
    trained = run_training(kv, variant, train_data, has_val ? &val_data : nullptr, seed);
  }

  const std::string ck_path = fresh(out / "checkpoint.stvqa");
  save_checkpoint(trained.checkpoint, ck_path);
  write_loss_curve(fresh(out / "loss_curve.txt"), trained.loss_curve);

  kv.set_int("seed", static_cast<std::int64_t>(seed));
  kv.set("model.variant", variant_name(trained.checkpoint.params.config.variant));
  kv.save(fresh(out / "resolved.cfg"));

  std::cout << "checkpoint: " << ck_path << "\n";
  if (!trained.loss_curve.empty())
    std::cout << "final loss: " << trained.loss_curve.back().second << " at step "
              << trained.loss_curve.back().first << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

int cmd_gradcheck(const CommonOpts& opts, const std::string& corrupt) {
  KvConfig kv = resolve_config(opts, "gradcheck.variant", "");
  const auto seed = kv.get_u64("seed", 1);
  const std::string which = kv.get("gradcheck.variant", "all");
  const fs::path out = resolve_out(opts, "gradcheck");
  fs::create_directories(out);

  std::vector<Variant> variants;
  if (which == "all")
    variants.assign(std::begin(kAllVariants), std::end(kAllVariants));
  else
    variants.push_back(variant_from_string(which));

  std::ofstream report(fresh(out / "gradcheck.txt"));
  bool all_pass = true;
  for (Variant v : variants) {
    const ModelGradCheck check = gradcheck_variant(v, seed, corrupt);
    for (const auto& block : check.blocks) {
      const bool ok = block.result.pass();
      all_pass = all_pass && ok;
      char line[256];
      std::snprintf(line, sizeof line, "%-18s %-28s max_rel_err=%.3e %s",
                    variant_name(v).c_str(), block.name.c_str(), block.result.max_rel_err,
                    ok ? "PASS" : "FAIL");
      std::cout << line << "\n";
      report << line << "\n";
    }
  }
  kv.set_int("seed", static_cast<std::int64_t>(seed));
  kv.save(fresh(out / "resolved.cfg"));
  std::cout << (all_pass ? "gradcheck: all blocks PASS" : "gradcheck: FAIL") << "\n";
  return all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

int cmd_eval(const CommonOpts& opts) {
  KvConfig kv = resolve_config(opts, "", "");
  const fs::path out = resolve_out(opts, "eval");
  fs::create_directories(out);

  const Checkpoint ck = load_checkpoint(kv.require("eval.checkpoint"));
  const Dataset data = read_manifest(kv.require("data.manifest"));
  const PoolMode pool = pool_mode_from_string(kv.get("eval.pool", "none"));

  std::vector<PredictionRecord> records;
  const TaskMetrics direct = evaluate(ck.params, data, pool, &records);
  const std::string pred_path = fresh(out / "predictions.jsonl");
  write_predictions(pred_path, records);

  // metrics recomputed through the dump so the external format stays honest
  const TaskMetrics metrics =
      pool == PoolMode::avg ? direct : metrics_from_records(read_predictions(pred_path));

  std::ofstream mf(fresh(out / "metrics.txt"));
  mf.precision(17);
  for (const auto& [task, value] : metrics.value) {
    const std::string line = task_name(task) + (task == Task::count ? " l2 " : " acc ");
    std::cout << line << value << " (" << metrics.count.at(task) << " items)\n";
    mf << line << value << " " << metrics.count.at(task) << "\n";
  }
  kv.save(fresh(out / "resolved.cfg"));
  std::cout << "predictions: " << pred_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

int cmd_report(const CommonOpts& opts) {
  KvConfig kv = resolve_config(opts, "", "report.tasks");
  const auto seed0 = kv.get_u64("seed", 1);
  const fs::path out = resolve_out(opts, "report");
  fs::create_directories(out);

  std::vector<Variant> variants;
  const std::string vspec = kv.get("report.variants", "table5");
  if (vspec == "table5" || vspec == "all")
    variants.assign(std::begin(kAllVariants), std::end(kAllVariants));
  else
    for (const auto& name : split_list(vspec)) variants.push_back(variant_from_string(name));

  std::vector<Task> tasks;
  const std::string tspec = kv.get("report.tasks", "all");
  if (tspec == "all" || tspec == "mixed")
    tasks.assign(std::begin(kAllTasks), std::end(kAllTasks));
  else
    for (const auto& name : split_list(tspec)) tasks.push_back(task_from_string(name));

  std::vector<std::uint64_t> seeds;
  for (const auto& s : split_list(kv.get("report.seeds", "1,2,3"))) seeds.push_back(std::stoull(s));
  if (seeds.empty()) seeds.push_back(seed0);

  const bool eval_only = kv.get_int("report.eval_only", 0) != 0;
  const Dataset test_full = read_manifest(kv.require("data.test_manifest"));
  Dataset train_full;
  if (!eval_only) train_full = read_manifest(kv.require("data.train_manifest"));
  const std::string ck_dir =
      eval_only ? kv.require("report.checkpoint_dir") : (out / "checkpoints").string();
  if (!eval_only) fs::create_directories(ck_dir);

  auto cell = [&](Variant v, Task t, std::uint64_t seed) -> double {
    const std::string ck_path =
        (fs::path(ck_dir) / (variant_name(v) + "_" + task_name(t) + "_" + std::to_string(seed) +
                             ".stvqa")).string();
    Checkpoint ck;
    if (eval_only) {
      if (!fs::exists(ck_path))
        throw std::runtime_error("eval-only report: missing checkpoint " + ck_path);
      ck = load_checkpoint(ck_path);
    } else {
      const Dataset train_data = filter_task(train_full, task_name(t));
      TrainedModel trained = run_training(kv, v, train_data, nullptr, splitmix64(seed0 ^ seed));
      ck = std::move(trained.checkpoint);
      save_checkpoint(ck, fresh(ck_path));
    }
    const Dataset test_data = filter_task(test_full, task_name(t));
    const TaskMetrics metrics = evaluate(ck.params, test_data);
    return metrics.value.at(t);
  };

  const EvalReport report = ablation_report(variants, tasks, seeds, cell);
  const std::string text = report.render_text();
  std::cout << text;
  {
    std::ofstream tf(fresh(out / "report.txt"));
    tf << text;
    std::ofstream jf(fresh(out / "report.jsonl"));
    for (const auto& line : report.render_records()) jf << line << '\n';
  }
  kv.set_int("seed", static_cast<std::int64_t>(seed0));
  kv.save(fresh(out / "resolved.cfg"));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spatio-temporal video QA laboratory"};
  app.require_subcommand(1);

  CommonOpts gen_opts, train_opts, grad_opts, eval_opts, report_opts;
  std::string corrupt;

  CLI::App* c_gen = app.add_subcommand("generate", "build a synthetic dataset");
  add_common(c_gen, gen_opts);
  CLI::App* c_train = app.add_subcommand("train", "train a model variant");
  add_common(c_train, train_opts);
  CLI::App* c_grad = app.add_subcommand("gradcheck", "verify analytic gradients per block");
  add_common(c_grad, grad_opts);
  c_grad->add_option("--corrupt", corrupt, "perturb one block's analytic gradient (test hook)");
  CLI::App* c_eval = app.add_subcommand("eval", "evaluate a checkpoint on a manifest");
  add_common(c_eval, eval_opts);
  CLI::App* c_report = app.add_subcommand("report", "train/evaluate an ablation table");
  add_common(c_report, report_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_gen->parsed()) return cmd_generate(gen_opts);
    if (c_train->parsed()) return cmd_train(train_opts);
    if (c_grad->parsed()) return cmd_gradcheck(grad_opts, corrupt);
    if (c_eval->parsed()) return cmd_eval(eval_opts);
    if (c_report->parsed()) return cmd_report(report_opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
