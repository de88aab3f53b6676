#include "gr1/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "gr1/checkpoint.hpp"
#include "gr1/training.hpp"
#include "json.hpp"

namespace gr1 {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

const char* language_mode_name(LanguageMode mode) {
  return mode == LanguageMode::TrainTemplates ? "train_templates"
                                              : "unseen_templates";
}

RolloutResult rollout(Policy& policy, Env& env, const Instruction& instruction,
                      int timeout) {
  policy.begin_episode(instruction);
  RolloutResult result;
  result.task_id = instruction.task_id;
  ImageFrame obs = render(env.state(), env.image_size());
  for (int t = 0; t < timeout; ++t) {
    Action a = policy.act(env.mutable_state(), obs);
    auto [next_obs, done] = env.step(a);
    obs = std::move(next_obs);
    result.steps_used = t + 1;
    if (done) {
      result.success = true;
      break;
    }
  }
  if (timeout == 0) result.steps_used = 0;
  return result;
}

RolloutResult rollout_episode(Policy& policy, TaskId task, SceneId scene,
                              const Instruction& instruction, int timeout,
                              uint64_t seed, double max_step, int image_size) {
  auto [state, frame] = Env::reset(scene, task, seed, max_step, image_size);
  Env env(state.scene, TaskSpec::make(task), max_step, image_size);
  env.set_state(state);
  return rollout(policy, env, instruction, timeout);
}

ChainEvalResult chain_metrics(std::vector<int> completed) {
  ChainEvalResult r;
  r.completed = std::move(completed);
  if (r.completed.empty())
    throw std::invalid_argument("chain_metrics: empty log");
  const double n = double(r.completed.size());
  for (int k = 1; k <= 5; ++k) {
    int count = 0;
    for (int c : r.completed)
      if (c >= k) ++count;
    r.sr[size_t(k - 1)] = count / n;
  }
  double sum = 0;
  for (int c : r.completed) sum += c;
  r.avg_len = sum / n;
  return r;
}

std::vector<TaskId> sample_chain_tasks(uint64_t chain_seed, int length) {
  Rng rng(hash_combine(chain_seed, 0xc4a1ull));
  std::vector<TaskId> tasks;
  int prev = -1;
  for (int i = 0; i < length; ++i) {
    int t = int(rng.uniform_int(kNumTasks));
    while (t == prev) t = int(rng.uniform_int(kNumTasks));
    tasks.push_back(TaskId(t));
    prev = t;
  }
  return tasks;
}

ChainEvalResult evaluate_chains(Policy& policy, int n_chains, SceneId scene,
                                LanguageMode language, uint64_t seed,
                                int timeout, double max_step, int image_size) {
  if (n_chains < 1)
    throw std::invalid_argument("evaluate_chains: n_chains must be >= 1");
  std::vector<int> completed;
  for (int chain = 0; chain < n_chains; ++chain) {
    uint64_t chain_seed = hash_combine(seed, 0xc0deull, uint64_t(chain));
    std::vector<TaskId> tasks = sample_chain_tasks(chain_seed);

    // Fresh environment per chain, seeded so the first task starts feasible.
    auto [state, frame] =
        Env::reset(scene, tasks[0], chain_seed, max_step, image_size);
    Env env(state.scene, TaskSpec::make(tasks[0]), max_step, image_size);
    env.set_state(state);

    Rng lang_rng(hash_combine(chain_seed, 0x1a2bull));
    int done_count = 0;
    for (int k = 0; k < int(tasks.size()); ++k) {
      env.begin_task(TaskSpec::make(tasks[size_t(k)]));
      int template_id =
          language == LanguageMode::TrainTemplates
              ? int(lang_rng.uniform_int(kTrainTemplates))
              : kTrainTemplates +
                    int(lang_rng.uniform_int(kTemplatesPerTask -
                                             kTrainTemplates));
      Instruction instruction = instruction_for(tasks[size_t(k)], template_id);
      RolloutResult r = rollout(policy, env, instruction, timeout);
      if (!r.success) break;
      ++done_count;
    }
    completed.push_back(done_count);
  }
  return chain_metrics(std::move(completed));
}

SplitSpec make_split(const std::string& split_id) {
  SplitSpec s;
  s.id = split_id;
  if (split_id == "ABCD_D") {
    s.train_scenes = {SceneId::A, SceneId::B, SceneId::C, SceneId::D};
  } else if (split_id == "ABC_D") {
    s.train_scenes = {SceneId::A, SceneId::B, SceneId::C};
  } else if (split_id == "tenpercent") {
    s.train_scenes = {SceneId::A, SceneId::B, SceneId::C, SceneId::D};
    s.subsample_fraction = 0.1;
  } else if (split_id == "unseen_lang") {
    s.train_scenes = {SceneId::A, SceneId::B, SceneId::C, SceneId::D};
    s.language = LanguageMode::UnseenTemplates;
  } else {
    throw std::invalid_argument("make_split: unknown split " + split_id);
  }
  return s;
}

std::vector<int> split_train_episodes(const SplitSpec& split,
                                      const DemoDataset& demos,
                                      uint64_t seed) {
  auto in_scenes = [&](SceneId s) {
    return std::find(split.train_scenes.begin(), split.train_scenes.end(),
                     s) != split.train_scenes.end();
  };
  std::vector<std::vector<int>> by_task(kNumTasks);
  for (const auto& e : demos.episodes())
    if (in_scenes(e.scene)) by_task[size_t(e.task)].push_back(e.id);

  std::vector<int> out;
  for (int t = 0; t < kNumTasks; ++t) {
    auto& eps = by_task[size_t(t)];
    if (split.subsample_fraction >= 1.0) {
      out.insert(out.end(), eps.begin(), eps.end());
      continue;
    }
    int keep = std::max(
        1, int(std::lround(split.subsample_fraction * double(eps.size()))));
    Rng rng(hash_combine(seed, 0x5b5ull, uint64_t(t)));
    rng.shuffle(eps);
    eps.resize(size_t(std::min(keep, int(eps.size()))));
    std::sort(eps.begin(), eps.end());
    out.insert(out.end(), eps.begin(), eps.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void save_eval_report(const EvalReport& report, const std::string& path) {
  json j;
  j["split"] = report.split;
  j["language_mode"] = report.language_mode;
  j["n_chains"] = report.n_chains;
  j["sr"] = report.sr;
  j["avg_len"] = report.avg_len;
  j["seed"] = report.seed;
  j["checkpoint_hash"] = report.checkpoint_hash;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("eval report: cannot write " + path);
  out << j.dump(2) << "\n";
}

EvalReport load_eval_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("eval report: cannot open " + path);
  json j;
  in >> j;
  EvalReport r;
  r.split = j.at("split").get<std::string>();
  r.language_mode = j.at("language_mode").get<std::string>();
  r.n_chains = j.at("n_chains").get<int>();
  auto sr = j.at("sr");
  for (int k = 0; k < 5; ++k) r.sr[size_t(k)] = sr.at(k).get<double>();
  r.avg_len = j.at("avg_len").get<double>();
  r.seed = j.at("seed").get<uint64_t>();
  r.checkpoint_hash = j.at("checkpoint_hash").get<std::string>();
  return r;
}

std::vector<AblationCell> standard_ablation_cells() {
  return {{"full", true, true, -1},
          {"no_pretrain", false, true, -1},
          {"no_videopred", false, false, -1}};
}

std::vector<AblationCell> future_step_sweep_cells() {
  return {{"dt1", false, true, 1},
          {"dt3", false, true, 3},
          {"dt5", false, true, 5}};
}

namespace {

EvalReport eval_model_chains(Gr1Model<float>& model, const Config& cfg,
                             const SplitSpec& split, uint64_t eval_seed,
                             const std::string& checkpoint_hash) {
  ModelPolicy policy(model);
  ChainEvalResult r = evaluate_chains(
      policy, cfg.n_chains, split.eval_scene, split.language, eval_seed,
      cfg.eval_timeout, cfg.max_step, cfg.image_size);
  EvalReport rep;
  rep.split = split.id;
  rep.language_mode = language_mode_name(split.language);
  rep.n_chains = cfg.n_chains;
  rep.sr = r.sr;
  rep.avg_len = r.avg_len;
  rep.seed = eval_seed;
  rep.checkpoint_hash = checkpoint_hash;
  return rep;
}

}  // namespace

AblationReport run_ablation(const std::vector<AblationCell>& cells,
                            const Config& cfg,
                            const std::vector<uint64_t>& seeds,
                            const std::string& demos_dir,
                            const std::string& encoder_checkpoint,
                            const std::string& pretrain_checkpoint,
                            const std::string& split_id,
                            const std::string& out_dir) {
  fs::create_directories(out_dir + "/runs");
  DemoDataset demos(demos_dir);
  SplitSpec split = make_split(split_id);
  CheckpointData enc_ck = load_checkpoint(encoder_checkpoint);
  CheckpointData pre_ck;
  bool have_pre = !pretrain_checkpoint.empty();
  if (have_pre) pre_ck = load_checkpoint(pretrain_checkpoint);

  AblationReport report;
  for (const auto& cell : cells) {
    for (size_t si = 0; si < seeds.size(); ++si) {
      uint64_t seed = seeds[si];
      AblationRun run;
      run.cell = cell.name;
      run.seed = seed;
      try {
        Config cell_cfg = cfg;
        cell_cfg.video_prediction = cell.video_prediction;
        Gr1Model<float> model(cell_cfg, seed);
        apply_checkpoint(enc_ck, model.store(), "frozen/vit");
        if (cell.pretrained_init) {
          if (!have_pre)
            throw std::runtime_error("cell requires a pretrain checkpoint");
          apply_checkpoint(pre_ck, model.store());
        }

        FinetuneOptions opt;
        opt.episodes = split_train_episodes(split, demos, cfg.seed);
        opt.delta_t = cell.delta_t;
        MetricsWriter metrics(out_dir + "/runs/" + cell.name + "_s" +
                              std::to_string(si) + "_metrics.ndjson");
        finetune(model, demos, cell_cfg, seed, opt, metrics);

        // Chain seeds depend on the seed index only, so every cell is
        // evaluated on the same chains.
        uint64_t eval_seed = hash_combine(cfg.seed, 0xe7ull, uint64_t(si));
        run.report = eval_model_chains(model, cell_cfg, split, eval_seed,
                                       model.store().hash_subset(false));
        save_eval_report(run.report, out_dir + "/runs/" + cell.name + "_s" +
                                         std::to_string(si) + ".json");
        run.ok = true;
      } catch (const std::exception& e) {
        run.ok = false;
        run.error = e.what();
      }
      report.runs.push_back(std::move(run));
    }
  }

  // aggregate
  for (const auto& cell : cells) {
    AblationCellSummary s;
    s.cell = cell.name;
    std::vector<double> lens;
    for (const auto& r : report.runs)
      if (r.cell == cell.name && r.ok) lens.push_back(r.report.avg_len);
    s.n_ok = int(lens.size());
    if (!lens.empty()) {
      double mean = 0;
      for (double v : lens) mean += v;
      mean /= double(lens.size());
      double var = 0;
      for (double v : lens) var += (v - mean) * (v - mean);
      var /= double(lens.size());
      s.avg_len_mean = mean;
      s.avg_len_std = std::sqrt(var);
    }
    report.cells.push_back(std::move(s));
  }
  save_ablation_report(report, out_dir + "/ablation_report.json");
  return report;
}

AblationReport build_ablation_report(const std::string& out_dir) {
  AblationReport report;
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(out_dir + "/runs"))
    if (entry.path().extension() == ".json")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());

  std::vector<std::string> cell_order;
  for (const auto& f : files) {
    std::string base = fs::path(f).stem().string();
    auto pos = base.rfind("_s");
    if (pos == std::string::npos) continue;
    AblationRun run;
    run.cell = base.substr(0, pos);
    run.ok = true;
    run.report = load_eval_report(f);
    run.seed = run.report.seed;
    if (std::find(cell_order.begin(), cell_order.end(), run.cell) ==
        cell_order.end())
      cell_order.push_back(run.cell);
    report.runs.push_back(std::move(run));
  }
  for (const auto& cell : cell_order) {
    AblationCellSummary s;
    s.cell = cell;
    std::vector<double> lens;
    for (const auto& r : report.runs)
      if (r.cell == cell && r.ok) lens.push_back(r.report.avg_len);
    s.n_ok = int(lens.size());
    if (!lens.empty()) {
      double mean = 0;
      for (double v : lens) mean += v;
      mean /= double(lens.size());
      double var = 0;
      for (double v : lens) var += (v - mean) * (v - mean);
      var /= double(lens.size());
      s.avg_len_mean = mean;
      s.avg_len_std = std::sqrt(var);
    }
    report.cells.push_back(std::move(s));
  }
  return report;
}

void save_ablation_report(const AblationReport& report,
                          const std::string& path) {
  json j;
  json runs = json::array();
  for (const auto& r : report.runs) {
    json jr;
    jr["cell"] = r.cell;
    jr["seed"] = r.seed;
    jr["ok"] = r.ok;
    if (!r.ok) {
      jr["error"] = r.error;
    } else {
      jr["avg_len"] = r.report.avg_len;
      jr["sr"] = r.report.sr;
    }
    runs.push_back(std::move(jr));
  }
  j["runs"] = std::move(runs);
  json cells = json::array();
  for (const auto& c : report.cells) {
    json jc;
    jc["cell"] = c.cell;
    jc["n_ok"] = c.n_ok;
    jc["avg_len_mean"] = c.avg_len_mean;
    jc["avg_len_std"] = c.avg_len_std;
    cells.push_back(std::move(jc));
  }
  j["cells"] = std::move(cells);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("ablation report: cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace gr1
