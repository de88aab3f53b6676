#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "gr1/checkpoint.hpp"
#include "gr1/config.hpp"
#include "gr1/dataset.hpp"
#include "gr1/envsim.hpp"
#include "gr1/evalharness.hpp"
#include "gr1/model.hpp"
#include "gr1/svgplot.hpp"
#include "gr1/training.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace gr1;

namespace {

std::string data_root() {
  const char* env = std::getenv("GR1_DATA_DIR");
  return env && *env ? env : "data";
}

// Exclusive ownership of an output directory for the duration of a run.
class DirLock {
 public:
  explicit DirLock(const std::string& dir) : path_(dir + "/.lock") {
    fs::create_directories(dir);
    if (fs::exists(path_))
      throw std::invalid_argument("output directory is locked: " + dir +
                                  " (remove .lock if no run is active)");
    std::ofstream out(path_);
    if (!out) throw std::runtime_error("cannot create lock file " + path_);
    out << "pid " << ::getpid() << "\n";
  }
  ~DirLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }

 private:
  std::string path_;
};

void write_run_manifest(const std::string& dir, const std::string& command,
                        const Config& cfg, uint64_t seed,
                        const std::map<std::string, std::string>& inputs) {
  json j;
  j["command"] = command;
  j["seed"] = seed;
  j["config"] = json::parse(config_to_json_text(cfg));
  json jin = json::object();
  for (const auto& [k, v] : inputs) jin[k] = v;
  j["inputs"] = std::move(jin);
  std::ofstream out(dir + "/run_manifest.json", std::ios::binary);
  out << j.dump(2) << "\n";
}

struct CommonArgs {
  std::string config_path;
  int64_t seed = -1;  // -1: use config seed
  std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& args, const std::string& out_default,
                bool config_required = true) {
  auto* copt = cmd->add_option("--config", args.config_path, "config JSON path");
  if (config_required) copt->required();
  cmd->add_option("--seed", args.seed, "seed override");
  cmd->add_option("--out", args.out, "output directory")
      ->default_val(data_root() + "/" + out_default);
}

Config load_common_config(CommonArgs& args) {
  Config cfg = load_config(args.config_path);
  if (args.seed >= 0) cfg.seed = uint64_t(args.seed);
  return cfg;
}

std::string dataset_content_hash(const std::string& dir) {
  std::ifstream in(dir + "/manifest.json");
  if (!in) throw std::runtime_error("missing manifest in " + dir);
  json j;
  in >> j;
  return j.at("content_hash").get<std::string>();
}

int cmd_gen_videos(CommonArgs& args) {
  Config cfg = load_common_config(args);
  DirLock lock(args.out);
  write_video_dataset(args.out, cfg.n_clips, cfg.clip_len, cfg.image_size,
                      cfg.seed);
  write_run_manifest(args.out, "gen-videos", cfg, cfg.seed, {});
  std::cout << "wrote " << cfg.n_clips << " clips to " << args.out << "\n";
  return 0;
}

int cmd_gen_demos(CommonArgs& args) {
  Config cfg = load_common_config(args);
  DirLock lock(args.out);
  DemoGenConfig gen;
  for (int t = 0; t < kNumTasks; ++t) gen.tasks.push_back(TaskId(t));
  for (int s = 0; s < kNumScenes; ++s) gen.scenes.push_back(SceneId(s));
  gen.n_per_task = cfg.demos_per_task;
  gen.max_step = cfg.max_step;
  gen.image_size = cfg.image_size;
  gen.timeout = cfg.eval_timeout;
  gen.expert_noise = cfg.expert_noise;
  auto demos = generate_demos(gen, cfg.seed);
  write_demo_dataset(args.out, demos, cfg.image_size, cfg.d_arm, cfg.seed);
  write_run_manifest(args.out, "gen-demos", cfg, cfg.seed, {});
  std::cout << "wrote " << demos.size() << " episodes to " << args.out << "\n";
  return 0;
}

int cmd_pretrain_encoder(CommonArgs& args, const std::string& corpus_dir) {
  Config cfg = load_common_config(args);
  DirLock lock(args.out);
  VideoDataset corpus(corpus_dir);

  ParamStore<float> store;
  Rng rng(hash_combine(cfg.seed, 0xee1ull));
  VitConfig vc;
  vc.image_size = cfg.image_size;
  vc.patch_size = cfg.patch_size;
  vc.d_img = cfg.d_img;
  vc.layers = cfg.enc_layers;
  vc.heads = cfg.enc_heads;
  VitEncoder<float> vit(store, vc, rng, true);

  auto result = pretrain_image_encoder(store, vit, corpus, cfg, cfg.seed);
  std::map<std::string, std::string> inputs{
      {"corpus", dataset_content_hash(corpus_dir)}};
  save_checkpoint(args.out, store, cfg, cfg.seed, inputs);
  write_run_manifest(args.out, "pretrain-encoder", cfg, cfg.seed, inputs);
  std::cout << "encoder reconstruction loss: " << result.heldout_loss_step0
            << " -> " << result.heldout_loss_final << "\n";
  std::cout << "frozen hash: " << store.hash_subset(true) << "\n";
  return 0;
}

int cmd_pretrain(CommonArgs& args, const std::string& corpus_dir,
                 const std::string& encoder_ck) {
  Config cfg = load_common_config(args);
  DirLock lock(args.out);
  VideoDataset corpus(corpus_dir);

  Gr1Model<float> model(cfg, cfg.seed);
  CheckpointData enc = load_checkpoint(encoder_ck);
  apply_checkpoint(enc, model.store(), "frozen/vit");

  MetricsWriter metrics(args.out + "/metrics.ndjson");
  auto result = pretrain(model, corpus, cfg, cfg.seed, metrics);

  std::map<std::string, std::string> inputs{
      {"corpus", dataset_content_hash(corpus_dir)},
      {"encoder", enc.content_hash}};
  save_checkpoint(args.out + "/checkpoint", model.store(), cfg, cfg.seed,
                  inputs);
  write_run_manifest(args.out, "pretrain", cfg, cfg.seed, inputs);
  std::cout << "held-out video loss: " << result.heldout_loss_step0 << " -> "
            << result.heldout_loss_final << "\n";
  return 0;
}

int cmd_finetune(CommonArgs& args, const std::string& demos_dir,
                 const std::string& encoder_ck, const std::string& init_ck,
                 const std::string& split_id) {
  Config cfg = load_common_config(args);
  DirLock lock(args.out);
  DemoDataset demos(demos_dir);

  Gr1Model<float> model(cfg, cfg.seed);
  std::map<std::string, std::string> inputs{
      {"demos", dataset_content_hash(demos_dir)}};
  if (!init_ck.empty()) {
    CheckpointData init = load_checkpoint(init_ck);
    apply_checkpoint(init, model.store());
    inputs["init"] = init.content_hash;
  } else {
    CheckpointData enc = load_checkpoint(encoder_ck);
    apply_checkpoint(enc, model.store(), "frozen/vit");
    inputs["encoder"] = enc.content_hash;
  }

  FinetuneOptions opt;
  SplitSpec split = make_split(split_id);
  opt.episodes = split_train_episodes(split, demos, cfg.seed);
  MetricsWriter metrics(args.out + "/metrics.ndjson");
  auto result = finetune(model, demos, cfg, cfg.seed, opt, metrics);

  save_checkpoint(args.out + "/checkpoint", model.store(), cfg, cfg.seed,
                  inputs);
  write_run_manifest(args.out, "finetune", cfg, cfg.seed, inputs);
  std::cout << "final losses: arm " << result.last.l_arm << " gripper "
            << result.last.l_gripper << " video " << result.last.l_video
            << "\n";
  return 0;
}

int cmd_eval(CommonArgs& args, const std::string& checkpoint,
             const std::string& split_id) {
  Config cfg = load_common_config(args);
  DirLock lock(args.out);

  Gr1Model<float> model(cfg, cfg.seed);
  CheckpointData ck = load_checkpoint(checkpoint);
  apply_checkpoint(ck, model.store());

  SplitSpec split = make_split(split_id);
  ModelPolicy policy(model);
  ChainEvalResult r = evaluate_chains(policy, cfg.n_chains, split.eval_scene,
                                      split.language, cfg.seed,
                                      cfg.eval_timeout, cfg.max_step,
                                      cfg.image_size);
  EvalReport report;
  report.split = split.id;
  report.language_mode = language_mode_name(split.language);
  report.n_chains = cfg.n_chains;
  report.sr = r.sr;
  report.avg_len = r.avg_len;
  report.seed = cfg.seed;
  report.checkpoint_hash = ck.content_hash;
  save_eval_report(report, args.out + "/eval_report.json");
  write_run_manifest(args.out, "eval", cfg, cfg.seed,
                     {{"checkpoint", ck.content_hash}});
  std::cout << "avg_len " << report.avg_len << " sr@1 " << report.sr[0]
            << " sr@5 " << report.sr[4] << "\n";
  return 0;
}

int cmd_ablate(CommonArgs& args, const std::string& demos_dir,
               const std::string& encoder_ck, const std::string& pretrain_ck,
               const std::string& split_id, int n_seeds, bool sweep_dt,
               bool from_existing) {
  Config cfg = load_common_config(args);
  if (from_existing) {
    AblationReport report = build_ablation_report(args.out);
    save_ablation_report(report, args.out + "/ablation_report.json");
    for (const auto& c : report.cells)
      std::cout << c.cell << ": avg_len " << c.avg_len_mean << " +/- "
                << c.avg_len_std << " (n=" << c.n_ok << ")\n";
    return 0;
  }
  DirLock lock(args.out);
  std::vector<uint64_t> seeds;
  for (int i = 0; i < n_seeds; ++i)
    seeds.push_back(hash_combine(cfg.seed, 0xab1ull, uint64_t(i)));
  auto cells = sweep_dt ? future_step_sweep_cells() : standard_ablation_cells();
  AblationReport report =
      run_ablation(cells, cfg, seeds, demos_dir, encoder_ck, pretrain_ck,
                   split_id, args.out);
  std::map<std::string, std::string> inputs{
      {"demos", dataset_content_hash(demos_dir)}};
  write_run_manifest(args.out, "ablate", cfg, cfg.seed, inputs);
  for (const auto& c : report.cells)
    std::cout << c.cell << ": avg_len " << c.avg_len_mean << " +/- "
              << c.avg_len_std << " (n=" << c.n_ok << ")\n";
  for (const auto& r : report.runs)
    if (!r.ok)
      std::cout << "failed: " << r.cell << " seed " << r.seed << ": "
                << r.error << "\n";
  return 0;
}

int cmd_plot(CommonArgs& args, const std::vector<std::string>& reports) {
  if (reports.empty())
    throw std::invalid_argument("plot: no report files given");
  DirLock lock(args.out);

  std::vector<CurveDatum> curves;
  int n_svg = 0;
  for (const auto& path : reports) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("plot: cannot open " + path);
    json j;
    in >> j;
    if (j.contains("cells")) {
      std::vector<BarDatum> bars;
      for (const auto& c : j.at("cells"))
        bars.push_back({c.at("cell").get<std::string>(),
                        c.at("avg_len_mean").get<double>(),
                        c.at("avg_len_std").get<double>()});
      std::string svg = render_bar_chart_svg("tasks completed in a row", bars,
                                             "average length");
      std::string out_path = args.out + "/" +
                             fs::path(path).stem().string() + "_bars.svg";
      write_text_file(out_path, svg);
      ++n_svg;
    } else {
      CurveDatum c;
      c.label = j.at("split").get<std::string>() + " seed " +
                std::to_string(j.at("seed").get<uint64_t>());
      for (const auto& v : j.at("sr")) c.values.push_back(v.get<double>());
      curves.push_back(std::move(c));
    }
  }
  if (!curves.empty()) {
    std::string svg = render_curve_chart_svg("success rate by chain position",
                                             curves, "tasks in a row", "sr@k");
    write_text_file(args.out + "/sr_curves.svg", svg);
    ++n_svg;
  }
  std::cout << "wrote " << n_svg << " chart(s) to " << args.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tabletop video-pretraining and behavior-cloning pipeline"};
  app.require_subcommand(1);

  CommonArgs gv_args, gd_args, pe_args, pt_args, ft_args, ev_args, ab_args,
      pl_args;
  std::string corpus_dir = data_root() + "/videos";
  std::string demos_dir = data_root() + "/demos";
  std::string encoder_ck = data_root() + "/encoder";
  std::string pretrain_ck, init_ck, checkpoint, split_id = "ABCD_D";
  int n_seeds = 5;
  bool sweep_dt = false, from_existing = false;
  std::vector<std::string> report_paths;

  auto* gv = app.add_subcommand("gen-videos", "generate the video corpus");
  add_common(gv, gv_args, "videos");

  auto* gd = app.add_subcommand("gen-demos", "generate expert demonstrations");
  add_common(gd, gd_args, "demos");

  auto* pe = app.add_subcommand("pretrain-encoder",
                                "masked-reconstruction image encoder training");
  add_common(pe, pe_args, "encoder");
  pe->add_option("--corpus", corpus_dir, "video dataset directory");

  auto* pt = app.add_subcommand("pretrain", "video-prediction pre-training");
  add_common(pt, pt_args, "pretrain");
  pt->add_option("--corpus", corpus_dir, "video dataset directory");
  pt->add_option("--encoder", encoder_ck, "encoder checkpoint directory");

  auto* ft = app.add_subcommand("finetune", "behavior cloning on demos");
  add_common(ft, ft_args, "finetune");
  ft->add_option("--demos", demos_dir, "demo dataset directory");
  ft->add_option("--encoder", encoder_ck, "encoder checkpoint directory");
  ft->add_option("--init", init_ck, "initialize from this checkpoint");
  ft->add_option("--split", split_id, "ABCD_D | ABC_D | tenpercent | unseen_lang");

  auto* ev = app.add_subcommand("eval", "closed-loop chain evaluation");
  add_common(ev, ev_args, "eval");
  ev->add_option("--checkpoint", checkpoint, "model checkpoint directory")
      ->required();
  ev->add_option("--split", split_id, "ABCD_D | ABC_D | tenpercent | unseen_lang");

  auto* ab = app.add_subcommand("ablate", "train/eval an ablation grid");
  add_common(ab, ab_args, "ablation");
  ab->add_option("--demos", demos_dir, "demo dataset directory");
  ab->add_option("--encoder", encoder_ck, "encoder checkpoint directory");
  ab->add_option("--pretrained", pretrain_ck, "pretrain checkpoint directory");
  ab->add_option("--split", split_id, "training/eval split");
  ab->add_option("--seeds", n_seeds, "number of seeds per cell");
  ab->add_flag("--sweep-dt", sweep_dt, "future-step sweep {1,3,5}");
  ab->add_flag("--from-existing", from_existing,
               "rebuild the report from persisted runs, no retraining");

  auto* pl = app.add_subcommand("plot", "render charts from reports");
  add_common(pl, pl_args, "plots", false);
  pl->add_option("reports", report_paths, "report JSON files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gv->parsed()) return cmd_gen_videos(gv_args);
    if (gd->parsed()) return cmd_gen_demos(gd_args);
    if (pe->parsed()) return cmd_pretrain_encoder(pe_args, corpus_dir);
    if (pt->parsed()) return cmd_pretrain(pt_args, corpus_dir, encoder_ck);
    if (ft->parsed())
      return cmd_finetune(ft_args, demos_dir, encoder_ck, init_ck, split_id);
    if (ev->parsed()) return cmd_eval(ev_args, checkpoint, split_id);
    if (ab->parsed())
      return cmd_ablate(ab_args, demos_dir, encoder_ck, pretrain_ck, split_id,
                        n_seeds, sweep_dt, from_existing);
    if (pl->parsed()) return cmd_plot(pl_args, report_paths);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
