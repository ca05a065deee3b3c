#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "manet/checkpoint.hpp"
#include "manet/heatmap.hpp"
#include "manet/sha256.hpp"
#include "manet/train.hpp"

namespace fs = std::filesystem;
using namespace manet;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::string data_root;
  int64_t seed = -1;
  std::string modality, adapter, dfm;
  int epochs = 0;
  int stride = 0;
};

RunConfig resolve_config(const CommonFlags& f) {
  RunConfig cfg;
  if (!f.config_path.empty()) cfg = parse_config_file(f.config_path);
  if (!f.data_root.empty()) cfg.data_root = f.data_root;
  if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
  if (f.seed >= 0) cfg.seed = static_cast<uint64_t>(f.seed);
  if (!f.modality.empty()) apply_config_kv(cfg, "modality", f.modality);
  if (!f.adapter.empty()) apply_config_kv(cfg, "adapter", f.adapter);
  if (!f.dfm.empty()) apply_config_kv(cfg, "dfm", f.dfm);
  if (f.epochs > 0) cfg.epochs = f.epochs;
  if (f.stride > 0) cfg.eval_stride = f.stride;
  return cfg;
}

void add_common_flags(CLI::App* cmd, CommonFlags& f, bool with_ablation) {
  cmd->add_option("--config", f.config_path, "key = value config file");
  cmd->add_option("--seed", f.seed, "override the run seed");
  cmd->add_option("--out", f.out_dir, "output directory");
  cmd->add_option("--data", f.data_root, "dataset root directory");
  if (with_ablation) {
    cmd->add_option("--modality", f.modality, "optical | both");
    cmd->add_option("--adapter", f.adapter, "none | standard | mmadapter");
    cmd->add_option("--dfm", f.dfm, "on | off");
  }
}

std::string group_digits(size_t n) {
  std::string raw = std::to_string(n);
  std::string out;
  int c = 0;
  for (auto it = raw.rbegin(); it != raw.rend(); ++it) {
    if (c && c % 3 == 0) out.push_back(',');
    out.push_back(*it);
    ++c;
  }
  return {out.rbegin(), out.rend()};
}

std::vector<MultimodalPatch> load_split(const std::string& root, const std::string& split) {
  std::vector<MultimodalPatch> out;
  for (const std::string& dir : list_patch_dirs(root, split)) out.push_back(load_patch(dir));
  return out;
}

// content hash over every dataset file, path-tagged, in sorted order
std::string dataset_fingerprint(const std::string& root) {
  Sha256 h;
  for (const char* split : {"train", "test"}) {
    if (!fs::is_directory(fs::path(root) / split)) continue;
    for (const std::string& dir : list_patch_dirs(root, split)) {
      for (const char* name : {"/optical.png", "/dsm.raw", "/dsm.hdr", "/labels.png"}) {
        std::string path = dir + name;
        h.update(path.substr(root.size()));
        h.update(sha256_file(path));
      }
    }
  }
  return h.hex();
}

std::string timestamp_utc() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_manifest(const std::string& path, const RunConfig& cfg,
                    const std::string& fingerprint,
                    const std::map<std::string, std::string>& artifacts) {
  nlohmann::json j;
  j["config"] = canonical_run_text(cfg);
  j["seed"] = cfg.seed;
  j["dataset_sha256"] = fingerprint;
  j["artifacts"] = artifacts;
  j["created"] = timestamp_utc();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

std::string metric_table(const MetricReport& rep, int window, int stride) {
  static const char* kShort[] = {"Bui.", "Tre.", "Low.", "Car", "Imp."};
  char line[256];
  std::string out;
  std::snprintf(line, sizeof(line), "window %d, stride %d\n", window, stride);
  out += line;
  out += "         ";
  for (const char* s : kShort) {
    std::snprintf(line, sizeof(line), "%8s", s);
    out += line;
  }
  out += "\n";
  auto row = [&](const char* name, auto get) {
    std::snprintf(line, sizeof(line), "%-9s", name);
    out += line;
    for (int c = 0; c < kForegroundClasses; ++c) {
      if (rep.per_class[c].present) {
        std::snprintf(line, sizeof(line), "%8.2f", get(rep.per_class[c]));
      } else {
        std::snprintf(line, sizeof(line), "%8s", "-");
      }
      out += line;
    }
    out += "\n";
  };
  row("F1", [](const ClassScore& c) { return c.f1; });
  row("IoU", [](const ClassScore& c) { return c.iou; });
  std::snprintf(line, sizeof(line), "OA %.2f   mF1 %.2f   mIoU %.2f\n", rep.oa, rep.mf1,
                rep.miou);
  out += line;
  return out;
}

int cmd_train(const CommonFlags& flags) {
  RunConfig cfg = resolve_config(flags);
  if (cfg.data_root.empty()) throw std::invalid_argument("train: --data or data_root required");
  if (cfg.out_dir.empty()) throw std::invalid_argument("train: --out or out_dir required");
  cfg.validate();
  if (cfg.model.adapter == AdapterMode::kNone) {
    std::cerr << "warning: adapter=none leaves the encoder untouched; only the fusion module "
                 "and decoder will train\n";
  }

  fs::create_directories(cfg.out_dir);
  auto train_patches = load_split(cfg.data_root, "train");
  auto test_patches = load_split(cfg.data_root, "test");

  Model model(cfg.model, cfg.seed);
  TrainResult result = train_model(model, cfg, train_patches, test_patches, &std::cout);

  std::string ckpt = cfg.out_dir + "/model.ckpt";
  std::string log_path = cfg.out_dir + "/metric_log.csv";
  save_checkpoint(ckpt, cfg.model, model.registry());
  {
    std::ofstream log(log_path, std::ios::binary);
    if (!log) throw std::runtime_error("cannot write " + log_path);
    log << result.metric_log;
  }
  write_manifest(cfg.out_dir + "/manifest.json", cfg, dataset_fingerprint(cfg.data_root),
                 {{"checkpoint", ckpt}, {"metric_log", log_path}});
  return 0;
}

int cmd_eval(const CommonFlags& flags, const std::string& ckpt_path) {
  RunConfig cfg = resolve_config(flags);
  if (cfg.data_root.empty()) throw std::invalid_argument("eval: --data or data_root required");

  ModelConfig stored = peek_checkpoint_config(ckpt_path);
  if (!flags.config_path.empty() && !(cfg.model == ModelConfig{}) && !(cfg.model == stored)) {
    throw std::invalid_argument("eval: config file model section disagrees with the checkpoint");
  }
  cfg.model = stored;
  cfg.validate();

  Model model(cfg.model, cfg.seed);
  load_checkpoint(ckpt_path, model.registry());

  auto test_patches = load_split(cfg.data_root, "test");
  int stride = cfg.resolved_eval_stride();
  MetricReport rep = evaluate_model(model, test_patches, stride);

  std::string table = metric_table(rep, cfg.model.tile, stride);
  std::cout << table;
  if (!cfg.out_dir.empty()) {
    fs::create_directories(cfg.out_dir);
    std::ofstream out(cfg.out_dir + "/metrics.txt", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + cfg.out_dir + "/metrics.txt");
    out << table;
  }
  return 0;
}

int cmd_params(const CommonFlags& flags) {
  RunConfig cfg = resolve_config(flags);
  cfg.model.validate();
  ParamRegistry reg(0, /*counting_only=*/true);
  Model::register_structure(cfg.model, reg);

  size_t enc = reg.count_prefix("encoder.");
  size_t ada = reg.count_prefix("adapters.");
  size_t dfm = reg.count_prefix("dfm.");
  size_t dec = reg.count_prefix("decoder.");
  size_t frozen = reg.count_trainable(false);
  size_t trainable = reg.count_trainable(true);

  std::printf("parameter report: tile %d, patch %d, embed %d, depth %d, heads %d\n",
              cfg.model.tile, cfg.model.patch, cfg.model.embed_dim, cfg.model.depth,
              cfg.model.heads);
  std::printf("  encoder backbone (frozen)   %15s\n", group_digits(enc).c_str());
  std::printf("  adapters        (trainable) %15s\n", group_digits(ada).c_str());
  std::printf("  fusion module   (trainable) %15s\n", group_digits(dfm).c_str());
  std::printf("  decoder         (trainable) %15s\n", group_digits(dec).c_str());
  std::printf("  total frozen                %15s\n", group_digits(frozen).c_str());
  std::printf("  total trainable             %15s\n", group_digits(trainable).c_str());
  std::printf("  total                       %15s\n", group_digits(frozen + trainable).c_str());
  std::printf("backbone count excludes: relative position encodings (not implemented; global\n"
              "attention only) and the convolutional feature neck (decoder replaces it).\n");
  return 0;
}

int cmd_synth(const CommonFlags& flags, int n_train, int n_test, int patch_size) {
  RunConfig cfg = resolve_config(flags);
  if (cfg.out_dir.empty()) throw std::invalid_argument("synth: --out required");
  synth_generate(cfg.out_dir, n_train, n_test, cfg.seed, patch_size);
  std::printf("wrote %d train + %d test patches of %dpx under %s\n", n_train, n_test, patch_size,
              cfg.out_dir.c_str());
  return 0;
}

int cmd_heatmap(const CommonFlags& flags, const std::string& ckpt_path,
                const std::string& patch_dir) {
  RunConfig cfg = resolve_config(flags);
  if (cfg.out_dir.empty()) throw std::invalid_argument("heatmap: --out required");

  std::string dir = patch_dir;
  if (dir.empty()) {
    if (cfg.data_root.empty()) {
      throw std::invalid_argument("heatmap: need --patch or --data");
    }
    dir = list_patch_dirs(cfg.data_root, "test")[0];
  }

  ModelConfig stored = peek_checkpoint_config(ckpt_path);
  Model model(stored, cfg.seed);
  load_checkpoint(ckpt_path, model.registry());

  MultimodalPatch patch = load_patch(dir);
  TileIndex tile{0, 0, stored.tile, stored.tile};
  if (patch.height < stored.tile || patch.width < stored.tile) {
    throw std::invalid_argument("heatmap: patch smaller than the model tile");
  }
  Sample sample = crop_sample(patch, tile);
  auto written = export_heatmaps(model, sample, cfg.out_dir);
  for (const std::string& p : written) std::printf("%s\n", p.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"manet: multimodal semantic segmentation experiments"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string ckpt_path, patch_dir;
  int n_train = 8, n_test = 2, patch_size = 128;

  CLI::App* train = app.add_subcommand("train", "train a model and write a run directory");
  add_common_flags(train, flags, true);
  train->add_option("--epochs", flags.epochs, "override epoch count");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_common_flags(eval, flags, false);
  eval->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  eval->add_option("--stride", flags.stride, "sliding-window stride (default tile/2)");

  CLI::App* params = app.add_subcommand("params", "report parameter counts");
  add_common_flags(params, flags, true);

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  add_common_flags(synth, flags, false);
  synth->add_option("--n", n_train, "training patches");
  synth->add_option("--m", n_test, "test patches");
  synth->add_option("--patch-size", patch_size, "patch edge length in pixels");

  CLI::App* heatmap = app.add_subcommand("heatmap", "export probability and feature maps");
  add_common_flags(heatmap, flags, false);
  heatmap->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  heatmap->add_option("--patch", patch_dir, "patch directory (default: first test patch)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (train->parsed()) return cmd_train(flags);
    if (eval->parsed()) return cmd_eval(flags, ckpt_path);
    if (params->parsed()) return cmd_params(flags);
    if (synth->parsed()) return cmd_synth(flags, n_train, n_test, patch_size);
    if (heatmap->parsed()) return cmd_heatmap(flags, ckpt_path, patch_dir);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
