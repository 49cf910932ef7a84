// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0
//
// forgeloc command-line front end.
//
//   forgeloc datagen       synthesize a corpus
//   forgeloc pretrain-ffe  camera-model pretraining of the forensic extractor
//   forgeloc train         run one curriculum stage
//   forgeloc infer         detection score, mask and attention maps per frame
//   forgeloc eval          corpus metrics
//   forgeloc bench         throughput
//
// Exit codes: 0 success, 1 invalid input or config, 2 runtime failure,
// 3 missing or broken external encoder. Failures print one JSON error record
// on stderr. Every command validates its inputs before touching --out.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <torch/torch.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "forgeloc/checkpoint.hpp"
#include "forgeloc/config.hpp"
#include "forgeloc/datagen/corpus.hpp"
#include "forgeloc/datagen/encoder.hpp"
#include "forgeloc/errors.hpp"
#include "forgeloc/evaluation.hpp"
#include "forgeloc/image_io.hpp"
#include "forgeloc/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace forgeloc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitEnvironment = 3;

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::string profile = "desk";
  std::string out;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* profile_opt = nullptr;
};

void add_common(CLI::App* cmd, Common& c, bool needs_out = true) {
  cmd->add_option("--config", c.config, "JSON run config")->check(CLI::ExistingFile);
  c.seed_opt = cmd->add_option("--seed", c.seed, "global seed (overrides the config)");
  c.profile_opt =
      cmd->add_option("--profile", c.profile, "desk or full")->check(CLI::IsMember({"desk", "full"}));
  auto* out = cmd->add_option("--out", c.out, "output directory");
  if (needs_out) out->required();
}

RunConfig resolve(const Common& c, const std::function<void(json&)>& tweak = {}) {
  json overrides = c.config.empty() ? json::object() : read_config_file(c.config);
  if (!overrides.is_object()) throw ConfigError("config file must hold a JSON object");
  if (c.profile_opt->count() > 0) overrides["profile"] = c.profile;
  if (c.seed_opt->count() > 0) overrides["seed"] = c.seed;
  if (tweak) tweak(overrides);
  return run_config_from_json(overrides, c.profile);
}

// The output directory may exist but must be a directory.
void check_out_dir(const fs::path& out) {
  if (out.empty()) throw InvalidArgument("--out must not be empty");
  if (fs::exists(out) && !fs::is_directory(out)) throw InvalidArgument(out.string() + " exists and is not a directory");
}

void prepare_out_dir(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> g_argv;

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

void write_run_record(const fs::path& out, const std::string& command, const RunConfig& cfg, json extra = {}) {
  json rec{{"command", command},
           {"argv", g_argv},
           {"seed", cfg.seed},
           {"profile", cfg.profile},
           {"code_version", code_version()},
           {"torch_version", TORCH_VERSION},
           {"created_utc", utc_now()},
           {"config", to_json(cfg)}};
  if (extra.is_object()) rec.update(extra);
  write_json(out / ("run_" + command + ".json"), rec);
}

fs::path require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " is required");
  if (!fs::is_regular_file(path)) throw ConfigError(what + " not found: " + path);
  return path;
}

std::vector<ManifestRecord> load_corpus(const std::string& corpus) {
  if (corpus.empty()) throw ConfigError("--corpus is required");
  const auto manifest = manifest_path_for(corpus);
  if (!fs::is_regular_file(manifest)) throw ConfigError("no manifest at " + manifest.string());
  return read_manifest(manifest);
}

void check_frame_size(const ManifestRecord& r, const BlockGrid& grid) {
  auto mask = read_mask(r.mask_path);
  if (mask.height() != grid.height || mask.width() != grid.width)
    throw ConfigError("corpus frames are " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                      " but the model expects " + std::to_string(grid.width) + "x" + std::to_string(grid.height));
}

// --- datagen --------------------------------------------------------------

struct DatagenArgs {
  Common common;
  std::string encode;
  std::string datasets;
  std::optional<int> train, val, test, frames;
  std::string encoder;
};

int cmd_datagen(const DatagenArgs& a) {
  auto cfg = resolve(a.common, [&](json& o) {
    auto& d = o["datagen"];
    if (!d.is_object()) d = json::object();
    if (!a.encode.empty()) d["encode"]["mode"] = a.encode;
    if (!a.encoder.empty()) d["encode"]["encoder"] = a.encoder;
    if (!a.datasets.empty()) {
      json list = json::array();
      std::stringstream ss(a.datasets);
      for (std::string t; std::getline(ss, t, ',');)
        if (!t.empty()) list.push_back(t);
      d["datasets"] = list;
    }
    if (a.train) d["items"]["train"] = *a.train;
    if (a.val) d["items"]["val"] = *a.val;
    if (a.test) d["items"]["test"] = *a.test;
    if (a.frames) d["frames_per_video"] = *a.frames;
  });
  // The encoder path is machine-specific and not part of the JSON snapshot.
  if (!a.encoder.empty()) cfg.datagen.encode.encoder = a.encoder;
  const fs::path out = a.common.out;
  check_out_dir(out);
  if (cfg.datagen.encode.mode == EncodeMode::kH264) {
    const auto ffmpeg = locate_encoder(cfg.datagen.encode.encoder);
    cfg.datagen.encode.encoder = ffmpeg.string();
  }
  prepare_out_dir(out);
  const auto records = generate_corpus(cfg.datagen, out);
  write_run_record(out, "datagen", cfg, {{"items", records.size()}});
  std::cout << json{{"items", records.size()}, {"manifest", (out / "manifest.jsonl").string()}}.dump() << "\n";
  return kExitOk;
}

// --- pretrain-ffe ---------------------------------------------------------

struct PretrainArgs {
  Common common;
  std::optional<int> epochs, train_blocks, test_blocks;
  std::optional<double> lr;
};

int cmd_pretrain(const PretrainArgs& a) {
  auto cfg = resolve(a.common, [&](json& o) {
    auto& p = o["pretrain"];
    if (!p.is_object()) p = json::object();
    if (a.epochs) p["epochs"] = *a.epochs;
    if (a.train_blocks) p["train_blocks_per_class"] = *a.train_blocks;
    if (a.test_blocks) p["test_blocks_per_class"] = *a.test_blocks;
    if (a.lr) p["lr"] = *a.lr;
  });
  const fs::path out = a.common.out;
  check_out_dir(out);
  const auto& pc = cfg.pretrain;
  const auto bs = cfg.model.block_size;
  auto train = make_camera_blocks(pc.train_blocks_per_class, pc.num_classes, bs, derive_seed(cfg.seed, {1}));
  auto test = make_camera_blocks(pc.test_blocks_per_class, pc.num_classes, bs, derive_seed(cfg.seed, {2}));
  auto result = pretrain_ffe(cfg.model.ffe, pc, train, test);

  prepare_out_dir(out);
  save_ffe(out / "ffe.flck", result.model, result.report, {{"seed", cfg.seed}, {"pretrain", to_json(pc)}});
  write_json(out / "pretrain_report.json", to_json(result.report));
  write_run_record(out, "pretrain-ffe", cfg, {{"accuracy", result.report.accuracy}});
  std::cout << json{{"accuracy", result.report.accuracy},
                    {"per_class_accuracy", result.report.per_class_accuracy},
                    {"epochs_run", result.report.epochs_run},
                    {"checkpoint", (out / "ffe.flck").string()}}
                   .dump()
            << "\n";
  return kExitOk;
}

// --- train ----------------------------------------------------------------

struct TrainArgs {
  Common common;
  std::string corpus;
  int stage = 1;
  std::string init;
  std::string ffe;
  std::string variant;
  std::optional<int> epochs, batch_size;
  std::optional<double> lr;
  std::int64_t max_steps = 0;
  bool resume = false;
};

int cmd_train(const TrainArgs& a) {
  auto cfg = resolve(a.common, [&](json& o) {
    auto& s = o["stages"][std::to_string(a.stage)];
    if (!s.is_object()) s = json::object();
    if (a.epochs) s["epochs"] = *a.epochs;
    if (a.batch_size) s["batch_size"] = *a.batch_size;
    if (a.lr) s["initial_lr"] = *a.lr;
  });
  const auto stage = cfg.stage(a.stage);
  const fs::path out = a.common.out;
  check_out_dir(out);
  if (a.max_steps < 0) throw InvalidArgument("--max-steps must be non-negative");

  ForgeryNet net{nullptr};
  if (!a.init.empty()) {
    if (!a.variant.empty()) throw ConfigError("--variant cannot be combined with --init");
    net = load_network(require_file(a.init, "--init checkpoint"));
  } else {
    auto model = cfg.model;
    if (!a.variant.empty()) model.variant = VariantFlags::preset(a.variant);
    model.validate();
    net = ForgeryNet(model);
  }
  if (!a.ffe.empty()) load_pretrained_ffe(net, require_file(a.ffe, "--ffe checkpoint"));

  const auto records = load_corpus(a.corpus);
  const auto selected = select_records(records, stage.datasets, "train");
  check_frame_size(selected.front(), net->grid());

  prepare_out_dir(out);
  torch::manual_seed(cfg.seed);
  StageRunOptions opts;
  opts.out_dir = out;
  opts.seed = cfg.seed;
  opts.resume = a.resume;
  opts.max_steps = a.max_steps;
  auto result = run_stage(net, stage, records, opts);

  const auto model_path = out / "model.flck";
  save_network(model_path, net, {{"stage", stage.stage}, {"seed", cfg.seed}, {"stage_config", to_json(stage)}});
  write_run_record(out, "train", cfg,
                   {{"stage", stage.stage},
                    {"steps", result.log.size()},
                    {"epoch_loss", result.epoch_loss},
                    {"start_epoch", result.start_epoch},
                    {"model", to_json(net->config())}});
  std::cout << json{{"stage", stage.stage},
                    {"steps", result.log.size()},
                    {"epoch_loss", result.epoch_loss},
                    {"model", model_path.string()}}
                   .dump()
            << "\n";
  return kExitOk;
}

// --- infer ----------------------------------------------------------------

struct InferArgs {
  Common common;
  std::string checkpoint;
  std::vector<std::string> inputs;
  std::string mask_rule = "histogram";
  bool no_maps = false;
  std::string encoder;
};

bool is_video(const fs::path& p) {
  auto ext = p.extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return ext == ".mp4" || ext == ".mkv" || ext == ".avi" || ext == ".mov";
}

struct InputFrame {
  std::string source;
  torch::Tensor pixels;
};

// Block-resolution map scaled to [0, 1] by its maximum and enlarged to the frame.
torch::Tensor map_image(const torch::Tensor& map, const BlockGrid& grid) {
  auto m = map.to(torch::kFloat32);
  const float peak = m.max().item<float>();
  const float floor = m.min().item<float>();
  m = peak > floor ? (m - floor) / (peak - floor) : torch::zeros_like(m);
  auto big = m.repeat_interleave(grid.block_size, 0).repeat_interleave(grid.block_size, 1);
  return big.slice(0, 0, grid.height).slice(1, 0, grid.width).contiguous();
}

int cmd_infer(const InferArgs& a) {
  auto cfg = resolve(a.common);
  const auto rule = parse_mask_rule(a.mask_rule);
  const fs::path out = a.common.out;
  check_out_dir(out);
  auto net = load_network(require_file(a.checkpoint, "--checkpoint"));
  const auto grid = net->grid();
  if (a.inputs.empty()) throw InvalidArgument("--input is required");

  // Gather and decode every frame before writing anything.
  std::vector<InputFrame> frames;
  for (const auto& in : a.inputs) {
    const fs::path p = in;
    if (!fs::exists(p)) throw InvalidArgument("input not found: " + in);
    std::vector<fs::path> paths;
    std::optional<fs::path> scratch;
    if (fs::is_directory(p)) {
      for (const auto& e : fs::directory_iterator(p))
        if (e.path().extension() == ".png") paths.push_back(e.path());
      std::sort(paths.begin(), paths.end());
      if (paths.empty()) throw InvalidArgument("no PNG frames in " + in);
    } else if (is_video(p)) {
      scratch = fs::temp_directory_path() / ("forgeloc-decode-" + std::to_string(::getpid()));
      paths = decode_video(p, *scratch, a.encoder);
    } else {
      paths.push_back(p);
    }
    for (std::size_t i = 0; i < paths.size(); ++i) {
      auto f = read_frame(paths[i]);
      if (f.height() != grid.height || f.width() != grid.width)
        throw InvalidArgument(paths[i].string() + " is " + std::to_string(f.width()) + "x" +
                              std::to_string(f.height()) + " but the model expects " + std::to_string(grid.width) +
                              "x" + std::to_string(grid.height));
      const std::string source = scratch ? in + "#" + std::to_string(i) : paths[i].string();
      frames.push_back({source, f.pixels});
    }
    if (scratch) fs::remove_all(*scratch);
  }

  prepare_out_dir(out);
  fs::create_directories(out / "masks");
  if (!a.no_maps) fs::create_directories(out / "maps");
  NetworkPredictor predictor(net);
  std::ofstream results(out / "results.jsonl");
  if (!results) throw IoError("cannot write " + (out / "results.jsonl").string());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04zu", i);
    auto pred = predictor.predict_frame(frames[i].pixels);
    std::optional<ThresholdReport> report;
    auto mask = predicted_mask(pred, grid, rule, cfg.threshold, &report);
    const auto mask_path = out / "masks" / (std::string(name) + ".png");
    write_mask(mask_path, mask);
    json rec{{"frame", name},
             {"source", frames[i].source},
             {"detection_score", pred.p_fake},
             {"manipulated", pred.p_fake >= 0.5},
             {"mask_rule", to_string(rule)},
             {"mask_path", mask_path.string()},
             {"threshold_report", report ? to_json(*report) : json(nullptr)}};
    json maps = json::array();
    if (!a.no_maps && pred.maps.defined()) {
      for (std::int64_t l = 0; l < pred.maps.size(0); ++l) {
        const auto path = out / "maps" / (std::string(name) + "_map" + std::to_string(l) + ".png");
        write_gray(path, map_image(pred.maps[l], grid));
        maps.push_back(path.string());
      }
    }
    rec["attention_maps"] = maps;
    results << rec.dump() << "\n";
  }
  write_run_record(out, "infer", cfg,
                   {{"checkpoint", a.checkpoint}, {"inputs", a.inputs}, {"frames", frames.size()}});
  std::cout << json{{"frames", frames.size()}, {"results", (out / "results.jsonl").string()}}.dump() << "\n";
  return kExitOk;
}

// --- eval -----------------------------------------------------------------

struct EvalArgs {
  Common common;
  std::string corpus;
  std::string checkpoint;
  std::string predictor = "network";
  std::string split;
  std::string mask_rule;
  bool save_masks = false;
};

int cmd_eval(const EvalArgs& a) {
  auto cfg = resolve(a.common, [&](json& o) {
    auto& e = o["eval"];
    if (!e.is_object()) e = json::object();
    if (!a.split.empty()) e["split"] = a.split == "all" ? "" : a.split;
    if (!a.mask_rule.empty()) e["mask_rule"] = a.mask_rule;
  });
  const fs::path out = a.common.out;
  check_out_dir(out);
  const auto records = load_corpus(a.corpus);
  if (records.empty()) throw InvalidArgument("manifest has no records");

  std::unique_ptr<FramePredictor> predictor;
  if (a.predictor == "network") {
    auto net = load_network(require_file(a.checkpoint, "--checkpoint"));
    check_frame_size(records.front(), net->grid());
    predictor = std::make_unique<NetworkPredictor>(net);
  } else if (a.predictor == "oracle") {
    predictor = std::make_unique<OraclePredictor>();
  } else {
    predictor = std::make_unique<RandomPredictor>(cfg.model.grid(), cfg.seed);
  }

  EvalOptions opts;
  opts.split = cfg.eval_split;
  opts.rule = cfg.mask_rule;
  opts.threshold = cfg.threshold;
  if (a.save_masks) opts.mask_dir = out / "masks";
  prepare_out_dir(out);
  auto report = evaluate_corpus(records, *predictor, opts);
  write_json(out / "metrics.json", to_json(report));
  const auto table = render_table(report);
  {
    std::ofstream t(out / "metrics.txt");
    t << table;
  }
  write_run_record(out, "eval", cfg,
                   {{"corpus", a.corpus}, {"predictor", predictor->name()}, {"checkpoint", a.checkpoint}});
  std::cout << table;
  for (const auto& e : report.errors) std::cerr << json{{"warning", "item skipped"}, {"detail", e}}.dump() << "\n";
  return kExitOk;
}

// --- bench ----------------------------------------------------------------

struct BenchArgs {
  Common common;
  std::string checkpoint;
  std::optional<std::int64_t> frames;
  std::optional<int> warmup;
};

int cmd_bench(const BenchArgs& a) {
  auto cfg = resolve(a.common, [&](json& o) {
    auto& b = o["bench"];
    if (!b.is_object()) b = json::object();
    if (a.frames) b["frames"] = *a.frames;
    if (a.warmup) b["warmup"] = *a.warmup;
  });
  const fs::path out = a.common.out;
  check_out_dir(out);
  ForgeryNet net = a.checkpoint.empty() ? ForgeryNet(cfg.model) : load_network(require_file(a.checkpoint, "--checkpoint"));
  auto report = benchmark_throughput(net, cfg.bench.frames, cfg.bench.warmup, cfg.seed);
  prepare_out_dir(out);
  auto j = to_json(report);
  write_json(out / "bench.json", j);
  write_run_record(out, "bench", cfg, {{"checkpoint", a.checkpoint}, {"throughput", j}});
  std::cout << j.dump() << "\n";
  return kExitOk;
}

int report_error(const std::string& type, const std::string& message, int code, const std::string& diagnostics = {}) {
  json rec{{"error", type}, {"message", message}, {"exit_code", code}};
  if (!diagnostics.empty()) rec["diagnostics"] = diagnostics;
  std::cerr << rec.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  g_argv.assign(argv, argv + argc);
  CLI::App app{"forgeloc: video forgery detection and localization"};
  app.require_subcommand(1);
  app.set_version_flag("--version", code_version());

  DatagenArgs dg;
  auto* c_dg = app.add_subcommand("datagen", "synthesize a corpus");
  add_common(c_dg, dg.common);
  c_dg->add_option("--encode", dg.encode, "lossless or h264")->check(CLI::IsMember({"lossless", "h264"}));
  c_dg->add_option("--datasets", dg.datasets, "comma-separated dataset names or letters");
  c_dg->add_option("--train", dg.train, "training items per dataset");
  c_dg->add_option("--val", dg.val, "validation items per dataset");
  c_dg->add_option("--test", dg.test, "test items per dataset");
  c_dg->add_option("--frames", dg.frames, "frames per video item");
  c_dg->add_option("--encoder", dg.encoder, "path to ffmpeg");

  PretrainArgs pt;
  auto* c_pt = app.add_subcommand("pretrain-ffe", "pretrain the forensic extractor on camera-model blocks");
  add_common(c_pt, pt.common);
  c_pt->add_option("--epochs", pt.epochs);
  c_pt->add_option("--train-blocks", pt.train_blocks, "training blocks per camera");
  c_pt->add_option("--test-blocks", pt.test_blocks, "held-out blocks per camera");
  c_pt->add_option("--lr", pt.lr);

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "run one training stage");
  add_common(c_tr, tr.common);
  c_tr->add_option("--corpus", tr.corpus, "corpus directory or manifest")->required();
  c_tr->add_option("--stage", tr.stage, "stage 1-5")->check(CLI::Range(1, 5));
  c_tr->add_option("--init", tr.init, "network checkpoint to continue from");
  c_tr->add_option("--ffe", tr.ffe, "pretrained extractor checkpoint");
  c_tr->add_option("--variant", tr.variant, "ablation preset")->check(CLI::IsMember(VariantFlags::preset_names()));
  c_tr->add_option("--epochs", tr.epochs);
  c_tr->add_option("--lr", tr.lr, "initial learning rate");
  c_tr->add_option("--batch-size", tr.batch_size);
  c_tr->add_option("--max-steps", tr.max_steps, "cap on optimizer steps (0 = none)");
  c_tr->add_flag("--resume", tr.resume, "continue from the latest checkpoint in --out");

  InferArgs in;
  auto* c_in = app.add_subcommand("infer", "score frames and write masks");
  add_common(c_in, in.common);
  c_in->add_option("--checkpoint", in.checkpoint)->required();
  c_in->add_option("--input", in.inputs, "PNG frames, frame directories or videos")->required();
  c_in->add_option("--mask-rule", in.mask_rule)->check(CLI::IsMember({"histogram", "fixed"}));
  c_in->add_flag("--no-maps", in.no_maps, "skip attention-map images");
  c_in->add_option("--encoder", in.encoder, "path to ffmpeg for video input");

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "evaluate a corpus");
  add_common(c_ev, ev.common);
  c_ev->add_option("--corpus", ev.corpus, "corpus directory or manifest")->required();
  c_ev->add_option("--checkpoint", ev.checkpoint);
  c_ev->add_option("--predictor", ev.predictor)->check(CLI::IsMember({"network", "oracle", "random"}));
  c_ev->add_option("--split", ev.split, "train, val, test or all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));
  c_ev->add_option("--mask-rule", ev.mask_rule)->check(CLI::IsMember({"histogram", "fixed"}));
  c_ev->add_flag("--save-masks", ev.save_masks);

  BenchArgs bn;
  auto* c_bn = app.add_subcommand("bench", "measure throughput");
  add_common(c_bn, bn.common);
  c_bn->add_option("--checkpoint", bn.checkpoint, "defaults to an untrained model of the profile's size");
  c_bn->add_option("--frames", bn.frames);
  c_bn->add_option("--warmup", bn.warmup);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), kExitValidation);
  }

  try {
    if (c_dg->parsed()) return cmd_datagen(dg);
    if (c_pt->parsed()) return cmd_pretrain(pt);
    if (c_tr->parsed()) return cmd_train(tr);
    if (c_in->parsed()) return cmd_infer(in);
    if (c_ev->parsed()) return cmd_eval(ev);
    if (c_bn->parsed()) return cmd_bench(bn);
  } catch (const EnvironmentError& e) {
    return report_error("environment", e.what(), kExitEnvironment, e.diagnostics());
  } catch (const ConfigError& e) {
    return report_error("config", e.what(), kExitValidation);
  } catch (const InvalidArgument& e) {
    return report_error("invalid_argument", e.what(), kExitValidation);
  } catch (const json::exception& e) {
    return report_error("invalid_argument", e.what(), kExitValidation);
  } catch (const IoError& e) {
    return report_error("io", e.what(), kExitRuntime);
  } catch (const GenerationError& e) {
    return report_error("generation", e.what(), kExitRuntime);
  } catch (const std::exception& e) {
    return report_error("runtime", e.what(), kExitRuntime);
  }
  return kExitRuntime;
}
