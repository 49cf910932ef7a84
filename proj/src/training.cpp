// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "forgeloc/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <regex>

#include "forgeloc/checkpoint.hpp"
#include "forgeloc/datagen/scene.hpp"
#include "forgeloc/errors.hpp"
#include "forgeloc/image_io.hpp"
#include "forgeloc/rng.hpp"

namespace forgeloc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using torch::optim::SGD;
using torch::optim::SGDOptions;
using torch::optim::SGDParamState;

void set_group_lrs(SGD& opt, const std::vector<double>& lrs) {
  auto& groups = opt.param_groups();
  for (std::size_t i = 0; i < groups.size(); ++i) static_cast<SGDOptions&>(groups[i].options()).lr(lrs[i]);
}

std::vector<torch::Tensor> optimizer_params(SGD& opt) {
  std::vector<torch::Tensor> out;
  for (auto& g : opt.param_groups())
    for (auto& p : g.params()) out.push_back(p);
  return out;
}

void save_momentum(SGD& opt, NamedTensors& out) {
  auto params = optimizer_params(opt);
  auto& state = opt.state();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto it = state.find(params[i].unsafeGetTensorImpl());
    if (it == state.end()) continue;
    const auto& buf = static_cast<SGDParamState&>(*it->second).momentum_buffer();
    if (buf.defined()) out.emplace_back("optim.momentum." + std::to_string(i), buf.detach().clone());
  }
}

void load_momentum(SGD& opt, const Checkpoint& ck) {
  auto params = optimizer_params(opt);
  auto& state = opt.state();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto* buf = ck.find("optim.momentum." + std::to_string(i));
    if (buf == nullptr) continue;
    if (buf->sizes() != params[i].sizes()) throw IoError("momentum buffer shape mismatch in checkpoint");
    auto st = std::make_unique<SGDParamState>();
    st->momentum_buffer(buf->to(params[i].dtype()).clone());
    state[params[i].unsafeGetTensorImpl()] = std::move(st);
  }
}

std::string datasets_string(const std::vector<DatasetKind>& ds) {
  std::string s;
  for (auto d : ds) s += (s.empty() ? "" : ",") + dataset_name(d);
  return s;
}

}  // namespace

double scheduled_lr(double initial, double rate, int step, int epoch) {
  FORGELOC_REQUIRE(step >= 1, "decay step must be at least 1");
  FORGELOC_REQUIRE(epoch >= 0, "epoch must be non-negative");
  return initial * std::pow(rate, epoch / step);
}

StageConfig StageConfig::defaults(int stage) {
  using D = DatasetKind;
  StageConfig s;
  s.stage = stage;
  s.decay_step = 2;
  switch (stage) {
    case 1:
      s.datasets = {D::kVCMS};
      s.epochs = 6;
      s.initial_lr = 1e-4;
      s.decay_rate = 0.75;
      break;
    case 2:
      s.datasets = {D::kVPVM};
      s.epochs = 6;
      s.initial_lr = 8.5e-5;
      s.decay_rate = 0.85;
      break;
    case 3:
      s.datasets = {D::kVPIM};
      s.epochs = 23;
      s.initial_lr = 8.5e-5;
      s.decay_rate = 0.85;
      break;
    case 4:
      s.datasets = {D::kVCMS, D::kVPVM, D::kVPIM};
      s.epochs = 10;
      s.initial_lr = 8.5e-5;
      s.decay_rate = 0.85;
      break;
    case 5:
      s.datasets = all_datasets();
      s.epochs = 9;
      s.initial_lr = 5e-5;
      s.decay_rate = 0.85;
      break;
    default: throw ConfigError("stage must be between 1 and 5, got " + std::to_string(stage));
  }
  s.ffe_frozen = stage <= 3;
  return s;
}

void StageConfig::validate() const {
  if (stage < 1 || stage > 5) throw ConfigError("stage must be between 1 and 5");
  if (datasets.empty()) throw ConfigError("stage " + std::to_string(stage) + " lists no datasets");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(initial_lr > 0.0)) throw ConfigError("initial_lr must be positive");
  if (!(decay_rate > 0.0 && decay_rate <= 1.0)) throw ConfigError("decay_rate must lie in (0, 1]");
  if (decay_step < 1) throw ConfigError("decay_step must be at least 1");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must lie in [0, 1)");
  if (ffe_lr_multiplier < 0.0) throw ConfigError("ffe_lr_multiplier must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  if (!(weights.alpha > 0.0 && weights.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
}

json to_json(const StageConfig& s) {
  json ds = json::array();
  for (auto d : s.datasets) ds.push_back(dataset_name(d));
  return json{{"stage", s.stage},
              {"datasets", ds},
              {"optimizer", "SGD"},
              {"epochs", s.epochs},
              {"initial_lr", s.initial_lr},
              {"decay_rate", s.decay_rate},
              {"decay_step", s.decay_step},
              {"momentum", s.momentum},
              {"ffe_frozen", s.ffe_frozen},
              {"ffe_lr_multiplier", s.ffe_lr_multiplier},
              {"batch_size", s.batch_size},
              {"weight_decay", s.weight_decay},
              {"alpha", s.weights.alpha}};
}

StageConfig stage_config_from_json(const json& j) {
  try {
    auto s = StageConfig::defaults(j.at("stage").get<int>());
    if (j.contains("datasets")) {
      s.datasets.clear();
      for (const auto& d : j.at("datasets")) s.datasets.push_back(parse_dataset(d.get<std::string>()));
    }
    if (j.contains("optimizer") && j.at("optimizer").get<std::string>() != "SGD")
      throw ConfigError("only the SGD optimizer is supported");
    s.epochs = j.value("epochs", s.epochs);
    s.initial_lr = j.value("initial_lr", s.initial_lr);
    s.decay_rate = j.value("decay_rate", s.decay_rate);
    s.decay_step = j.value("decay_step", s.decay_step);
    s.momentum = j.value("momentum", s.momentum);
    s.ffe_frozen = j.value("ffe_frozen", s.ffe_frozen);
    s.ffe_lr_multiplier = j.value("ffe_lr_multiplier", s.ffe_lr_multiplier);
    s.batch_size = j.value("batch_size", s.batch_size);
    s.weight_decay = j.value("weight_decay", s.weight_decay);
    s.weights.alpha = j.value("alpha", s.weights.alpha);
    s.validate();
    return s;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed stage config: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

void PretrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("pretrain lr must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("pretrain momentum must lie in [0, 1)");
  if (!(decay_rate > 0.0 && decay_rate <= 1.0)) throw ConfigError("pretrain decay_rate must lie in (0, 1]");
  if (decay_step < 1 || epochs < 1 || batch_size < 1) throw ConfigError("pretrain counts must be positive");
  if (num_classes < 2) throw ConfigError("camera-model pretraining needs at least 2 classes");
  if (num_classes > static_cast<int>(camera_signatures().size()))
    throw ConfigError("only " + std::to_string(camera_signatures().size()) + " simulated camera models exist");
  if (train_blocks_per_class < 1 || test_blocks_per_class < 1) throw ConfigError("block counts must be positive");
}

json to_json(const PretrainConfig& c) {
  return json{{"lr", c.lr},
              {"momentum", c.momentum},
              {"decay_rate", c.decay_rate},
              {"decay_step", c.decay_step},
              {"epochs", c.epochs},
              {"num_classes", c.num_classes},
              {"train_blocks_per_class", c.train_blocks_per_class},
              {"test_blocks_per_class", c.test_blocks_per_class},
              {"batch_size", c.batch_size},
              {"seed", c.seed},
              {"stop_at_accuracy", c.stop_at_accuracy}};
}

PretrainConfig pretrain_config_from_json(const json& j) {
  PretrainConfig c;
  try {
    c.lr = j.value("lr", c.lr);
    c.momentum = j.value("momentum", c.momentum);
    c.decay_rate = j.value("decay_rate", c.decay_rate);
    c.decay_step = j.value("decay_step", c.decay_step);
    c.epochs = j.value("epochs", c.epochs);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.train_blocks_per_class = j.value("train_blocks_per_class", c.train_blocks_per_class);
    c.test_blocks_per_class = j.value("test_blocks_per_class", c.test_blocks_per_class);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.stop_at_accuracy = j.value("stop_at_accuracy", c.stop_at_accuracy);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed pretrain config: ") + e.what());
  }
  c.validate();
  return c;
}

CameraBlockSet make_camera_blocks(int per_class, int num_classes, std::int64_t block_size, std::uint64_t seed) {
  FORGELOC_REQUIRE(per_class >= 1 && num_classes >= 1, "block counts must be positive");
  FORGELOC_REQUIRE(num_classes <= static_cast<int>(camera_signatures().size()), "too many camera classes");
  const auto& cams = camera_signatures();
  std::vector<torch::Tensor> blocks;
  std::vector<std::int64_t> classes;
  for (int c = 0; c < num_classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      Rng rng = make_rng(seed, {static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(i)});
      const auto scene = SceneParams::sample(rng);
      auto frame = capture(render_scene(scene, block_size, block_size), cams[static_cast<std::size_t>(c)], rng);
      blocks.push_back(frame.permute({2, 0, 1}).contiguous());
      classes.push_back(c);
    }
  }
  return CameraBlockSet{torch::stack(blocks), torch::tensor(classes, torch::kLong)};
}

json to_json(const PretrainReport& r) {
  return json{{"accuracy", r.accuracy},
              {"per_class_accuracy", r.per_class_accuracy},
              {"epoch_loss", r.epoch_loss},
              {"epoch_accuracy", r.epoch_accuracy},
              {"epochs_run", r.epochs_run}};
}

std::vector<double> per_class_accuracy(FfeModel& model, const CameraBlockSet& data, int num_classes) {
  torch::NoGradGuard no_grad;
  const bool was_training = model->is_training();
  model->eval();
  std::vector<std::int64_t> correct(static_cast<std::size_t>(num_classes), 0), total(correct);
  const auto n = data.blocks.size(0);
  for (std::int64_t s = 0; s < n; s += 64) {
    const auto e = std::min<std::int64_t>(n, s + 64);
    auto pred = model->class_logits(data.blocks.slice(0, s, e)).argmax(1);
    auto truth = data.classes.slice(0, s, e);
    for (std::int64_t i = 0; i < e - s; ++i) {
      const auto t = truth[i].item<std::int64_t>();
      ++total[static_cast<std::size_t>(t)];
      if (pred[i].item<std::int64_t>() == t) ++correct[static_cast<std::size_t>(t)];
    }
  }
  model->train(was_training);
  std::vector<double> acc;
  for (int c = 0; c < num_classes; ++c)
    acc.push_back(total[c] ? static_cast<double>(correct[c]) / static_cast<double>(total[c]) : 0.0);
  return acc;
}

PretrainResult pretrain_ffe(const FfeOptions& options, const PretrainConfig& config, const CameraBlockSet& train,
                            const CameraBlockSet& test) {
  config.validate();
  FORGELOC_REQUIRE(train.blocks.defined() && train.blocks.size(0) == train.classes.size(0), "malformed training set");
  const auto distinct = std::get<0>(torch::_unique(train.classes)).numel();
  FORGELOC_REQUIRE(distinct >= 2, "camera-model pretraining needs blocks from at least 2 classes");
  FORGELOC_REQUIRE(train.classes.max().item<std::int64_t>() < config.num_classes, "class index exceeds num_classes");

  torch::manual_seed(config.seed);
  auto opts = options;
  opts.num_classes = config.num_classes;
  FfeModel model(opts);
  SGD opt(model->parameters(), SGDOptions(config.lr).momentum(config.momentum));

  PretrainResult result;
  const auto n = train.blocks.size(0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    set_group_lrs(opt, {config.lr_at(epoch)});
    model->train();
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(config.seed, {static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::int64_t batches = 0;
    for (std::int64_t s = 0; s < n; s += config.batch_size) {
      const auto e = std::min<std::int64_t>(n, s + config.batch_size);
      auto idx = torch::tensor(std::vector<std::int64_t>(order.begin() + s, order.begin() + e), torch::kLong);
      auto probs = torch::softmax(model->class_logits(train.blocks.index_select(0, idx)), 1);
      auto loss = ffe_pretrain_loss(probs, train.classes.index_select(0, idx));
      opt.zero_grad();
      loss.backward();
      opt.step();
      if (opts.constrained) model->enforce_constraint();
      loss_sum += loss.item<double>();
      ++batches;
    }
    result.report.epoch_loss.push_back(loss_sum / static_cast<double>(std::max<std::int64_t>(batches, 1)));
    auto acc = per_class_accuracy(model, test, config.num_classes);
    result.report.per_class_accuracy = acc;
    const double counted = static_cast<double>(test.classes.numel());
    double hits = 0.0;
    for (int c = 0; c < config.num_classes; ++c)
      hits += acc[c] * (test.classes == c).sum().item<double>();
    result.report.accuracy = counted > 0 ? hits / counted : 0.0;
    result.report.epoch_accuracy.push_back(result.report.accuracy);
    result.report.epochs_run = epoch + 1;
    if (config.stop_at_accuracy > 0.0 && result.report.accuracy >= config.stop_at_accuracy) break;
  }
  model->drop_classifier();
  model->eval();
  result.model = model;
  return result;
}

Sample make_sample(const torch::Tensor& frame, const ForgeryMask& mask, const BlockGrid& grid, std::string id) {
  auto ft = FrameTensor::make(frame, id);
  Sample s;
  s.id = std::move(id);
  s.blocks = tile_frame(ft, grid);
  s.z = block_labels(mask, grid).to_tensor().to(torch::kFloat32);
  const bool fake = (mask.values > 0.5f).any().item<bool>();
  s.w = fake ? torch::tensor({0.0f, 1.0f}) : torch::tensor({1.0f, 0.0f});
  return s;
}

std::vector<ManifestRecord> select_records(const std::vector<ManifestRecord>& records,
                                           const std::vector<DatasetKind>& datasets, const std::string& split) {
  std::vector<ManifestRecord> out;
  for (auto d : datasets) {
    const auto name = dataset_name(d);
    std::size_t found = 0;
    for (const auto& r : records) {
      if (r.dataset == name && r.split == split) {
        out.push_back(r);
        ++found;
      }
    }
    if (found == 0) throw ConfigError("dataset " + name + " has no '" + split + "' items in the corpus");
  }
  return out;
}

FrameDataset load_frames(const std::vector<ManifestRecord>& records, const BlockGrid& grid) {
  FrameDataset data;
  data.grid = grid;
  for (const auto& r : records) {
    auto mask = read_mask(r.mask_path);
    if (mask.height() != grid.height || mask.width() != grid.width)
      throw ConfigError("item " + r.id + " is " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                        " but the model expects " + std::to_string(grid.width) + "x" + std::to_string(grid.height));
    for (std::size_t f = 0; f < r.frame_paths.size(); ++f) {
      auto frame = read_frame(r.frame_paths[f]);
      data.samples.push_back(make_sample(frame.pixels, mask, grid, r.id + "/" + std::to_string(f)));
    }
  }
  return data;
}

json to_json(const TrainLogRecord& r) {
  return json{{"step", r.step}, {"stage", r.stage}, {"epoch", r.epoch}, {"lr", r.lr},
              {"L_D", r.loss_detection}, {"L_L", r.loss_localization}, {"L", r.loss}};
}

fs::path checkpoint_path(const fs::path& dir, int stage, int epoch) {
  return dir / ("ckpt_stage" + std::to_string(stage) + "_epoch" + std::to_string(epoch) + ".flck");
}

StageResult train_on(ForgeryNet& net, const StageConfig& stage, const FrameDataset& data,
                     const StageRunOptions& options) {
  stage.validate();
  FORGELOC_REQUIRE(!data.samples.empty(), "training set is empty");
  if (data.grid != net->grid()) throw ConfigError("training frames do not match the model's frame size");

  const bool train_ffe = !stage.ffe_frozen && !net->ffe().is_empty();
  net->set_ffe_frozen(!train_ffe);
  std::vector<torch::optim::OptimizerParamGroup> groups;
  groups.emplace_back(net->non_ffe_parameters(),
                      std::make_unique<SGDOptions>(SGDOptions(stage.initial_lr)
                                                       .momentum(stage.momentum)
                                                       .weight_decay(stage.weight_decay)));
  if (train_ffe) {
    groups.emplace_back(net->ffe_parameters(),
                        std::make_unique<SGDOptions>(SGDOptions(stage.initial_lr * stage.ffe_lr_multiplier)
                                                         .momentum(stage.momentum)
                                                         .weight_decay(stage.weight_decay)));
  }
  SGD opt(std::move(groups), SGDOptions(stage.initial_lr).momentum(stage.momentum));

  StageResult result;
  std::int64_t step = 0;
  if (options.resume && !options.out_dir.empty() && fs::exists(options.out_dir)) {
    const std::regex pattern("ckpt_stage" + std::to_string(stage.stage) + "_epoch([0-9]+)\\.flck");
    int latest = -1;
    for (const auto& entry : fs::directory_iterator(options.out_dir)) {
      std::smatch m;
      const auto name = entry.path().filename().string();
      if (std::regex_match(name, m, pattern)) latest = std::max(latest, std::stoi(m[1].str()));
    }
    if (latest >= 0) {
      const auto path = checkpoint_path(options.out_dir, stage.stage, latest);
      auto ck = load_checkpoint(path);
      apply_state(*net, ck, "", true);
      load_momentum(opt, ck);
      step = ck.manifest.value("step", std::int64_t{0});
      result.start_epoch = latest + 1;
      result.last_checkpoint = path;
    }
  }

  std::ofstream log_file;
  if (!options.out_dir.empty()) {
    fs::create_directories(options.out_dir);
    log_file.open(options.out_dir / ("train_log_stage" + std::to_string(stage.stage) + ".jsonl"),
                  result.start_epoch > 0 ? std::ios::app : std::ios::trunc);
  }

  net->train();
  const auto n = static_cast<std::int64_t>(data.samples.size());
  std::int64_t steps_here = 0;
  bool capped = false;
  for (int epoch = result.start_epoch; epoch < stage.epochs && !capped; ++epoch) {
    const double lr = stage.lr_at(epoch);
    std::vector<double> lrs{lr};
    if (train_ffe) lrs.push_back(lr * stage.ffe_lr_multiplier);
    set_group_lrs(opt, lrs);

    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng = make_rng(options.seed, {static_cast<std::uint64_t>(stage.stage), static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_sum = 0.0;
    std::int64_t epoch_steps = 0;
    for (std::int64_t s = 0; s < n; s += stage.batch_size) {
      if (options.max_steps > 0 && steps_here >= options.max_steps) {
        capped = true;
        break;
      }
      const auto e = std::min<std::int64_t>(n, s + stage.batch_size);
      std::vector<torch::Tensor> xb, zb, wb;
      for (auto i = s; i < e; ++i) {
        const auto& sample = data.samples[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
        xb.push_back(sample.blocks);
        zb.push_back(sample.z);
        wb.push_back(sample.w);
      }
      auto out = net->forward(torch::stack(xb));
      auto ld = detection_loss(out.p, torch::stack(wb));
      auto ll = localization_loss(out.q, torch::stack(zb));
      auto loss = joint_loss(ld, ll, stage.weights);
      opt.zero_grad();
      loss.backward();
      opt.step();
      if (train_ffe && net->ffe()->options().constrained) net->ffe()->enforce_constraint();

      TrainLogRecord rec{++step, stage.stage, epoch, lr, ld.item<double>(), ll.item<double>(), loss.item<double>()};
      if (log_file.is_open()) log_file << to_json(rec).dump() << "\n";
      if (options.on_step) options.on_step(rec);
      result.log.push_back(rec);
      epoch_sum += rec.loss;
      ++epoch_steps;
      ++steps_here;
    }
    if (epoch_steps > 0) result.epoch_loss.push_back(epoch_sum / static_cast<double>(epoch_steps));
    if (!options.out_dir.empty() && !capped) {
      Checkpoint ck;
      ck.manifest = json{{"kind", "network"},
                         {"model", to_json(net->config())},
                         {"stage", stage.stage},
                         {"epoch", epoch},
                         {"step", step},
                         {"seed", options.seed},
                         {"stage_config", to_json(stage)}};
      ck.tensors = collect_state(*net);
      save_momentum(opt, ck.tensors);
      result.last_checkpoint = checkpoint_path(options.out_dir, stage.stage, epoch);
      save_checkpoint(result.last_checkpoint, ck);
    }
  }
  net->eval();
  return result;
}

StageResult run_stage(ForgeryNet& net, const StageConfig& stage, const std::vector<ManifestRecord>& records,
                      const StageRunOptions& options) {
  stage.validate();
  auto selected = select_records(records, stage.datasets, "train");
  auto data = load_frames(selected, net->grid());
  if (data.samples.empty()) throw ConfigError("stage " + std::to_string(stage.stage) + " has no frames for " +
                                              datasets_string(stage.datasets));
  return train_on(net, stage, data, options);
}

void save_ffe(const fs::path& path, FfeModel& model, const PretrainReport& report, json extra) {
  Checkpoint ck;
  ck.manifest = extra.is_object() ? std::move(extra) : json::object();
  ck.manifest["kind"] = "ffe";
  ck.manifest["report"] = to_json(report);
  const auto& o = model->options();
  ck.manifest["ffe"] = json{{"embedding_dim", o.embedding_dim},
                            {"constrained", o.constrained},
                            {"constrained_filters", o.constrained_filters},
                            {"conv1_channels", o.conv1_channels},
                            {"conv2_channels", o.conv2_channels},
                            {"conv3_channels", o.conv3_channels},
                            {"block_size", o.block_size}};
  ck.tensors = collect_state(*model);
  save_checkpoint(path, ck);
}

void load_pretrained_ffe(ForgeryNet& net, const fs::path& path) {
  if (net->ffe().is_empty()) throw ConfigError("this variant has no forensic feature extractor");
  auto ck = load_checkpoint(path);
  if (ck.manifest.value("kind", std::string{}) != "ffe")
    throw ConfigError(path.string() + " is not a pretrained FFE checkpoint");
  try {
    apply_state(*net->ffe(), ck, "", true);
  } catch (const IoError& e) {
    throw ConfigError(std::string("pretrained FFE does not fit the model: ") + e.what());
  }
}

ForgeryNet build_variant(const VariantFlags& flags, ModelConfig base) {
  base.variant = flags;
  return ForgeryNet(base);
}

}  // namespace forgeloc
