// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "forgeloc/model.hpp"

#include "forgeloc/errors.hpp"

namespace forgeloc {

using nlohmann::json;

namespace {

std::string attention_name(AttentionKind kind) {
  switch (kind) {
    case AttentionKind::kTransformer: return "transformer";
    case AttentionKind::kFcStack: return "fc-stack";
    case AttentionKind::kNone: return "none";
  }
  return "none";
}

AttentionKind parse_attention(const std::string& name) {
  if (name == "transformer") return AttentionKind::kTransformer;
  if (name == "fc-stack") return AttentionKind::kFcStack;
  if (name == "none") return AttentionKind::kNone;
  throw ConfigError("unknown attention kind '" + name + "'");
}

}  // namespace

void VariantFlags::validate() const {
  if (!use_ffe && !use_cfe) throw ConfigError("variant needs at least one of FFE and CFE");
  if (attention == AttentionKind::kNone && squeeze)
    throw ConfigError("attention squeeze requires an attention module");
  if (squeeze && num_maps < 1) throw ConfigError("attention map count must be at least 1");
  if (!squeeze && refine == RefineMode::kConcat) throw ConfigError("concat refinement requires attention maps");
}

VariantFlags VariantFlags::preset(const std::string& name) {
  VariantFlags v;
  if (name == "proposed") return v;
  if (name == "no-ffe") {
    v.use_ffe = false;
  } else if (name == "no-cfe") {
    v.use_cfe = false;
  } else if (name == "no-transformer-module") {
    v.attention = AttentionKind::kNone;
    v.squeeze = false;
  } else if (name == "no-transformer") {
    v.attention = AttentionKind::kFcStack;
  } else if (name == "no-attention-squeeze") {
    v.squeeze = false;
  } else if (name == "maps-1") {
    v.num_maps = 1;
  } else if (name == "maps-10") {
    v.num_maps = 10;
  } else if (name == "concat-refine") {
    v.refine = RefineMode::kConcat;
  } else {
    throw ConfigError("unknown variant '" + name + "'");
  }
  return v;
}

std::vector<std::string> VariantFlags::preset_names() {
  return {"proposed", "no-ffe", "no-cfe", "no-transformer-module", "no-transformer",
          "no-attention-squeeze", "maps-1", "maps-10", "concat-refine"};
}

std::int64_t ModelConfig::joint_dim() const {
  return (variant.use_ffe ? ffe.embedding_dim : 0) + (variant.use_cfe ? cfe.embedding_dim : 0);
}

std::int64_t ModelConfig::head_feature_dim() const {
  if (variant.squeeze && variant.refine == RefineMode::kConcat) return variant.num_maps * joint_dim();
  return joint_dim();
}

void ModelConfig::validate() const {
  variant.validate();
  if (frame_height < 1 || frame_width < 1) throw ConfigError("frame dimensions must be positive");
  if (block_size != ffe.block_size || block_size != cfe.block_size)
    throw ConfigError("extractor block sizes must match the model block size");
  if (variant.attention == AttentionKind::kTransformer && (heads < 1 || joint_dim() % heads != 0))
    throw ConfigError("joint dim " + std::to_string(joint_dim()) + " is not divisible by " + std::to_string(heads) +
                      " heads");
}

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.frame_height = 256;
  c.frame_width = 384;
  c.ffe.embedding_dim = 32;
  c.ffe.conv1_channels = 16;
  c.ffe.conv2_channels = 16;
  c.ffe.conv3_channels = 16;
  c.cfe.embedding_dim = 32;
  c.cfe.stem_channels = {8, 16};
  c.cfe.entry_channels = {24, 32, 48};
  c.ffe.num_classes = 0;
  c.encoder_blocks = 2;
  c.heads = 4;
  return c;
}

ModelConfig ModelConfig::full() {
  ModelConfig c;
  c.ffe.num_classes = 0;
  return c;
}

json to_json(const ModelConfig& c) {
  return json{
      {"frame_height", c.frame_height},
      {"frame_width", c.frame_width},
      {"block_size", c.block_size},
      {"ffe",
       {{"embedding_dim", c.ffe.embedding_dim},
        {"num_classes", c.ffe.num_classes},
        {"constrained", c.ffe.constrained},
        {"constrained_filters", c.ffe.constrained_filters},
        {"conv1_channels", c.ffe.conv1_channels},
        {"conv2_channels", c.ffe.conv2_channels},
        {"conv3_channels", c.ffe.conv3_channels}}},
      {"cfe",
       {{"embedding_dim", c.cfe.embedding_dim},
        {"stem_channels", c.cfe.stem_channels},
        {"entry_channels", c.cfe.entry_channels}}},
      {"encoder_blocks", c.encoder_blocks},
      {"heads", c.heads},
      {"ff_multiplier", c.ff_multiplier},
      {"dropout", c.dropout},
      {"variant",
       {{"ffe", c.variant.use_ffe},
        {"cfe", c.variant.use_cfe},
        {"attention", attention_name(c.variant.attention)},
        {"squeeze", c.variant.squeeze},
        {"L", c.variant.num_maps},
        {"refine", to_string(c.variant.refine)},
        {"sigmoid_maps", c.variant.sigmoid_maps}}},
  };
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  try {
    c.frame_height = j.at("frame_height").get<std::int64_t>();
    c.frame_width = j.at("frame_width").get<std::int64_t>();
    c.block_size = j.value("block_size", kDefaultBlockSize);
    const auto& f = j.at("ffe");
    c.ffe.embedding_dim = f.at("embedding_dim").get<std::int64_t>();
    c.ffe.num_classes = f.value("num_classes", std::int64_t{0});
    c.ffe.constrained = f.value("constrained", true);
    c.ffe.constrained_filters = f.value("constrained_filters", std::int64_t{3});
    c.ffe.conv1_channels = f.at("conv1_channels").get<std::int64_t>();
    c.ffe.conv2_channels = f.at("conv2_channels").get<std::int64_t>();
    c.ffe.conv3_channels = f.at("conv3_channels").get<std::int64_t>();
    c.ffe.block_size = c.block_size;
    const auto& cf = j.at("cfe");
    c.cfe.embedding_dim = cf.at("embedding_dim").get<std::int64_t>();
    c.cfe.stem_channels = cf.at("stem_channels").get<std::vector<std::int64_t>>();
    c.cfe.entry_channels = cf.at("entry_channels").get<std::vector<std::int64_t>>();
    c.cfe.block_size = c.block_size;
    c.encoder_blocks = j.at("encoder_blocks").get<std::int64_t>();
    c.heads = j.at("heads").get<std::int64_t>();
    c.ff_multiplier = j.value("ff_multiplier", std::int64_t{4});
    c.dropout = j.value("dropout", 0.0);
    const auto& v = j.at("variant");
    c.variant.use_ffe = v.at("ffe").get<bool>();
    c.variant.use_cfe = v.at("cfe").get<bool>();
    c.variant.attention = parse_attention(v.at("attention").get<std::string>());
    c.variant.squeeze = v.at("squeeze").get<bool>();
    c.variant.num_maps = v.at("L").get<std::int64_t>();
    c.variant.refine = parse_refine_mode(v.at("refine").get<std::string>());
    c.variant.sigmoid_maps = v.value("sigmoid_maps", false);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed model config: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

ForgeryNetImpl::ForgeryNetImpl(ModelConfig config) : config_(std::move(config)) {
  config_.ffe.block_size = config_.block_size;
  config_.cfe.block_size = config_.block_size;
  config_.ffe.num_classes = 0;  // the camera-class head only exists during pretraining
  config_.validate();
  grid_ = config_.grid();
  const auto& v = config_.variant;
  if (v.use_ffe) ffe_ = register_module("ffe", FfeModel(config_.ffe));
  if (v.use_cfe) cfe_ = register_module("cfe", CfeModel(config_.cfe));
  if (v.attention != AttentionKind::kNone) {
    AttentionOptions opts;
    opts.dim = config_.joint_dim();
    opts.sequence_length = grid_.count();
    opts.mixer = v.attention == AttentionKind::kTransformer ? MixerKind::kTransformer : MixerKind::kFcStack;
    opts.num_blocks = config_.encoder_blocks;
    opts.num_heads = config_.heads;
    opts.ff_multiplier = config_.ff_multiplier;
    opts.dropout = config_.dropout;
    opts.squeeze = v.squeeze;
    opts.num_maps = v.num_maps;
    opts.sigmoid_maps = v.sigmoid_maps;
    attention_ = register_module("attention", AttentionModule(opts));
  }
  const auto fdim = config_.head_feature_dim();
  detector_ = register_module("detector", DetectionHead(fdim, grid_.rows, grid_.cols));
  localizer_ = register_module("localizer", LocalizationHead(fdim, grid_.rows, grid_.cols));
  set_ffe_frozen(true);
}

void ForgeryNetImpl::set_ffe_frozen(bool frozen) {
  ffe_frozen_ = frozen;
  if (ffe_.is_empty()) return;
  for (auto& p : ffe_->parameters()) p.set_requires_grad(!frozen);
  if (frozen) ffe_->eval();
  else ffe_->train(is_training());
}

void ForgeryNetImpl::train(bool on) {
  torch::nn::Module::train(on);
  if (!ffe_.is_empty() && ffe_frozen_) ffe_->eval();
}

std::vector<torch::Tensor> ForgeryNetImpl::ffe_parameters() const {
  if (ffe_.is_empty()) return {};
  return ffe_->parameters();
}

std::vector<torch::Tensor> ForgeryNetImpl::non_ffe_parameters() const {
  std::vector<torch::Tensor> out;
  for (const auto& item : named_parameters()) {
    if (item.key().rfind("ffe.", 0) == 0) continue;
    out.push_back(item.value());
  }
  return out;
}

torch::Tensor ForgeryNetImpl::joint_embeddings(const torch::Tensor& blocks) {
  const auto bs = config_.block_size;
  FORGELOC_REQUIRE(blocks.dim() == 5 && blocks.size(1) == grid_.count() && blocks.size(2) == 3 &&
                       blocks.size(3) == bs && blocks.size(4) == bs,
                   "network input must be [B, " + std::to_string(grid_.count()) + ", 3, " + std::to_string(bs) +
                       ", " + std::to_string(bs) + "]");
  const auto b = blocks.size(0);
  auto flat = blocks.reshape({b * grid_.count(), 3, bs, bs});
  std::vector<torch::Tensor> parts;
  if (!ffe_.is_empty()) {
    if (ffe_frozen_) {
      torch::NoGradGuard no_grad;
      parts.push_back(ffe_->forward(flat));
    } else {
      parts.push_back(ffe_->forward(flat));
    }
  }
  if (!cfe_.is_empty()) parts.push_back(cfe_->forward(flat));
  auto x = parts.size() == 1 ? parts.front() : torch::cat(parts, 1);
  return x.view({b, grid_.count(), x.size(1)});
}

NetOutput ForgeryNetImpl::forward(const torch::Tensor& blocks) {
  auto x = joint_embeddings(blocks);
  NetOutput out;
  torch::Tensor y = x;
  if (!attention_.is_empty()) {
    auto hidden = attention_->contextualize(x);
    if (config_.variant.squeeze) {
      auto maps = attention_->squeeze(hidden).reshape({x.size(0), config_.variant.num_maps, grid_.rows, grid_.cols});
      y = refine(x, maps, config_.variant.refine);
      out.maps = maps;
    } else {
      y = hidden;
    }
  }
  out.p = detector_->forward(y);
  out.q = localizer_->forward(y);
  return out;
}

}  // namespace forgeloc
