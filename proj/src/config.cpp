// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "forgeloc/config.hpp"

#include <fstream>

#include "forgeloc/errors.hpp"

#ifndef FORGELOC_CODE_VERSION
#define FORGELOC_CODE_VERSION "unknown"
#endif

namespace forgeloc {

using nlohmann::json;

const StageConfig& RunConfig::stage(int s) const {
  if (s < 1 || s > static_cast<int>(stages.size())) throw ConfigError("stage must be between 1 and 5");
  return stages[static_cast<std::size_t>(s - 1)];
}

RunConfig RunConfig::for_profile(const std::string& profile) {
  RunConfig c;
  c.profile = profile;
  if (profile == "desk") {
    c.datagen = CorpusOptions::desk();
    c.model = ModelConfig::desk();
  } else if (profile == "full") {
    c.datagen = CorpusOptions::full();
    c.model = ModelConfig::full();
  } else {
    throw ConfigError("unknown profile '" + profile + "' (expected desk or full)");
  }
  for (int s = 1; s <= 5; ++s) c.stages.push_back(StageConfig::defaults(s));
  return c;
}

void RunConfig::validate() const {
  try {
    datagen.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("datagen: ") + e.what());
  }
  model.validate();
  pretrain.validate();
  if (stages.size() != 5) throw ConfigError("expected 5 stage configs");
  for (const auto& s : stages) s.validate();
  if (threshold.bins < 2) throw ConfigError("eval.bins must be at least 2");
  if (!(threshold.fallback >= 0.0 && threshold.fallback <= 1.0)) throw ConfigError("eval.fallback must lie in [0, 1]");
  if (eval_split != "train" && eval_split != "val" && eval_split != "test" && !eval_split.empty())
    throw ConfigError("eval.split must be train, val, test or empty");
  if (bench.frames < 10) throw ConfigError("bench.frames must be at least 10");
  if (bench.warmup < 0) throw ConfigError("bench.warmup must be non-negative");
}

json to_json(const RunConfig& c) {
  json stages = json::object();
  for (const auto& s : c.stages) stages[std::to_string(s.stage)] = to_json(s);
  return json{{"profile", c.profile},
              {"seed", c.seed},
              {"alpha", c.stages.empty() ? LossWeights{}.alpha : c.stages.front().weights.alpha},
              {"L", c.model.variant.num_maps},
              {"block_size", c.model.block_size},
              {"datagen", to_json(c.datagen)},
              {"model", to_json(c.model)},
              {"pretrain", to_json(c.pretrain)},
              {"stages", stages},
              {"eval",
               {{"split", c.eval_split},
                {"mask_rule", to_string(c.mask_rule)},
                {"bins", c.threshold.bins},
                {"fallback", c.threshold.fallback}}},
              {"bench", {{"frames", c.bench.frames}, {"warmup", c.bench.warmup}}}};
}

RunConfig run_config_from_json(const json& overrides, const std::string& profile) {
  if (!overrides.is_object()) throw ConfigError("config must be a JSON object");
  static const char* const kKnown[] = {"profile", "seed",     "alpha",  "L",    "block_size",
                                       "datagen", "model",    "pretrain", "stages", "eval", "bench"};
  for (const auto& [key, _] : overrides.items()) {
    bool known = false;
    for (const char* k : kKnown) known |= key == k;
    if (!known) throw ConfigError("unknown config key '" + key + "'");
  }
  try {
    auto base = RunConfig::for_profile(overrides.value("profile", profile));
    json merged = to_json(base);
    // Shortcuts first so explicit nested values still win.
    if (overrides.contains("L")) merged["model"]["variant"]["L"] = overrides.at("L");
    if (overrides.contains("block_size")) merged["model"]["block_size"] = overrides.at("block_size");
    if (overrides.contains("alpha"))
      for (auto& [_, s] : merged["stages"].items()) s["alpha"] = overrides.at("alpha");
    json patch = overrides;
    patch.erase("L");
    patch.erase("block_size");
    patch.erase("alpha");
    merged.merge_patch(patch);

    RunConfig c;
    c.profile = merged.at("profile").get<std::string>();
    c.seed = merged.at("seed").get<std::uint64_t>();
    c.datagen = corpus_options_from_json(merged.at("datagen"));
    c.datagen.seed = c.seed;
    c.model = model_config_from_json(merged.at("model"));
    c.pretrain = pretrain_config_from_json(merged.at("pretrain"));
    c.pretrain.seed = c.seed;
    for (int s = 1; s <= 5; ++s) {
      json sj = merged.at("stages").at(std::to_string(s));
      sj["stage"] = s;
      c.stages.push_back(stage_config_from_json(sj));
    }
    const auto& ev = merged.at("eval");
    c.eval_split = ev.at("split").get<std::string>();
    c.mask_rule = parse_mask_rule(ev.at("mask_rule").get<std::string>());
    c.threshold.bins = ev.at("bins").get<int>();
    c.threshold.fallback = ev.at("fallback").get<double>();
    c.bench.frames = merged.at("bench").at("frames").get<std::int64_t>();
    c.bench.warmup = merged.at("bench").at("warmup").get<int>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
}

json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

std::string code_version() { return FORGELOC_CODE_VERSION; }

}  // namespace forgeloc
