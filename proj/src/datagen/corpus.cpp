// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "forgeloc/datagen/corpus.hpp"

#include <fstream>

#include "forgeloc/datagen/scene.hpp"
#include "forgeloc/errors.hpp"
#include "forgeloc/image_io.hpp"

namespace forgeloc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kNames[] = {"VCMS", "VPVM", "VPIM", "ICMS", "IPVM", "IPIM"};
constexpr std::uint64_t kSpliceSourceStream = 1;

bool confined_to_mask(const torch::Tensor& before, const torch::Tensor& after, const ForgeryMask& mask) {
  auto outside = (mask.values < 0.5f).unsqueeze(2).expand_as(before);
  return torch::equal(before.masked_select(outside), after.masked_select(outside));
}

}  // namespace

std::string dataset_name(DatasetKind d) { return kNames[static_cast<int>(d)]; }
char dataset_letter(DatasetKind d) { return static_cast<char>('A' + static_cast<int>(d)); }

DatasetKind parse_dataset(const std::string& s) {
  for (int i = 0; i < 6; ++i) {
    if (s == kNames[i] || (s.size() == 1 && s[0] == 'A' + i)) return static_cast<DatasetKind>(i);
  }
  throw InvalidArgument("unknown dataset '" + s + "' (expected VCMS..IPIM or A..F)");
}

bool is_video_dataset(DatasetKind d) { return static_cast<int>(d) < 3; }

std::vector<DatasetKind> all_datasets() {
  return {DatasetKind::kVCMS, DatasetKind::kVPVM, DatasetKind::kVPIM,
          DatasetKind::kICMS, DatasetKind::kIPVM, DatasetKind::kIPIM};
}

CorpusOptions CorpusOptions::desk() { return CorpusOptions{}; }

CorpusOptions CorpusOptions::full() {
  CorpusOptions o;
  o.height = 1080;
  o.width = 1920;
  o.items = SplitCounts{3200, 520, 280};
  o.frames_per_video = 30;
  o.encode.mode = EncodeMode::kH264;
  return o;
}

void CorpusOptions::validate() const {
  FORGELOC_REQUIRE(height >= 128 && width >= 128, "corpus frames must be at least 128 x 128");
  FORGELOC_REQUIRE(height % 2 == 0 && width % 2 == 0, "corpus frame dimensions must be even");
  FORGELOC_REQUIRE(items.train >= 0 && items.val >= 0 && items.test >= 0 && items.total() >= 1,
                   "split counts must be non-negative with at least one item");
  FORGELOC_REQUIRE(frames_per_video >= 1, "frames_per_video must be at least 1");
  FORGELOC_REQUIRE(!datasets.empty(), "at least one dataset kind is required");
  FORGELOC_REQUIRE(encode.crf >= 0 && encode.crf <= 51, "crf must lie in [0, 51]");
  FORGELOC_REQUIRE(encode.fps >= 1, "fps must be positive");
  FORGELOC_REQUIRE(diff.block >= 1 && diff.threshold >= 0.0 && diff.threshold < 1.0, "invalid diff-mask options");
  FORGELOC_REQUIRE(mask.max_area > 0.0 && mask.max_area <= 1.0, "mask max_area must lie in (0, 1]");
}

json to_json(const CorpusOptions& o) {
  json ds = json::array();
  for (auto d : o.datasets) ds.push_back(dataset_name(d));
  return json{{"height", o.height},
              {"width", o.width},
              {"items", {{"train", o.items.train}, {"val", o.items.val}, {"test", o.items.test}}},
              {"frames_per_video", o.frames_per_video},
              {"datasets", ds},
              {"encode",
               {{"mode", o.encode.mode == EncodeMode::kH264 ? "h264" : "lossless"},
                {"crf", o.encode.crf},
                {"fps", o.encode.fps},
                {"preset", o.encode.preset}}},
              {"seed", o.seed},
              {"mask", {{"max_area", o.mask.max_area}, {"max_attempts", o.mask.max_attempts}, {"max_shapes", o.mask.max_shapes}}},
              {"diff_mask", {{"block", o.diff.block}, {"threshold", o.diff.threshold}}}};
}

CorpusOptions corpus_options_from_json(const json& j) {
  CorpusOptions o;
  o.height = j.value("height", o.height);
  o.width = j.value("width", o.width);
  if (j.contains("items")) {
    const auto& it = j.at("items");
    o.items.train = it.value("train", o.items.train);
    o.items.val = it.value("val", o.items.val);
    o.items.test = it.value("test", o.items.test);
  }
  o.frames_per_video = j.value("frames_per_video", o.frames_per_video);
  if (j.contains("datasets")) {
    o.datasets.clear();
    for (const auto& d : j.at("datasets")) o.datasets.push_back(parse_dataset(d.get<std::string>()));
  }
  if (j.contains("encode")) {
    const auto& e = j.at("encode");
    o.encode.mode = parse_encode_mode(e.value("mode", std::string("lossless")));
    o.encode.crf = e.value("crf", o.encode.crf);
    o.encode.fps = e.value("fps", o.encode.fps);
    o.encode.preset = e.value("preset", o.encode.preset);
    o.encode.encoder = e.value("encoder", std::string{});
  }
  o.seed = j.value("seed", o.seed);
  if (j.contains("mask")) {
    const auto& m = j.at("mask");
    o.mask.max_area = m.value("max_area", o.mask.max_area);
    o.mask.max_attempts = m.value("max_attempts", o.mask.max_attempts);
    o.mask.max_shapes = m.value("max_shapes", o.mask.max_shapes);
  }
  if (j.contains("diff_mask")) {
    o.diff.block = j.at("diff_mask").value("block", o.diff.block);
    o.diff.threshold = j.at("diff_mask").value("threshold", o.diff.threshold);
  }
  return o;
}

std::string split_of(const SplitCounts& counts, int index) {
  if (index < counts.train) return "train";
  if (index < counts.train + counts.val) return "val";
  return "test";
}

CorpusItem synthesize_item(const CorpusOptions& options, DatasetKind dataset, int index) {
  const auto d = static_cast<std::uint64_t>(dataset);
  const auto i = static_cast<std::uint64_t>(index);
  CorpusItem item;
  item.dataset = dataset;
  item.id = dataset_name(dataset) + "_" + std::to_string(index);
  item.split = split_of(options.items, index);
  item.manipulated = index % 2 == 1;
  item.seed = derive_seed(options.seed, {d, i});
  Rng rng(item.seed);

  const auto& cams = camera_signatures();
  const int frames = is_video_dataset(dataset) ? options.frames_per_video : 1;
  const auto scene = SceneParams::sample(rng);
  item.camera = uniform_int(rng, 0, static_cast<int>(cams.size()) - 1);
  item.authentic = render_video(scene, cams[static_cast<std::size_t>(item.camera)], options.height, options.width,
                                frames, rng);

  if (!item.manipulated) {
    item.kind = "authentic";
    item.recipe = json::object();
    item.frames = item.authentic;
    item.mask = ForgeryMask::zeros(options.height, options.width);
    return item;
  }

  auto sample = sample_mask(options.height, options.width, rng, options.mask);
  item.mask = sample.mask;
  json recipe{{"mask", to_json(sample.recipe)}};

  const bool splice = dataset == DatasetKind::kVCMS || dataset == DatasetKind::kICMS;
  if (splice) {
    // Splice sources come from their own stream so they never coincide with
    // another item's content.
    Rng src_rng = make_rng(options.seed, {d, i, kSpliceSourceStream});
    const auto src_scene = SceneParams::sample(src_rng);
    int src_cam = uniform_int(src_rng, 0, static_cast<int>(cams.size()) - 2);
    if (src_cam >= item.camera) ++src_cam;
    auto source = render_video(src_scene, cams[static_cast<std::size_t>(src_cam)], options.height, options.width,
                               frames, src_rng);
    for (int f = 0; f < frames; ++f)
      item.frames.push_back(quantize8(apply_splice(item.authentic[f], source[f], item.mask)));
    item.kind = "splice";
    recipe["manipulation"] = to_json(ManipulationRecipe{ManipulationKind::kSplice, Visibility::kVisible, {}});
    recipe["source_camera"] = src_cam;
    recipe["source_scene"] = to_json(src_scene);
  } else {
    const bool visible = dataset == DatasetKind::kVPVM || dataset == DatasetKind::kIPVM;
    const auto manip = sample_inplace_recipe(visible ? Visibility::kVisible : Visibility::kInvisible, rng);
    for (int f = 0; f < frames; ++f)
      item.frames.push_back(quantize8(apply_inplace(item.authentic[f], item.mask, manip, rng)));
    item.kind = "in-place";
    recipe["manipulation"] = to_json(manip);
  }
  recipe["scene"] = to_json(scene);
  item.recipe = std::move(recipe);

  for (int f = 0; f < frames; ++f) {
    if (!confined_to_mask(item.authentic[f], item.frames[f], item.mask))
      throw GenerationError("item " + item.id + " changed pixels outside its mask");
  }
  return item;
}

json to_json(const ManifestRecord& r) {
  json frames = json::array();
  for (const auto& p : r.frame_paths) frames.push_back(p.generic_string());
  return json{{"id", r.id},
              {"split", r.split},
              {"dataset", r.dataset},
              {"kind", r.kind},
              {"recipe", r.recipe},
              {"mask_path", r.mask_path.generic_string()},
              {"frame_paths", frames},
              {"encode_settings", r.encode_settings},
              {"seed", r.seed},
              {"camera", r.camera},
              {"container", r.container},
              {"encode_command", r.encode_command}};
}

ManifestRecord manifest_record_from_json(const json& j) {
  ManifestRecord r;
  try {
    r.id = j.at("id").get<std::string>();
    r.split = j.at("split").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.kind = j.at("kind").get<std::string>();
    r.recipe = j.value("recipe", json::object());
    r.mask_path = j.at("mask_path").get<std::string>();
    for (const auto& p : j.at("frame_paths")) r.frame_paths.emplace_back(p.get<std::string>());
    r.encode_settings = j.value("encode_settings", std::string{});
    r.seed = j.value("seed", std::uint64_t{0});
    r.camera = j.value("camera", 0);
    r.container = j.value("container", std::string{});
    r.encode_command = j.value("encode_command", std::string{});
  } catch (const json::exception& e) {
    throw IoError(std::string("malformed manifest record: ") + e.what());
  }
  return r;
}

std::vector<ManifestRecord> generate_corpus(const CorpusOptions& options, const fs::path& out_dir) {
  options.validate();
  if (options.encode.mode == EncodeMode::kH264) locate_encoder(options.encode.encoder);
  fs::create_directories(out_dir / "frames");
  fs::create_directories(out_dir / "masks");
  {
    std::ofstream meta(out_dir / "corpus.json");
    if (!meta) throw IoError("cannot write " + (out_dir / "corpus.json").string());
    meta << to_json(options).dump(2) << "\n";
  }

  std::vector<ManifestRecord> records;
  std::ofstream manifest(out_dir / "manifest.jsonl");
  if (!manifest) throw IoError("cannot write " + (out_dir / "manifest.jsonl").string());
  for (auto dataset : options.datasets) {
    for (int index = 0; index < options.items.total(); ++index) {
      auto item = synthesize_item(options, dataset, index);
      ManifestRecord r;
      r.id = item.id;
      r.split = item.split;
      r.dataset = dataset_name(dataset);
      r.kind = item.kind;
      r.recipe = item.recipe;
      r.seed = item.seed;
      r.camera = item.camera;
      r.encode_settings = options.encode.settings_string();
      r.mask_path = fs::path("masks") / (item.id + ".png");
      write_mask(out_dir / r.mask_path, item.mask);

      if (options.encode.mode == EncodeMode::kH264) {
        fs::create_directories(out_dir / "videos");
        auto enc = encode_video(item.frames, options.encode, out_dir / "videos", item.id);
        // decoded frames live next to the lossless layout
        const auto frame_dir = out_dir / "frames" / item.id;
        fs::create_directories(frame_dir);
        for (std::size_t f = 0; f < enc.frame_paths.size(); ++f) {
          const auto dst = frame_dir / enc.frame_paths[f].filename();
          fs::rename(enc.frame_paths[f], dst);
          r.frame_paths.push_back(fs::relative(dst, out_dir));
        }
        fs::remove_all(out_dir / "videos" / item.id);
        r.container = fs::relative(enc.container, out_dir).generic_string();
        r.encode_command = enc.command_line;
      } else {
        auto enc = encode_video(item.frames, options.encode, out_dir / "frames", item.id);
        for (const auto& p : enc.frame_paths) r.frame_paths.push_back(fs::relative(p, out_dir));
        r.container = fs::relative(enc.container, out_dir).generic_string();
      }
      manifest << to_json(r).dump() << "\n";
      records.push_back(std::move(r));
    }
  }
  if (!manifest) throw IoError("failed writing manifest in " + out_dir.string());
  return records;
}

fs::path manifest_path_for(const fs::path& p) {
  if (fs::is_directory(p)) return p / "manifest.jsonl";
  return p;
}

std::vector<ManifestRecord> read_manifest(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open manifest " + manifest_path.string());
  const auto root = manifest_path.parent_path();
  std::vector<ManifestRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw IoError(manifest_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    auto r = manifest_record_from_json(j);
    if (r.mask_path.is_relative()) r.mask_path = root / r.mask_path;
    for (auto& p : r.frame_paths)
      if (p.is_relative()) p = root / p;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace forgeloc
