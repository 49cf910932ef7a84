// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "forgeloc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "forgeloc/errors.hpp"

namespace forgeloc {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'F', 'L', 'C', 'K', 'P', 'T', '0', '1'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const fs::path& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) throw IoError("truncated checkpoint " + path.string());
  return value;
}

std::string get_string(std::istream& in, std::size_t n, const fs::path& path) {
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n)))
    throw IoError("truncated checkpoint " + path.string());
  return s;
}

}  // namespace

const torch::Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

void save_checkpoint(const fs::path& path, const Checkpoint& checkpoint) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const auto tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(kMagic, sizeof(kMagic));
    const auto manifest = checkpoint.manifest.dump();
    put<std::uint64_t>(out, manifest.size());
    out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
    put<std::uint64_t>(out, checkpoint.tensors.size());
    for (const auto& [name, tensor] : checkpoint.tensors) {
      put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      put<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.dim()));
      for (auto d : tensor.sizes()) put<std::int64_t>(out, d);
      auto data = tensor.detach().to(torch::kCPU, torch::kFloat32).contiguous();
      out.write(reinterpret_cast<const char*>(data.data_ptr<float>()),
                static_cast<std::streamsize>(data.numel() * sizeof(float)));
    }
    if (!out) throw IoError("failed writing checkpoint " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("not a checkpoint file: " + path.string());
  Checkpoint ck;
  const auto manifest_len = get<std::uint64_t>(in, path);
  try {
    ck.manifest = nlohmann::json::parse(get_string(in, manifest_len, path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("corrupt checkpoint manifest in " + path.string() + ": " + e.what());
  }
  const auto count = get<std::uint64_t>(in, path);
  for (std::uint64_t i = 0; i < count; ++i) {
    auto name = get_string(in, get<std::uint32_t>(in, path), path);
    const auto ndim = get<std::uint32_t>(in, path);
    std::vector<std::int64_t> dims(ndim);
    for (auto& d : dims) d = get<std::int64_t>(in, path);
    auto t = torch::empty(dims, torch::kFloat32);
    if (t.numel() > 0 &&
        !in.read(reinterpret_cast<char*>(t.data_ptr<float>()), static_cast<std::streamsize>(t.numel() * sizeof(float))))
      throw IoError("truncated tensor '" + name + "' in " + path.string());
    ck.tensors.emplace_back(std::move(name), std::move(t));
  }
  return ck;
}

NamedTensors collect_state(const torch::nn::Module& module, const std::string& prefix) {
  NamedTensors out;
  for (const auto& item : module.named_parameters()) out.emplace_back(prefix + item.key(), item.value());
  for (const auto& item : module.named_buffers()) out.emplace_back(prefix + item.key(), item.value());
  return out;
}

std::size_t apply_state(torch::nn::Module& module, const Checkpoint& checkpoint, const std::string& prefix,
                        bool strict) {
  torch::NoGradGuard no_grad;
  std::size_t copied = 0;
  auto copy_into = [&](const std::string& name, torch::Tensor& target) {
    const auto* src = checkpoint.find(prefix + name);
    if (src == nullptr) {
      if (strict) throw IoError("checkpoint is missing tensor '" + prefix + name + "'");
      return;
    }
    if (src->sizes() != target.sizes()) throw IoError("shape mismatch for tensor '" + prefix + name + "'");
    target.copy_(src->to(target.dtype()));
    ++copied;
  };
  for (auto& item : module.named_parameters()) copy_into(item.key(), item.value());
  for (auto& item : module.named_buffers()) copy_into(item.key(), item.value());
  return copied;
}

void save_network(const fs::path& path, const ForgeryNet& net, nlohmann::json extra) {
  Checkpoint ck;
  ck.manifest = extra.is_object() ? std::move(extra) : nlohmann::json::object();
  ck.manifest["kind"] = "network";
  ck.manifest["model"] = to_json(net->config());
  ck.tensors = collect_state(*net);
  save_checkpoint(path, ck);
}

ForgeryNet load_network(const fs::path& path, nlohmann::json* manifest_out) {
  auto ck = load_checkpoint(path);
  if (!ck.manifest.contains("model")) throw ConfigError("checkpoint " + path.string() + " has no model config");
  ForgeryNet net(model_config_from_json(ck.manifest.at("model")));
  apply_state(*net, ck);
  net->eval();
  if (manifest_out != nullptr) *manifest_out = std::move(ck.manifest);
  return net;
}

}  // namespace forgeloc
