// Copyright (c) 2026, The forgeloc Authors
// SPDX-License-Identifier: Apache-2.0

#include "forgeloc/datagen/encoder.hpp"

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "forgeloc/errors.hpp"
#include "forgeloc/image_io.hpp"

extern char** environ;

namespace forgeloc {

namespace fs = std::filesystem;

namespace {

bool is_executable(const fs::path& p) {
  std::error_code ec;
  return fs::is_regular_file(p, ec) && ::access(p.c_str(), X_OK) == 0;
}

std::string frame_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04zu.png", i);
  return buf;
}

std::string quote(const std::string& s) {
  if (s.find_first_of(" \t'\"") == std::string::npos) return s;
  return "'" + s + "'";
}

std::vector<fs::path> write_sequence(const std::vector<torch::Tensor>& frames, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<fs::path> paths;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    paths.push_back(dir / frame_name(i));
    write_frame(paths.back(), frames[i]);
  }
  return paths;
}

}  // namespace

std::string EncodeSettings::settings_string() const {
  if (mode == EncodeMode::kLossless) return "lossless-png";
  return "crf=" + std::to_string(crf) + ",fps=" + std::to_string(fps);
}

EncodeMode parse_encode_mode(const std::string& s) {
  if (s == "lossless") return EncodeMode::kLossless;
  if (s == "h264") return EncodeMode::kH264;
  throw InvalidArgument("unknown encode mode '" + s + "' (expected lossless or h264)");
}

fs::path locate_encoder(const std::string& configured) {
  if (!configured.empty()) {
    if (is_executable(configured)) return configured;
    throw EnvironmentError("configured encoder is not executable: " + configured);
  }
  if (const char* env = std::getenv("FORGELOC_FFMPEG"); env != nullptr && *env != '\0') {
    if (is_executable(env)) return env;
    throw EnvironmentError(std::string("FORGELOC_FFMPEG is not executable: ") + env);
  }
  if (const char* path = std::getenv("PATH"); path != nullptr) {
    std::stringstream ss(path);
    std::string dir;
    while (std::getline(ss, dir, ':')) {
      if (dir.empty()) continue;
      auto candidate = fs::path(dir) / "ffmpeg";
      if (is_executable(candidate)) return candidate;
    }
  }
#ifdef FORGELOC_DEFAULT_FFMPEG
  if (is_executable(FORGELOC_DEFAULT_FFMPEG)) return FORGELOC_DEFAULT_FFMPEG;
#endif
  throw EnvironmentError("no H.264 encoder found: install ffmpeg, put it on PATH or set FORGELOC_FFMPEG");
}

ProcessResult run_process(const std::vector<std::string>& argv) {
  FORGELOC_REQUIRE(!argv.empty(), "process needs a program");
  ProcessResult result;
  for (std::size_t i = 0; i < argv.size(); ++i) result.command_line += (i ? " " : "") + quote(argv[i]);

  char err_path[] = "/tmp/forgeloc-stderr-XXXXXX";
  const int err_fd = ::mkstemp(err_path);
  if (err_fd < 0) throw IoError("cannot create a temporary file for encoder diagnostics");

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, STDIN_FILENO, "/dev/null", O_RDONLY, 0);
  posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, "/dev/null", O_WRONLY, 0);
  posix_spawn_file_actions_adddup2(&actions, err_fd, STDERR_FILENO);

  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  pid_t pid = 0;
  const int rc = ::posix_spawn(&pid, argv[0].c_str(), &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(err_fd);
  if (rc != 0) {
    ::unlink(err_path);
    throw EnvironmentError("cannot start " + argv[0], result.command_line);
  }
  int status = 0;
  ::waitpid(pid, &status, 0);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  std::ifstream in(err_path);
  std::stringstream ss;
  ss << in.rdbuf();
  result.stderr_text = ss.str();
  ::unlink(err_path);
  return result;
}

EncodeResult encode_video(const std::vector<torch::Tensor>& frames, const EncodeSettings& settings,
                          const fs::path& out_dir, const std::string& stem) {
  FORGELOC_REQUIRE(!frames.empty(), "cannot encode an empty frame list");
  EncodeResult out;
  if (settings.mode == EncodeMode::kLossless) {
    out.container = out_dir / stem;
    out.frame_paths = write_sequence(frames, out.container);
    for (const auto& p : out.frame_paths) out.decoded.push_back(read_frame(p).pixels);
    return out;
  }

  FORGELOC_REQUIRE(frames.front().size(0) % 2 == 0 && frames.front().size(1) % 2 == 0,
                   "H.264 (yuv420p) needs even frame dimensions");
  const auto ffmpeg = locate_encoder(settings.encoder);
  const auto staging = out_dir / (stem + ".src");
  write_sequence(frames, staging);
  out.container = out_dir / (stem + ".mp4");
  const auto fps = std::to_string(settings.fps);
  std::vector<std::string> enc = {ffmpeg.string(), "-hide_banner", "-loglevel", "error", "-y",
                                  "-framerate", fps, "-i", (staging / "%04d.png").string(),
                                  "-c:v", "libx264", "-preset", settings.preset, "-crf", std::to_string(settings.crf),
                                  "-pix_fmt", "yuv420p", "-r", fps, out.container.string()};
  auto r = run_process(enc);
  out.command_line = r.command_line;
  fs::remove_all(staging);
  if (r.exit_code != 0)
    throw EnvironmentError("encoder exited with status " + std::to_string(r.exit_code), r.command_line + "\n" + r.stderr_text);

  const auto decoded_dir = out_dir / stem;
  fs::create_directories(decoded_dir);
  std::vector<std::string> dec = {ffmpeg.string(), "-hide_banner", "-loglevel", "error", "-y", "-i",
                                  out.container.string(), "-start_number", "0",
                                  (decoded_dir / "%04d.png").string()};
  r = run_process(dec);
  if (r.exit_code != 0)
    throw EnvironmentError("decoder exited with status " + std::to_string(r.exit_code), r.command_line + "\n" + r.stderr_text);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto p = decoded_dir / frame_name(i);
    if (!fs::exists(p)) throw EnvironmentError("decoder produced fewer frames than encoded", r.command_line);
    out.frame_paths.push_back(p);
    out.decoded.push_back(read_frame(p).pixels);
  }
  return out;
}

std::vector<fs::path> decode_video(const fs::path& video, const fs::path& out_dir, const std::string& encoder) {
  if (!fs::exists(video)) throw IoError("video not found: " + video.string());
  const auto ffmpeg = locate_encoder(encoder);
  fs::create_directories(out_dir);
  auto r = run_process({ffmpeg.string(), "-hide_banner", "-loglevel", "error", "-y", "-i", video.string(),
                        "-start_number", "0", (out_dir / "%04d.png").string()});
  if (r.exit_code != 0)
    throw IoError("cannot decode " + video.string() + ": " + r.stderr_text);
  std::vector<fs::path> paths;
  for (std::size_t i = 0; fs::exists(out_dir / frame_name(i)); ++i) paths.push_back(out_dir / frame_name(i));
  if (paths.empty()) throw IoError("no frames decoded from " + video.string());
  return paths;
}

double psnr(const torch::Tensor& a, const torch::Tensor& b) {
  FORGELOC_REQUIRE(a.sizes() == b.sizes(), "psnr inputs differ in shape");
  const double mse = (a.to(torch::kFloat64) - b.to(torch::kFloat64)).pow(2).mean().item<double>();
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace forgeloc
