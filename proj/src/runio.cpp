#include "cfkt/runio.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "cfkt/types.hpp"

namespace cfkt {

std::uint64_t fnv1a64(const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open for fingerprinting: " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    const auto n = static_cast<std::size_t>(in.gcount());
    for (std::size_t i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string manifest_to_json(const RunManifest& m) {
  nlohmann::json j;
  j["command"] = m.command;
  j["config"] = m.config;
  j["seed"] = m.seed;
  j["dataset_path"] = m.dataset_path;
  j["dataset_fingerprint"] = m.dataset_fingerprint;
  j["checkpoints"] = m.checkpoints;
  j["metrics"] = m.metrics;
  j["started_utc"] = m.started_utc;
  j["finished_utc"] = m.finished_utc;
  return j.dump(2) + "\n";
}

void write_manifest(const std::string& path, const RunManifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest: " + path);
  out << manifest_to_json(m);
}

namespace {

std::string format_utc(const char* fmt) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, fmt, &tm);
  return buf;
}

}  // namespace

std::string utc_timestamp() { return format_utc("%Y%m%d-%H%M%S"); }
std::string utc_iso8601() { return format_utc("%Y-%m-%dT%H:%M:%SZ"); }

std::string make_run_dir(const std::string& runs_root, const RunManifest& m) {
  std::string blob = m.command;
  for (const auto& [k, v] : m.config) blob += '\0' + k + '=' + v;
  const std::string dir =
      runs_root + "/" + utc_timestamp() + "-" + hex64(fnv1a64(blob.data(), blob.size())).substr(0, 8);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace cfkt
