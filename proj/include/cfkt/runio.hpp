#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cfkt {

/// FNV-1a, 64-bit. Fingerprints dataset bytes in run manifests so results
/// stay traceable to their exact inputs.
std::uint64_t fnv1a64(const void* data, std::size_t n);
std::uint64_t fnv1a64_file(const std::string& path);
std::string hex64(std::uint64_t v);

/// Everything needed to reproduce or audit a run, written as one JSON file
/// into the run directory.
struct RunManifest {
  std::string command;
  std::map<std::string, std::string> config;  // flat key=value snapshot
  std::uint64_t seed = 0;
  std::string dataset_path;
  std::string dataset_fingerprint;  // hex fnv1a of the input bytes
  std::vector<std::string> checkpoints;
  std::map<std::string, double> metrics;
  std::string started_utc;
  std::string finished_utc;
};

std::string manifest_to_json(const RunManifest& m);
void write_manifest(const std::string& path, const RunManifest& m);

/// "YYYYmmdd-HHMMSS" (UTC), for directory names.
std::string utc_timestamp();
/// ISO-8601 "YYYY-mm-ddTHH:MM:SSZ" (UTC), for manifest fields.
std::string utc_iso8601();

/// Creates runs_root/<timestamp>-<hash8> and returns the path. The eight hex
/// chars fold command + config so runs started within one second still land
/// in distinct directories.
std::string make_run_dir(const std::string& runs_root, const RunManifest& m);

}  // namespace cfkt
