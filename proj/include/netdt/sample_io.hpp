#pragma once

// JSON-Lines serialization of NetworkSample. One sample per line with
// top-level keys nodes, links, queues, flows and optional labels/meta.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "netdt/network.hpp"

namespace netdt {

inline constexpr int kSampleFormatVersion = 1;

nlohmann::json sample_to_json(const NetworkSample& sample);

// Throws ValidationError when a key is missing or has the wrong type, or when
// the line declares an unsupported format_version.
NetworkSample sample_from_json(const nlohmann::json& j);

std::string sample_to_line(const NetworkSample& sample);

std::vector<NetworkSample> read_samples(std::istream& in);
std::vector<NetworkSample> read_samples(const std::filesystem::path& path);

void write_samples(std::ostream& out, const std::vector<NetworkSample>& samples);
void write_samples(const std::filesystem::path& path, const std::vector<NetworkSample>& samples);

}  // namespace netdt
