#pragma once

#include <filesystem>
#include <string>

#include "meter/data.hpp"
#include "meter/ous.hpp"

namespace meter {

// Structured-text (JSON) dumps. Doubles are written in shortest round-trip
// form, so load(save(x)) == x exactly. Every document carries a "format"
// tag and version; a mismatch raises DataError.
inline constexpr int kFormatVersion = 1;

std::string to_json(const AutoencoderModel& model);
std::string to_json(const ControllerModel& model);
std::string to_json(const HyperNetwork& hyper);
std::string to_json(const Snapshot& snapshot);
std::string to_json(const Standardizer& transform);

AutoencoderModel autoencoder_from_json(const std::string& text);
ControllerModel controller_from_json(const std::string& text);
HyperNetwork hypernetwork_from_json(const std::string& text);
Snapshot snapshot_from_json(const std::string& text);
Standardizer standardizer_from_json(const std::string& text);

void save_snapshot(const std::filesystem::path& path, const Snapshot& snapshot);
Snapshot load_snapshot(const std::filesystem::path& path);
void save_standardizer(const std::filesystem::path& path, const Standardizer& transform);
Standardizer load_standardizer(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace meter
