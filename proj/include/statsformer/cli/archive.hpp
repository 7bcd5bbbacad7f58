#pragma once

#include <filesystem>
#include <string>

#include "statsformer/stacking/model.hpp"

namespace statsformer::cli {

/// Archive layout: a text preamble
///   STATSFORMER-MODEL
///   format <n>
///   header <bytes>
/// then a JSON metadata header of that length, a newline, and a binary
/// payload (little-endian) holding the standardizer and refit learner states.
inline constexpr int kArchiveFormat = 1;

std::string serialize_model(const stacking::StatsformerModel& model);
stacking::StatsformerModel deserialize_model(const std::string& bytes);

void save_model(const std::filesystem::path& path, const stacking::StatsformerModel& model);
stacking::StatsformerModel load_model(const std::filesystem::path& path);

}  // namespace statsformer::cli
