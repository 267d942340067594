#pragma once

#include <filesystem>

#include "json.hpp"
#include "treelmc/model.hpp"

namespace treelmc {

inline constexpr int kCheckpointFormatVersion = 1;

nlohmann::json spec_to_json(const ArchitectureSpec& spec);
ArchitectureSpec spec_from_json(const nlohmann::json& j);

// {format_version, spec, trees: [{w: F x N, b: N, pi: C x L}]}
nlohmann::json checkpoint_to_json(const EnsembleParams& params);
EnsembleParams checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const EnsembleParams& params,
                     const nlohmann::json& extra = nlohmann::json::object());
EnsembleParams load_checkpoint(const std::filesystem::path& path);

/// Writes `j` to `path`, creating parent directories.
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace treelmc
