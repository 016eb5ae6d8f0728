#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hippo/metrics.hpp"

namespace hippo {

inline constexpr int kEpisodeLogVersion = 1;

// JSON Lines: a header object, one object per step, then a summary object.
std::string format_episode_log(const EpisodeLog& log);
void write_episode_log(const EpisodeLog& log, const std::filesystem::path& path);

// Throws Error for malformed input, a version mismatch, or non-contiguous step
// indices.
EpisodeLog parse_episode_log(std::istream& in);
EpisodeLog read_episode_log(const std::filesystem::path& path);

// Every *.jsonl file below `dir`, sorted by path.
std::vector<std::filesystem::path> find_episode_logs(const std::filesystem::path& dir);

}  // namespace hippo
