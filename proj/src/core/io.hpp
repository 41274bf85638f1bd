#pragma once

#include "core/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace detours {

// DTRF sidecar feature file: 16-byte header (magic "DTRF", version u32,
// rows u32, cols u32, little-endian) followed by row-major f32 payload.
inline constexpr uint32_t kDtrfVersion = 1;

void write_dtrf(const std::filesystem::path& path, const Mat32& m);
Mat32 read_dtrf(const std::filesystem::path& path);

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& records);

// NarratedVideo <-> one JSONL record (metadata + narrations). Features
// travel separately in DTRF files named "<id>.dtrf".
nlohmann::json video_to_json(const NarratedVideo& v);
NarratedVideo video_from_json(const nlohmann::json& j);

// Corpus layout under a directory: videos.jsonl + features/<id>.dtrf.
void save_videos(const std::filesystem::path& dir, const std::vector<NarratedVideo>& videos);
std::vector<NarratedVideo> load_videos(const std::filesystem::path& dir);

nlohmann::json tuple_to_json(const DetourTuple& t);
DetourTuple tuple_from_json(const nlohmann::json& j);

nlohmann::json summary_to_json(const VideoSummary& s);
VideoSummary summary_from_json(const nlohmann::json& j);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

} // namespace detours
