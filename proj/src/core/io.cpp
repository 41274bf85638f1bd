#include "core/io.hpp"

#include "core/errors.hpp"

#include <cstring>
#include <fstream>

namespace detours {

using nlohmann::json;

namespace {

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

} // namespace

void write_dtrf(const std::filesystem::path& path, const Mat32& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path.string());
    os.write("DTRF", 4);
    put_u32(os, kDtrfVersion);
    put_u32(os, static_cast<uint32_t>(m.rows));
    put_u32(os, static_cast<uint32_t>(m.cols));
    // Payload is little-endian f32; this writes the native representation,
    // which matches on every platform we target.
    os.write(reinterpret_cast<const char*>(m.data.data()),
             static_cast<std::streamsize>(m.data.size() * sizeof(float)));
    if (!os) throw IoError("short write: " + path.string());
}

Mat32 read_dtrf(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "DTRF", 4) != 0)
        throw FormatError("not a DTRF file: " + path.string());
    const uint32_t version = get_u32(is);
    if (version != kDtrfVersion)
        throw FormatError("unsupported DTRF version " + std::to_string(version));
    const uint32_t rows = get_u32(is);
    const uint32_t cols = get_u32(is);
    Mat32 m(static_cast<int>(rows), static_cast<int>(cols));
    is.read(reinterpret_cast<char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(float)));
    if (!is) throw FormatError("truncated DTRF payload: " + path.string());
    return m;
}

std::vector<json> read_jsonl(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open: " + path.string());
    std::vector<json> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        out.push_back(json::parse(line));
    }
    return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& records) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for write: " + path.string());
    for (const auto& r : records) os << r.dump() << '\n';
}

json video_to_json(const NarratedVideo& v) {
    json narr = json::array();
    for (const auto& n : v.narrations) narr.push_back({{"t", n.t.seconds}, {"text", n.text}});
    return json{{"id", v.id}, {"task_id", v.task_id}, {"duration", v.duration}, {"narrations", narr}};
}

NarratedVideo video_from_json(const json& j) {
    NarratedVideo v;
    v.id = j.at("id").get<std::string>();
    v.task_id = j.at("task_id").get<std::string>();
    v.duration = j.at("duration").get<int>();
    for (const auto& n : j.at("narrations"))
        v.narrations.push_back({Timestamp{n.at("t").get<int>()}, n.at("text").get<std::string>()});
    return v;
}

void save_videos(const std::filesystem::path& dir, const std::vector<NarratedVideo>& videos) {
    std::filesystem::create_directories(dir / "features");
    std::vector<json> records;
    records.reserve(videos.size());
    for (const auto& v : videos) {
        records.push_back(video_to_json(v));
        write_dtrf(dir / "features" / (v.id + ".dtrf"), v.features);
    }
    write_jsonl(dir / "videos.jsonl", records);
}

std::vector<NarratedVideo> load_videos(const std::filesystem::path& dir) {
    std::vector<NarratedVideo> out;
    for (const auto& j : read_jsonl(dir / "videos.jsonl")) {
        NarratedVideo v = video_from_json(j);
        v.features = read_dtrf(dir / "features" / (v.id + ".dtrf"));
        if (v.features.rows != v.duration)
            throw FormatError("feature rows != duration for video " + v.id);
        out.push_back(std::move(v));
    }
    return out;
}

json tuple_to_json(const DetourTuple& t) {
    return json{{"source_id", t.source_id},
                {"t_s", t.t_s.seconds},
                {"query", t.query},
                {"detour_id", t.detour_id},
                {"t_start", t.window.start.seconds},
                {"t_end", t.window.end.seconds}};
}

DetourTuple tuple_from_json(const json& j) {
    DetourTuple t;
    t.source_id = j.at("source_id").get<std::string>();
    t.t_s = Timestamp{j.at("t_s").get<int>()};
    t.query = j.at("query").get<std::string>();
    t.detour_id = j.at("detour_id").get<std::string>();
    t.window = make_window(j.at("t_start").get<int>(), j.at("t_end").get<int>());
    return t;
}

json summary_to_json(const VideoSummary& s) {
    json steps = json::array();
    for (const auto& st : s.steps)
        steps.push_back({{"start", st.window.start.seconds},
                         {"end", st.window.end.seconds},
                         {"text", st.text}});
    return json{{"video_id", s.video_id}, {"recipe", s.recipe}, {"steps", steps}};
}

VideoSummary summary_from_json(const json& j) {
    VideoSummary s;
    s.video_id = j.at("video_id").get<std::string>();
    s.recipe = j.at("recipe").get<std::string>();
    for (const auto& st : j.at("steps"))
        s.steps.push_back({make_window(st.at("start").get<int>(), st.at("end").get<int>()),
                           st.at("text").get<std::string>()});
    return s;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path.string());
    std::string s((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return s;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for write: " + path.string());
    os << text;
}

} // namespace detours
