#include "llm/backend.hpp"

#include "core/errors.hpp"
#include "core/io.hpp"

#include <httplib.h>

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <thread>

namespace detours::llm {

using nlohmann::json;

void BackendConfig::validate() const {
    if (kind == Kind::http && endpoint.empty())
        throw ConfigError("backend.endpoint", "required for the http backend");
    if (max_retries < 0) throw ConfigError("backend.max_retries", "must be >= 0");
    if (timeout_seconds <= 0) throw ConfigError("backend.timeout_seconds", "must be > 0");
    if (fault_rate < 0.0 || fault_rate > 1.0)
        throw ConfigError("backend.fault_rate", "must be in [0, 1]");
}

json BackendConfig::to_json() const {
    return json{{"kind", kind == Kind::http ? "http" : "offline"},
                {"endpoint", endpoint},
                {"model", model},
                {"max_retries", max_retries},
                {"timeout_seconds", timeout_seconds},
                {"temperature", temperature},
                {"backoff_base_seconds", backoff_base_seconds},
                {"api_key_env", api_key_env},
                {"audit_path", audit_path},
                {"fault_rate", fault_rate},
                {"fault_seed", fault_seed}};
}

BackendConfig BackendConfig::from_json(const json& j) {
    BackendConfig c;
    const std::string kind = j.value("kind", "offline");
    if (kind == "http")
        c.kind = Kind::http;
    else if (kind == "offline")
        c.kind = Kind::offline;
    else
        throw ConfigError("backend.kind", "must be 'http' or 'offline'");
    c.endpoint = j.value("endpoint", c.endpoint);
    c.model = j.value("model", c.model);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
    c.temperature = j.value("temperature", c.temperature);
    c.backoff_base_seconds = j.value("backoff_base_seconds", c.backoff_base_seconds);
    c.api_key_env = j.value("api_key_env", c.api_key_env);
    c.audit_path = j.value("audit_path", c.audit_path);
    c.fault_rate = j.value("fault_rate", c.fault_rate);
    c.fault_seed = j.value("fault_seed", c.fault_seed);
    c.validate();
    return c;
}

double backoff_delay_seconds(int attempt, double base) {
    return base * std::pow(2.0, attempt);
}

// ---------------------------------------------------------------------
// fault injection

FaultInjector::Outcome FaultInjector::apply(const std::string& clean, bool is_detour) const {
    if (rate <= 0.0) return {clean, std::nullopt};
    Rng rng(seed ^ fnv1a64(clean));
    if (!rng.bernoulli(rate)) return {clean, std::nullopt};
    FaultKind kind = static_cast<FaultKind>(rng.uniform_int(4));
    // truncation needs a second step line to cut at; fall back to prose
    if (kind == FaultKind::truncate && !is_detour && clean.find("\nStep 2:") == std::string::npos)
        kind = FaultKind::prose;
    return {corrupt(clean, kind, is_detour), kind};
}

std::string FaultInjector::corrupt(const std::string& clean, FaultKind kind, bool is_detour) {
    switch (kind) {
        case FaultKind::prose:
            return is_detour ? "I am not sure what the user would ask in this situation."
                             : "I cannot summarize this video.";
        case FaultKind::drop_timestamps: {
            // remove every bracketed window
            std::string out;
            bool in_bracket = false;
            for (char c : clean) {
                if (c == '[') {
                    in_bracket = true;
                    continue;
                }
                if (c == ']') {
                    in_bracket = false;
                    continue;
                }
                if (!in_bracket) out.push_back(c);
                else if (is_detour) continue;
            }
            if (!is_detour) {
                // also strip the timestamps themselves so step lines keep
                // only their description
                std::string squeezed;
                size_t i = 0;
                while (i < out.size()) {
                    if (std::isdigit(static_cast<unsigned char>(out[i])) && i + 7 < out.size() &&
                        out[i + 2] == ':' && out[i + 5] == ':') {
                        i += 8;
                        continue;
                    }
                    squeezed.push_back(out[i]);
                    ++i;
                }
                return squeezed;
            }
            return out;
        }
        case FaultKind::truncate: {
            if (is_detour) {
                const size_t cut = clean.find(", Detour time window");
                return cut == std::string::npos ? clean.substr(0, clean.size() / 2)
                                                : clean.substr(0, cut);
            }
            const size_t cut = clean.find("\nStep 2:");
            return cut == std::string::npos ? clean : clean.substr(0, cut);
        }
        case FaultKind::corrupt_timestamp: {
            // overflow the minutes field of the first timestamp
            const size_t open = clean.find('[');
            std::string out = clean;
            if (open != std::string::npos && open + 6 < out.size()) {
                out[open + 4] = '9';
                out[open + 5] = '9';
            }
            return out;
        }
    }
    return clean;
}

parse::RejectReason FaultInjector::expected_reason(FaultKind kind, bool is_detour) {
    using parse::RejectReason;
    if (is_detour) {
        switch (kind) {
            case FaultKind::prose: return RejectReason::MissingField;
            case FaultKind::drop_timestamps: return RejectReason::MissingField;
            case FaultKind::truncate: return RejectReason::MissingField;
            case FaultKind::corrupt_timestamp: return RejectReason::BadTimestamp;
        }
    }
    switch (kind) {
        case FaultKind::prose: return RejectReason::NoParse;
        case FaultKind::drop_timestamps: return RejectReason::BadTimestamp;
        case FaultKind::truncate: return RejectReason::LowCoverage;
        case FaultKind::corrupt_timestamp: return RejectReason::BadTimestamp;
    }
    return RejectReason::NoParse;
}

// ---------------------------------------------------------------------
// offline backend

OfflineBackend::OfflineBackend(const world::World& w, double fault_rate, uint64_t fault_seed)
    : world_(w), injector_{fault_rate, fault_seed} {
    for (const auto& v : w.videos) {
        narration_to_video_[render_narration_block(v)] = v.id;
        summary_to_video_[render_summary_block(w.oracle_summary(v.id))] = v.id;
    }
}

std::string OfflineBackend::clean_completion(const std::vector<ChatMessage>& messages,
                                             bool* is_detour) const {
    if (messages.empty()) throw ProtocolError("empty message list");
    const std::string& user = messages.back().content;

    if (const size_t pos = user.find(kNarrationMarker); pos != std::string::npos) {
        *is_detour = false;
        std::string block = user.substr(pos + kNarrationMarker.size());
        if (!block.empty() && block.front() == '\n') block.erase(block.begin());
        const auto it = narration_to_video_.find(block);
        if (it == narration_to_video_.end())
            throw ProtocolError("narration block does not match any world video");
        return render_summary_block(world_.oracle_summary(it->second));
    }

    const size_t apos = user.find(kVideoAMarker);
    const size_t bpos = user.find(kVideoBMarker);
    if (apos == std::string::npos || bpos == std::string::npos || bpos < apos)
        throw ProtocolError("prompt matches neither template");
    *is_detour = true;
    const std::string block_a = user.substr(apos + kVideoAMarker.size(), bpos - apos - kVideoAMarker.size());
    const std::string block_b = user.substr(bpos + kVideoBMarker.size());
    const auto ia = summary_to_video_.find(block_a);
    const auto ib = summary_to_video_.find(block_b);
    if (ia == summary_to_video_.end() || ib == summary_to_video_.end())
        throw ProtocolError("summary block does not match any world video");
    const std::string& id_a = ia->second;
    const std::string& id_b = ib->second;

    // A recorded ground-truth tuple for this ordered pair wins; otherwise
    // synthesize a plausible detour from the first differing step (or a
    // generic one when the videos are variant-identical).
    for (const auto& g : world_.gt) {
        if (g.tuple.source_id == id_a && g.tuple.detour_id == id_b)
            return render_detour_answer(g.tuple.t_s, g.tuple.window, g.tuple.query);
    }
    const auto& sa = world_.video_steps.at(id_a);
    const auto& sb = world_.video_steps.at(id_b);
    const size_t n = std::min(sa.size(), sb.size());
    for (size_t i = 0; i < n; ++i) {
        if (sa[i].variant_value != sb[i].variant_value) {
            Rng rng = derive_rng(world_.cfg.seed, "offline:" + id_a + ":" + id_b);
            const std::string value = sb[i].variant_value;
            std::string q;
            if (value == "plain")
                q = "can i skip the " + sa[i].variant_value + " here?";
            else if (rng.bernoulli(0.5))
                q = "can i use " + value + " instead here?";
            else
                q = "what if i try " + value + " at this step?";
            return render_detour_answer(Timestamp{sa[i].start},
                                        make_window(sb[i].start, sb[i].start + sb[i].duration), q);
        }
    }
    const auto& mid = sb[n / 2];
    return render_detour_answer(Timestamp{sa[n / 2].start},
                                make_window(mid.start, mid.start + mid.duration),
                                "is there another way to do this step?");
}

std::string OfflineBackend::complete(const std::vector<ChatMessage>& messages) {
    return complete_with_fault_info(messages).text;
}

FaultInjector::Outcome OfflineBackend::complete_with_fault_info(
    const std::vector<ChatMessage>& messages) {
    bool is_detour = false;
    const std::string clean = clean_completion(messages, &is_detour);
    return injector_.apply(clean, is_detour);
}

// ---------------------------------------------------------------------
// http backend (OpenAI-compatible chat completions)

HttpBackend::HttpBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
}

std::string HttpBackend::complete(const std::vector<ChatMessage>& messages) {
    json body;
    body["model"] = cfg_.model;
    body["temperature"] = cfg_.temperature;
    body["messages"] = json::array();
    for (const auto& m : messages)
        body["messages"].push_back({{"role", role_name(m.role)}, {"content", m.content}});
    const std::string body_text = body.dump();

    httplib::Client cli(cfg_.endpoint);
    cli.set_connection_timeout(std::chrono::milliseconds(
        static_cast<int>(cfg_.timeout_seconds * 1000)));
    cli.set_read_timeout(std::chrono::milliseconds(static_cast<int>(cfg_.timeout_seconds * 1000)));
    httplib::Headers headers;
    const char* key = cfg_.api_key_env.empty() ? nullptr : std::getenv(cfg_.api_key_env.c_str());
    if (key && *key) headers.emplace("Authorization", std::string("Bearer ") + key);

    std::ofstream audit;
    if (!cfg_.audit_path.empty()) audit.open(cfg_.audit_path, std::ios::app);

    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::duration<double>(
                backoff_delay_seconds(attempt - 1, cfg_.backoff_base_seconds)));
        auto res = cli.Post("/v1/chat/completions", headers, body_text, "application/json");
        if (!res) {
            last_error = "transport failure: " + httplib::to_string(res.error());
            continue;
        }
        if (audit.is_open()) {
            // bodies only; the key travels in a header and is never logged
            audit << json{{"request", body}, {"status", res->status}, {"response", res->body}}.dump()
                  << '\n';
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "http status " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw ProtocolError("unexpected http status " + std::to_string(res->status));
        try {
            const json resp = json::parse(res->body);
            return resp.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception& e) {
            throw ProtocolError(std::string("malformed response body: ") + e.what());
        }
    }
    throw NetworkError("retries exhausted: " + last_error);
}

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& cfg, const world::World* w) {
    cfg.validate();
    if (cfg.kind == BackendConfig::Kind::http) return std::make_unique<HttpBackend>(cfg);
    if (!w) throw ConfigError("backend.kind", "offline backend needs a world");
    return std::make_unique<OfflineBackend>(*w, cfg.fault_rate, cfg.fault_seed);
}

} // namespace detours::llm
