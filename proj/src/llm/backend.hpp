#pragma once

#include "llm/prompt.hpp"
#include "parse/parse.hpp"
#include "world/world.hpp"

#include <json.hpp>

#include <memory>
#include <optional>

namespace detours::llm {

class NetworkError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct BackendConfig {
    enum class Kind { http, offline };
    Kind kind = Kind::offline;
    std::string endpoint;                        // http base url
    std::string model = "llama-2-13b-chat";
    int max_retries = 3;
    double timeout_seconds = 30.0;
    double temperature = 0.0;                    // deterministic decoding by default
    double backoff_base_seconds = 1.0;           // doubles per retry
    std::string api_key_env = "DETOURS_API_KEY";
    std::string audit_path;                      // optional JSONL request/response log
    double fault_rate = 0.0;                     // offline only, test knob
    uint64_t fault_seed = 0;

    void validate() const;
    nlohmann::json to_json() const;
    static BackendConfig from_json(const nlohmann::json& j);
};

double backoff_delay_seconds(int attempt, double base);

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    virtual std::string complete(const std::vector<ChatMessage>& messages) = 0;
};

// ---------------------------------------------------------------------
// Fault injection: controllable noise for the rejection paths. Each kind
// deterministically maps to the reason the parser/validator pipeline
// must produce, so tests can assert exact reason codes.
enum class FaultKind { prose, drop_timestamps, truncate, corrupt_timestamp };

struct FaultInjector {
    double rate = 0.0;
    uint64_t seed = 0;

    // Decides per completion (pure in the clean text) and applies.
    struct Outcome {
        std::string text;
        std::optional<FaultKind> fault;
    };
    Outcome apply(const std::string& clean, bool is_detour) const;

    static std::string corrupt(const std::string& clean, FaultKind kind, bool is_detour);
    static parse::RejectReason expected_reason(FaultKind kind, bool is_detour);
};

// Renders ground-truth world annotations through the exact output
// grammars; a pure function of (messages, world, fault seed).
class OfflineBackend : public ChatBackend {
public:
    explicit OfflineBackend(const world::World& w, double fault_rate = 0.0,
                            uint64_t fault_seed = 0);

    std::string complete(const std::vector<ChatMessage>& messages) override;

    // The clean completion plus which fault (if any) was injected;
    // complete() returns just the text.
    FaultInjector::Outcome complete_with_fault_info(const std::vector<ChatMessage>& messages);

private:
    std::string clean_completion(const std::vector<ChatMessage>& messages, bool* is_detour) const;

    const world::World& world_;
    FaultInjector injector_;
    std::map<std::string, std::string> narration_to_video_;
    std::map<std::string, std::string> summary_to_video_;
};

class HttpBackend : public ChatBackend {
public:
    explicit HttpBackend(BackendConfig cfg);
    std::string complete(const std::vector<ChatMessage>& messages) override;

private:
    BackendConfig cfg_;
};

std::unique_ptr<ChatBackend> make_backend(const BackendConfig& cfg, const world::World* w);

} // namespace detours::llm
