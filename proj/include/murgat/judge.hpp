#pragma once

#include "murgat/citation.hpp"
#include "murgat/media_store.hpp"

#include <atomic>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace murgat {

// ── Configuration ───────────────────────────────────────────────────────────

enum class PromptStyle { simple, cot, json };
PromptStyle parse_prompt_style(const std::string& name);
const char* prompt_style_name(PromptStyle s);

enum class EffortLevel { minimal, low, medium, high };
EffortLevel parse_effort_level(const std::string& name);
const char* effort_level_name(EffortLevel e);

struct JudgeConfig {
    std::string backend_id = "mock"; // "mock" | "http"
    std::string model_name = "mock-judge";
    PromptStyle prompt_style = PromptStyle::simple;
    double temperature = 0.0;
    int max_retries = 2;
    std::optional<EffortLevel> effort_level; // generation backends only

    // http transport
    std::string endpoint;
    std::string credential_env; // env var holding the bearer token, never the token
    enum class MediaPolicy { file_reference, inline_bytes };
    MediaPolicy media_policy = MediaPolicy::file_reference;
};

// ── Requests and verdicts ───────────────────────────────────────────────────

struct MediaRef {
    std::string path;
    std::string digest;
    std::string label; // canonical citation text shown to the judge
};

MediaRef media_ref(const SegmentHandle& h);

struct JudgeRequest {
    std::string model;
    std::string prompt;
    std::vector<MediaRef> media;
    double temperature = 0.0;
    std::optional<EffortLevel> effort;
    JudgeConfig::MediaPolicy media_policy = JudgeConfig::MediaPolicy::file_reference;
};

struct Verdict {
    bool label = false;
    std::optional<std::string> rationale;
    std::string raw; // preserved verbatim
};

// simple/cot: label follows the final standalone YES/NO token.
// json: label read from the "label" field of the last JSON object in the raw
// text (code fences tolerated).  Throws ParseError when no verdict is found.
Verdict parse_verdict(const std::string& raw, PromptStyle style);

// ── Backends ────────────────────────────────────────────────────────────────

class JudgeBackend {
public:
    virtual ~JudgeBackend() = default;
    // Throws BackendError on transport failure.
    virtual std::string complete(const JudgeRequest& request) = 0;
    virtual long transport_calls() const = 0;
};

// Deterministic scripted backend for tests and --mock runs.  Script schema:
//   {
//     "default_response": "NO",
//     "jitter_ms": 0,
//     "rules": [
//       {"prompt_contains": "...", "media_contains": "...",
//        "response": "...", "responses": ["...", "..."], "error": false}
//     ],
//     "retrieval": {"query": ["0:03", "0:19-0:21"]}
//   }
// Rules are tried in order; every present condition must hold. "responses"
// arrays are consumed one per match (last entry repeats). "error": true
// simulates a transport failure.
std::shared_ptr<JudgeBackend> make_mock_backend(const std::string& script_path);
std::shared_ptr<JudgeBackend> make_mock_backend_inline(const std::string& script_json);

// Plain JSON-over-HTTP transport: POST {model, prompt, temperature, effort,
// media[]} to the endpoint, bearer token from the configured env var.
std::shared_ptr<JudgeBackend> make_http_backend(const JudgeConfig& cfg);

std::shared_ptr<JudgeBackend> make_backend(const JudgeConfig& cfg,
                                           const std::string& mock_script_path);

// ── Prompt templates ────────────────────────────────────────────────────────

// Versioned text assets with {name} placeholders, loaded lazily from a
// directory and cached.
class PromptLibrary {
public:
    explicit PromptLibrary(std::string dir);
    std::string render(const std::string& template_name,
                       const std::map<std::string, std::string>& vars) const;
    bool has(const std::string& template_name) const;
    const std::string& dir() const { return dir_; }

private:
    std::string dir_;
};

// ── Gateway ─────────────────────────────────────────────────────────────────

struct GatewayStats {
    std::atomic<long> logical_calls{0};
    std::atomic<long> cache_hits{0};
    std::atomic<long> media_attachments{0};
    std::atomic<long> retries{0};
};

// One configured judge slot: prompt rendering, transport, verdict parsing,
// retries with exponential backoff, and a disk-backed response cache keyed by
// (model, prompt style, prompt, media digests).
class JudgeGateway {
public:
    JudgeGateway(std::string slot, JudgeConfig cfg, std::shared_ptr<JudgeBackend> backend,
                 std::shared_ptr<PromptLibrary> prompts, std::string cache_dir);
    ~JudgeGateway();

    // Cached raw completion. Guards against empty media files.
    std::string complete(const std::string& prompt, const std::vector<MediaRef>& media = {});

    Verdict judge_verifiable(const Sentence& s);
    Verdict judge_entailment(const std::string& fact_text,
                             const std::vector<SegmentHandle>& segments);
    // Pronouns resolved from prior context only; falls back to the input when
    // the rewrite does not conserve the citation-group multiset.
    std::string decontextualize(const std::string& response_text,
                                std::vector<std::string>* warnings);
    std::vector<AtomicFact> decompose_sentence(const Sentence& s,
                                               std::vector<std::string>* warnings);

    const JudgeConfig& config() const { return cfg_; }
    const PromptLibrary& prompts() const { return *prompts_; }
    const GatewayStats& stats() const { return stats_; }
    long logical_calls() const { return stats_.logical_calls.load(); }
    const std::string& slot() const { return slot_; }

private:
    std::string call_with_cache(const std::string& key, const JudgeRequest& request);
    Verdict verdict_call(const std::string& prompt, const std::vector<MediaRef>& media);

    std::string slot_;
    JudgeConfig cfg_;
    std::shared_ptr<JudgeBackend> backend_;
    std::shared_ptr<PromptLibrary> prompts_;
    std::string cache_dir_;
    GatewayStats stats_;
    struct CacheImpl;
    std::unique_ptr<CacheImpl> cache_;
};

} // namespace murgat
