#include "murgat/judge.hpp"

#include "murgat/digest.hpp"
#include "murgat/io_util.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <filesystem>
#include <mutex>
#include <random>
#include <thread>
#include <unordered_map>

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace murgat {

// ── enums ───────────────────────────────────────────────────────────────────

PromptStyle parse_prompt_style(const std::string& name) {
    if (name == "simple") return PromptStyle::simple;
    if (name == "cot") return PromptStyle::cot;
    if (name == "json") return PromptStyle::json;
    throw ConfigError("unknown prompt style: " + name);
}

const char* prompt_style_name(PromptStyle s) {
    switch (s) {
    case PromptStyle::simple: return "simple";
    case PromptStyle::cot: return "cot";
    default: return "json";
    }
}

EffortLevel parse_effort_level(const std::string& name) {
    if (name == "minimal") return EffortLevel::minimal;
    if (name == "low") return EffortLevel::low;
    if (name == "medium") return EffortLevel::medium;
    if (name == "high") return EffortLevel::high;
    throw ConfigError("unknown effort level: " + name);
}

const char* effort_level_name(EffortLevel e) {
    switch (e) {
    case EffortLevel::minimal: return "minimal";
    case EffortLevel::low: return "low";
    case EffortLevel::medium: return "medium";
    default: return "high";
    }
}

MediaRef media_ref(const SegmentHandle& h) {
    return MediaRef{h.clip_path, h.content_digest, format_citation(h.citation)};
}

// ── verdict parsing ─────────────────────────────────────────────────────────

namespace {

std::string upper(std::string s) {
    for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

// Last standalone YES/NO word in the text.
std::optional<bool> last_yes_no(const std::string& raw) {
    std::optional<bool> found;
    std::size_t i = 0;
    while (i < raw.size()) {
        if (!std::isalpha(static_cast<unsigned char>(raw[i]))) { ++i; continue; }
        std::size_t e = i;
        while (e < raw.size() && std::isalpha(static_cast<unsigned char>(raw[e]))) ++e;
        const std::string word = upper(raw.substr(i, e - i));
        if (word == "YES") found = true;
        else if (word == "NO") found = false;
        i = e;
    }
    return found;
}

// Last balanced {...} block; tolerates ```json fences and surrounding prose.
std::optional<Json> last_json_object(const std::string& raw) {
    for (std::size_t start = raw.rfind('{'); start != std::string::npos;
         start = (start == 0 ? std::string::npos : raw.rfind('{', start - 1))) {
        int depth = 0;
        for (std::size_t i = start; i < raw.size(); ++i) {
            if (raw[i] == '{') ++depth;
            else if (raw[i] == '}' && --depth == 0) {
                try {
                    return Json::parse(raw.substr(start, i - start + 1));
                } catch (const Json::exception&) {
                    break;
                }
            }
        }
    }
    return std::nullopt;
}

} // namespace

Verdict parse_verdict(const std::string& raw, PromptStyle style) {
    Verdict v;
    v.raw = raw;
    if (style == PromptStyle::json) {
        // Outer objects may nest; take the outermost parse, walking backwards.
        std::optional<Json> obj = last_json_object(raw);
        if (!obj || !obj->contains("label"))
            throw ParseError("no JSON verdict with a \"label\" field in judge output");
        const Json& label = (*obj)["label"];
        std::string token;
        if (label.is_string()) token = upper(label.get<std::string>());
        else if (label.is_boolean()) token = label.get<bool>() ? "YES" : "NO";
        if (token != "YES" && token != "NO")
            throw ParseError("JSON verdict label is neither YES nor NO");
        v.label = token == "YES";
        for (const char* key : {"reasoning", "evidence_description"})
            if (obj->contains(key) && (*obj)[key].is_string())
                v.rationale = (*obj)[key].get<std::string>();
        return v;
    }
    const auto yn = last_yes_no(raw);
    if (!yn) throw ParseError("no standalone YES/NO token in judge output");
    v.label = *yn;
    if (style == PromptStyle::cot) v.rationale = raw;
    return v;
}

// ── mock backend ────────────────────────────────────────────────────────────

namespace {

struct MockRule {
    std::vector<std::string> prompt_contains;
    std::optional<std::string> media_contains;
    bool error = false;
    std::vector<std::string> responses; // consumed per match; last repeats
    std::size_t next = 0;
};

class MockBackend final : public JudgeBackend {
public:
    explicit MockBackend(const Json& script) {
        default_response_ = script.value("default_response", std::string("NO"));
        jitter_ms_ = script.value("jitter_ms", 0);
        for (const auto& r : script.value("rules", Json::array())) {
            MockRule rule;
            if (r.contains("prompt_contains")) {
                if (r["prompt_contains"].is_array())
                    for (const auto& p : r["prompt_contains"])
                        rule.prompt_contains.push_back(p.get<std::string>());
                else
                    rule.prompt_contains.push_back(r["prompt_contains"].get<std::string>());
            }
            if (r.contains("media_contains"))
                rule.media_contains = r["media_contains"].get<std::string>();
            rule.error = r.value("error", false);
            if (r.contains("responses"))
                for (const auto& x : r["responses"]) rule.responses.push_back(x.get<std::string>());
            else if (r.contains("response"))
                rule.responses.push_back(r["response"].get<std::string>());
            rules_.push_back(std::move(rule));
        }
    }

    std::string complete(const JudgeRequest& request) override {
        ++calls_;
        if (jitter_ms_ > 0) {
            thread_local std::mt19937 rng{std::random_device{}()};
            std::this_thread::sleep_for(
                std::chrono::milliseconds(std::uniform_int_distribution<int>(0, jitter_ms_)(rng)));
        }
        std::lock_guard lk(mu_);
        for (auto& rule : rules_) {
            if (!matches(rule, request)) continue;
            if (rule.error) throw BackendError("mock backend scripted failure", 1);
            if (rule.responses.empty()) return default_response_;
            const std::string out = rule.responses[std::min(rule.next, rule.responses.size() - 1)];
            ++rule.next;
            return out;
        }
        return default_response_;
    }

    long transport_calls() const override { return calls_.load(); }

private:
    static bool matches(const MockRule& rule, const JudgeRequest& request) {
        for (const auto& needle : rule.prompt_contains)
            if (request.prompt.find(needle) == std::string::npos) return false;
        if (rule.media_contains) {
            bool hit = false;
            for (const auto& m : request.media) {
                std::string bytes;
                try {
                    bytes = read_file(m.path);
                } catch (const Error&) {
                    continue;
                }
                if (bytes.find(*rule.media_contains) != std::string::npos ||
                    m.label.find(*rule.media_contains) != std::string::npos) {
                    hit = true;
                    break;
                }
            }
            if (!hit) return false;
        }
        return true;
    }

    std::mutex mu_;
    std::vector<MockRule> rules_;
    std::string default_response_;
    int jitter_ms_ = 0;
    std::atomic<long> calls_{0};
};

} // namespace

std::shared_ptr<JudgeBackend> make_mock_backend(const std::string& script_path) {
    Json script;
    try {
        script = Json::parse(read_file(script_path));
    } catch (const Json::exception& e) {
        throw ConfigError("mock script " + script_path + ": " + e.what());
    }
    return std::make_shared<MockBackend>(script);
}

std::shared_ptr<JudgeBackend> make_mock_backend_inline(const std::string& script_json) {
    return std::make_shared<MockBackend>(Json::parse(script_json));
}

// ── http backend ────────────────────────────────────────────────────────────

namespace {

std::string base64_encode(const std::string& bytes) {
    static const char* tbl = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    while (i + 2 < bytes.size()) {
        const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                           (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                           static_cast<unsigned char>(bytes[i + 2]);
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out.push_back(tbl[(v >> 6) & 63]);
        out.push_back(tbl[v & 63]);
        i += 3;
    }
    if (i + 1 == bytes.size()) {
        const unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out += "==";
    } else if (i + 2 == bytes.size()) {
        const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) |
                           (static_cast<unsigned char>(bytes[i + 1]) << 8);
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out.push_back(tbl[(v >> 6) & 63]);
        out.push_back('=');
    }
    return out;
}

class HttpBackend final : public JudgeBackend {
public:
    explicit HttpBackend(JudgeConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.endpoint.empty())
            throw ConfigError("http backend requires an endpoint URL");
        const auto scheme_end = cfg_.endpoint.find("://");
        if (scheme_end == std::string::npos)
            throw ConfigError("endpoint must include scheme: " + cfg_.endpoint);
        const auto path_start = cfg_.endpoint.find('/', scheme_end + 3);
        host_ = cfg_.endpoint.substr(0, path_start);
        path_ = path_start == std::string::npos ? "/" : cfg_.endpoint.substr(path_start);
    }

    std::string complete(const JudgeRequest& request) override {
        ++calls_;
        Json body;
        body["model"] = request.model;
        body["prompt"] = request.prompt;
        body["temperature"] = request.temperature;
        if (request.effort) body["effort"] = effort_level_name(*request.effort);
        body["media"] = Json::array();
        for (const auto& m : request.media) {
            Json item;
            item["label"] = m.label;
            item["digest"] = m.digest;
            if (request.media_policy == JudgeConfig::MediaPolicy::inline_bytes)
                item["data_b64"] = base64_encode(read_file(m.path));
            else
                item["path"] = m.path;
            body["media"].push_back(std::move(item));
        }

        httplib::Client client(host_);
        client.set_read_timeout(120, 0);
        httplib::Headers headers;
        if (!cfg_.credential_env.empty()) {
            const char* token = std::getenv(cfg_.credential_env.c_str());
            if (token) headers.emplace("Authorization", std::string("Bearer ") + token);
        }
        auto res = client.Post(path_, headers, body.dump(), "application/json");
        if (!res)
            throw BackendError("http backend: no response from " + host_, 1);
        if (res->status != 200)
            throw BackendError("http backend: status " + std::to_string(res->status), 1);
        try {
            const Json parsed = Json::parse(res->body);
            if (parsed.contains("text")) return parsed["text"].get<std::string>();
        } catch (const Json::exception&) {
            // plain-text endpoints are acceptable
        }
        return res->body;
    }

    long transport_calls() const override { return calls_.load(); }

private:
    JudgeConfig cfg_;
    std::string host_, path_;
    std::atomic<long> calls_{0};
};

} // namespace

std::shared_ptr<JudgeBackend> make_http_backend(const JudgeConfig& cfg) {
    return std::make_shared<HttpBackend>(cfg);
}

std::shared_ptr<JudgeBackend> make_backend(const JudgeConfig& cfg,
                                           const std::string& mock_script_path) {
    if (cfg.backend_id == "mock") {
        if (mock_script_path.empty())
            throw ConfigError("mock backend selected but no mock script provided");
        return make_mock_backend(mock_script_path);
    }
    if (cfg.backend_id == "http") return make_http_backend(cfg);
    throw ConfigError("unknown backend id: " + cfg.backend_id);
}

// ── prompt library ──────────────────────────────────────────────────────────

PromptLibrary::PromptLibrary(std::string dir) : dir_(std::move(dir)) {
    if (!fs::is_directory(dir_))
        throw ConfigError("prompt template directory not found: " + dir_);
}

bool PromptLibrary::has(const std::string& template_name) const {
    return fs::exists(fs::path(dir_) / (template_name + ".txt"));
}

std::string PromptLibrary::render(const std::string& template_name,
                                  const std::map<std::string, std::string>& vars) const {
    const fs::path file = fs::path(dir_) / (template_name + ".txt");
    if (!fs::exists(file))
        throw ConfigError("missing prompt template: " + file.string());
    std::string text = read_file(file.string());
    for (const auto& [key, value] : vars) {
        const std::string needle = "{" + key + "}";
        std::size_t pos = 0;
        while ((pos = text.find(needle, pos)) != std::string::npos) {
            text.replace(pos, needle.size(), value);
            pos += value.size();
        }
    }
    return text;
}

// ── gateway ─────────────────────────────────────────────────────────────────

struct JudgeGateway::CacheImpl {
    std::mutex map_mu;
    std::unordered_map<std::string, std::string> mem;
    std::unordered_map<std::string, std::unique_ptr<std::mutex>> key_locks;

    std::mutex& lock_for(const std::string& key) {
        std::lock_guard lk(map_mu);
        auto& slot = key_locks[key];
        if (!slot) slot = std::make_unique<std::mutex>();
        return *slot;
    }
};

JudgeGateway::JudgeGateway(std::string slot, JudgeConfig cfg,
                           std::shared_ptr<JudgeBackend> backend,
                           std::shared_ptr<PromptLibrary> prompts, std::string cache_dir)
    : slot_(std::move(slot)), cfg_(std::move(cfg)), backend_(std::move(backend)),
      prompts_(std::move(prompts)), cache_dir_(std::move(cache_dir)),
      cache_(std::make_unique<CacheImpl>()) {
    fs::create_directories(fs::path(cache_dir_) / "judge");
}

JudgeGateway::~JudgeGateway() = default;

std::string JudgeGateway::call_with_cache(const std::string& key, const JudgeRequest& request) {
    ++stats_.logical_calls;
    stats_.media_attachments += static_cast<long>(request.media.size());

    {
        std::lock_guard lk(cache_->map_mu);
        auto it = cache_->mem.find(key);
        if (it != cache_->mem.end()) {
            ++stats_.cache_hits;
            return it->second;
        }
    }

    std::lock_guard key_lk(cache_->lock_for(key));
    {
        std::lock_guard lk(cache_->map_mu);
        auto it = cache_->mem.find(key);
        if (it != cache_->mem.end()) {
            ++stats_.cache_hits;
            return it->second;
        }
    }

    const fs::path disk = fs::path(cache_dir_) / "judge" / (key + ".txt");
    if (fs::exists(disk)) {
        const std::string cached = read_file(disk.string());
        std::lock_guard lk(cache_->map_mu);
        cache_->mem[key] = cached;
        ++stats_.cache_hits;
        return cached;
    }

    std::string response;
    int attempt = 0;
    for (;;) {
        try {
            response = backend_->complete(request);
            break;
        } catch (const BackendError&) {
            ++attempt;
            if (attempt > cfg_.max_retries)
                throw BackendError("backend '" + slot_ + "' failed after " +
                                       std::to_string(attempt) + " attempts",
                                   attempt);
            ++stats_.retries;
            std::this_thread::sleep_for(std::chrono::milliseconds(25 << (attempt - 1)));
        }
    }

    write_file_atomic(disk.string(), response);
    std::lock_guard lk(cache_->map_mu);
    cache_->mem[key] = response;
    return response;
}

std::string JudgeGateway::complete(const std::string& prompt,
                                   const std::vector<MediaRef>& media) {
    for (const auto& m : media) {
        std::error_code ec;
        if (!fs::exists(m.path, ec) || fs::file_size(m.path, ec) == 0)
            throw BackendError("empty or missing media attachment: " + m.path, 0);
    }
    JudgeRequest request;
    request.model = cfg_.model_name;
    request.prompt = prompt;
    request.media = media;
    request.temperature = cfg_.temperature;
    request.effort = cfg_.effort_level;
    request.media_policy = cfg_.media_policy;

    std::vector<std::string> key_parts{cfg_.model_name, prompt_style_name(cfg_.prompt_style),
                                       prompt};
    for (const auto& m : media) key_parts.push_back(m.digest);
    return call_with_cache(sha256_hex(key_parts), request);
}

Verdict JudgeGateway::verdict_call(const std::string& prompt,
                                   const std::vector<MediaRef>& media) {
    const std::string raw = complete(prompt, media);
    try {
        return parse_verdict(raw, cfg_.prompt_style);
    } catch (const ParseError&) {
        // One repair attempt with an explicit nudge, then give up.
        const std::string nudged = prompt + "\n\nAnswer only YES or NO.";
        const std::string raw2 = complete(nudged, media);
        try {
            return parse_verdict(raw2, cfg_.prompt_style);
        } catch (const ParseError&) {
            // The nudge asks for a bare token even under the json style.
            return parse_verdict(raw2, PromptStyle::simple);
        }
    }
}

Verdict JudgeGateway::judge_verifiable(const Sentence& s) {
    if (s.text.empty()) throw ValidationError("judge_verifiable: empty sentence");
    const std::string prompt =
        prompts_->render(std::string("verifiability_") + prompt_style_name(cfg_.prompt_style),
                         {{"sentence", s.text}});
    return verdict_call(prompt, {});
}

Verdict JudgeGateway::judge_entailment(const std::string& fact_text,
                                       const std::vector<SegmentHandle>& segments) {
    if (segments.empty()) throw ValidationError("judge_entailment: no segments supplied");
    std::string context;
    std::vector<MediaRef> media;
    for (const auto& seg : segments) {
        if (!context.empty()) context += "\n";
        context += format_citation(seg.citation) + " [segment " + seg.content_digest.substr(0, 12) +
                   "]";
        media.push_back(media_ref(seg));
    }
    const std::string prompt =
        prompts_->render(std::string("entailment_") + prompt_style_name(cfg_.prompt_style),
                         {{"fact", fact_text}, {"context", context}});
    return verdict_call(prompt, media);
}

namespace {

std::vector<std::string> group_multiset(const std::string& text) {
    std::vector<std::string> out;
    for (const auto& g : scan_citation_groups(text)) out.push_back(format_citation_group(g));
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

std::string JudgeGateway::decontextualize(const std::string& response_text,
                                          std::vector<std::string>* warnings) {
    const std::string prompt =
        prompts_->render("decontextualization", {{"INPUT_TEXT", response_text}});
    const std::string rewritten = complete(prompt, {});
    if (group_multiset(rewritten) != group_multiset(response_text)) {
        if (warnings)
            warnings->push_back(
                "decontextualization dropped or altered citation groups; original text kept");
        return response_text;
    }
    return rewritten;
}

std::vector<AtomicFact> JudgeGateway::decompose_sentence(const Sentence& s,
                                                         std::vector<std::string>* warnings) {
    auto parse_facts = [&](const std::string& raw) {
        std::vector<AtomicFact> facts;
        std::size_t pos = 0;
        while (pos <= raw.size()) {
            std::size_t eol = raw.find('\n', pos);
            std::string line = raw.substr(pos, eol == std::string::npos ? std::string::npos
                                                                        : eol - pos);
            pos = eol == std::string::npos ? raw.size() + 1 : eol + 1;
            const std::size_t first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos) continue;
            line = line.substr(first);
            if (line.rfind("- ", 0) != 0 && line.rfind("* ", 0) != 0) continue;
            line = line.substr(2);

            auto extracted = extract_citations(line);
            if (extracted.clean_text.empty()) continue;
            AtomicFact fact;
            fact.text = extracted.clean_text;
            fact.parent_index = s.index;
            for (const auto& c : extracted.citations) {
                if (std::find(s.citations.begin(), s.citations.end(), c) == s.citations.end()) {
                    if (warnings)
                        warnings->push_back("fact citation " + format_citation(c) +
                                            " not in parent sentence " + std::to_string(s.index) +
                                            "; dropped");
                    continue;
                }
                fact.citations.push_back(c);
            }
            if (fact.citations.empty()) fact.citations = s.citations;
            facts.push_back(std::move(fact));
        }
        return facts;
    };

    const std::string prompt = prompts_->render("atomic_decomposition", {{"sent", s.raw_text}});
    std::vector<AtomicFact> facts = parse_facts(complete(prompt, {}));
    if (facts.empty()) {
        const std::string nudged =
            prompt + "\n\nOutput every atomic fact as its own line starting with \"- \".";
        facts = parse_facts(complete(nudged, {}));
    }
    if (facts.empty()) {
        if (warnings)
            warnings->push_back("decomposition empty for sentence " + std::to_string(s.index) +
                                "; kept the sentence as a single fact");
        facts.push_back(AtomicFact{s.text, s.index, s.citations});
    }
    return facts;
}

} // namespace murgat
