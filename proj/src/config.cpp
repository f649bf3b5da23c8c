#include "murgat/config.hpp"

#include "murgat/digest.hpp"
#include "murgat/io_util.hpp"

#include <filesystem>

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace murgat {

namespace {

const char* kSlots[] = {"verifiability", "decomposition", "entailment", "generation",
                        "retrieval"};

JudgeConfig judge_config_from(const Json& j) {
    JudgeConfig cfg;
    cfg.backend_id = j.value("backend_id", std::string("mock"));
    cfg.model_name = j.value("model_name", std::string("mock-judge"));
    cfg.prompt_style = parse_prompt_style(j.value("prompt_style", std::string("simple")));
    cfg.temperature = j.value("temperature", 0.0);
    if (cfg.temperature < 0) throw ConfigError("temperature must be non-negative");
    cfg.max_retries = j.value("max_retries", 2);
    if (j.contains("effort_level") && !j["effort_level"].is_null())
        cfg.effort_level = parse_effort_level(j["effort_level"].get<std::string>());
    cfg.endpoint = j.value("endpoint", std::string());
    cfg.credential_env = j.value("credential_env", std::string());
    const std::string policy = j.value("media_attachment", std::string("file"));
    if (policy == "file") cfg.media_policy = JudgeConfig::MediaPolicy::file_reference;
    else if (policy == "inline") cfg.media_policy = JudgeConfig::MediaPolicy::inline_bytes;
    else throw ConfigError("media_attachment must be 'file' or 'inline'");
    return cfg;
}

Json judge_config_json(const JudgeConfig& cfg) {
    Json j;
    j["backend_id"] = cfg.backend_id;
    j["model_name"] = cfg.model_name;
    j["prompt_style"] = prompt_style_name(cfg.prompt_style);
    j["temperature"] = cfg.temperature;
    j["max_retries"] = cfg.max_retries;
    j["effort_level"] =
        cfg.effort_level ? Json(effort_level_name(*cfg.effort_level)) : Json(nullptr);
    j["endpoint"] = cfg.endpoint;
    j["credential_env"] = cfg.credential_env;
    j["media_attachment"] =
        cfg.media_policy == JudgeConfig::MediaPolicy::file_reference ? "file" : "inline";
    return j;
}

void validate_templates(const RunConfig& cfg) {
    if (!fs::is_directory(cfg.prompt_dir))
        throw ConfigError("prompt directory not found: " + cfg.prompt_dir);
    PromptLibrary lib(cfg.prompt_dir);

    std::vector<std::string> required = {
        "atomic_decomposition", "decontextualization", "generation_base",
        "generation_citation",  "posthoc",             "describe",
        "synthesize",           "find_window",         "holistic",
        "disentangled",         "disentangled_sentence"};
    for (const char* paradigm : {"logic", "narrative"})
        for (const char* grounding : {"declarative", "imperative"})
            required.push_back(std::string("plan_") + paradigm + "_" + grounding);
    for (const auto& [name, judge] : cfg.backends) {
        if (name == "verifiability")
            required.push_back(std::string("verifiability_") +
                               prompt_style_name(judge.prompt_style));
        if (name == "entailment")
            required.push_back(std::string("entailment_") +
                               prompt_style_name(judge.prompt_style));
    }
    for (const auto& name : required)
        if (!lib.has(name))
            throw ConfigError("missing prompt template '" + name + "' in " + cfg.prompt_dir);
}

} // namespace

const JudgeConfig& RunConfig::slot(const std::string& name) const {
    auto it = backends.find(name);
    if (it == backends.end()) throw ConfigError("no backend configured for slot: " + name);
    return it->second;
}

RunConfig default_run_config() {
    RunConfig cfg;
    for (const char* name : kSlots) {
        JudgeConfig j;
        j.backend_id = "mock";
        j.model_name = std::string("mock-") + name;
        cfg.backends[name] = j;
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const Error&) {
        throw ConfigError("config file not found: " + path);
    } catch (const Json::exception& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }

    RunConfig cfg = default_run_config();
    cfg.prompt_dir = j.value("prompt_dir", cfg.prompt_dir);
    cfg.cache_dir = j.value("cache_dir", cfg.cache_dir);
    cfg.concurrency = j.value("concurrency", cfg.concurrency);
    if (cfg.concurrency < 1) throw ConfigError("concurrency must be >= 1");
    cfg.extractor_command = j.value("extractor_command", cfg.extractor_command);
    cfg.segment_padding_s = j.value("segment_padding_s", cfg.segment_padding_s);
    if (cfg.segment_padding_s < 0) throw ConfigError("segment_padding_s must be >= 0");
    cfg.extractor_max_procs = j.value("extractor_max_procs", cfg.extractor_max_procs);
    cfg.atomic_level_verifiability =
        j.value("atomic_level_verifiability", cfg.atomic_level_verifiability);
    cfg.refinement = j.value("refinement", cfg.refinement);
    cfg.posthoc_source = j.value("posthoc_source", cfg.posthoc_source);
    if (cfg.posthoc_source != "base" && cfg.posthoc_source != "citation")
        throw ConfigError("posthoc_source must be 'base' or 'citation'");
    cfg.find_window_s = j.value("find_window_s", cfg.find_window_s);
    cfg.find_stride_s = j.value("find_stride_s", cfg.find_stride_s);

    const Json backend_table = j.value("backends", Json::object());
    for (const auto& [name, backend] : backend_table.items()) {
        bool known = false;
        for (const char* s : kSlots) known = known || name == s;
        if (!known) throw ConfigError("unknown backend slot: " + name);
        cfg.backends[name] = judge_config_from(backend);
    }

    validate_templates(cfg);
    return cfg;
}

std::string config_digest(const RunConfig& cfg) {
    Json j;
    j["prompt_dir"] = cfg.prompt_dir;
    j["cache_dir"] = cfg.cache_dir;
    j["concurrency"] = cfg.concurrency;
    j["extractor_command"] = cfg.extractor_command;
    j["segment_padding_s"] = cfg.segment_padding_s;
    j["extractor_max_procs"] = cfg.extractor_max_procs;
    j["atomic_level_verifiability"] = cfg.atomic_level_verifiability;
    j["refinement"] = cfg.refinement;
    j["posthoc_source"] = cfg.posthoc_source;
    j["find_window_s"] = cfg.find_window_s;
    j["find_stride_s"] = cfg.find_stride_s;
    Json backends;
    for (const auto& [name, judge] : cfg.backends) backends[name] = judge_config_json(judge);
    j["backends"] = std::move(backends);
    j["mock_script"] = cfg.mock_script;
    return sha256_hex(j.dump());
}

} // namespace murgat
