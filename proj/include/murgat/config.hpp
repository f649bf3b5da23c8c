#pragma once

#include "murgat/judge.hpp"

#include <map>
#include <optional>
#include <string>

namespace murgat {

// Engine-wide run configuration.  Loaded from JSON; judge backends hang off
// named slots so each pipeline stage routes independently.
struct RunConfig {
    std::string prompt_dir = "assets/prompts";
    std::string cache_dir = ".murgat-cache";
    int concurrency = 4;

    // media store
    std::string extractor_command =
        "ffmpeg -loglevel error -ss {start} -to {end} -i {input} -y {output}";
    int segment_padding_s = 0;
    int extractor_max_procs = 4;

    // pipeline flags
    bool atomic_level_verifiability = false;
    bool refinement = true;
    std::string posthoc_source = "base"; // "base" | "citation"

    // retrieval (judge-windowed search defaults)
    int find_window_s = 10;
    int find_stride_s = 5;

    // slots: verifiability, decomposition, entailment, generation, retrieval
    std::map<std::string, JudgeConfig> backends;

    std::string mock_script; // --mock: every slot becomes the scripted backend

    const JudgeConfig& slot(const std::string& name) const;
};

// Parses and validates: the prompt directory and every template the
// configured slots reference must exist at load time.
RunConfig load_run_config(const std::string& path);
RunConfig default_run_config();

// Digest of the resolved configuration (for run manifests).
std::string config_digest(const RunConfig& cfg);

} // namespace murgat
