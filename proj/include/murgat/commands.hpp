#pragma once

#include "murgat/config.hpp"

#include <optional>
#include <string>
#include <vector>

namespace murgat::cli {

// Stable exit-code contract.
constexpr int kOk = 0;
constexpr int kUsage = 2;  // usage / config errors
constexpr int kOutage = 3; // full backend outage

struct GlobalOptions {
    std::string config_path;  // empty: built-in defaults
    std::optional<int> concurrency;
    std::optional<std::string> cache_dir;
    std::string mock_script;  // --mock: deterministic scripted backend everywhere
};

RunConfig resolve_config(const GlobalOptions& opts);

int cmd_generate(const std::string& task_file, const std::string& manifest_file,
                 const std::string& variant, const std::string& output,
                 const GlobalOptions& opts);

int cmd_evaluate(const std::string& response_file, const std::string& manifest_file,
                 const std::string& output, const std::string& report_path,
                 const std::string& task_file, const GlobalOptions& opts);

int cmd_meta_eval(const std::string& mode, const std::string& eval_file,
                  const std::string& gold_file, const std::string& responses_file,
                  const std::string& task_file, const std::string& metric,
                  const std::string& granularity, const std::string& output,
                  const GlobalOptions& opts);

int cmd_run_program(const std::string& task_file, const std::string& manifest_file,
                    const std::string& paradigm, const std::string& grounding,
                    const std::string& outdir, const GlobalOptions& opts);

int cmd_annotations(const std::string& op, const std::vector<std::string>& files,
                    const std::string& output, const GlobalOptions& opts);

int cmd_cache(const std::string& op, const GlobalOptions& opts);

} // namespace murgat::cli
