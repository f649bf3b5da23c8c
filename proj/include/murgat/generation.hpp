#pragma once

#include "murgat/citation.hpp"
#include "murgat/judge.hpp"
#include "murgat/media_store.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <string>
#include <vector>

namespace murgat {

struct EvalTask {
    std::string question_id;
    std::string question;
    std::vector<std::string> options; // choice texts; letters run A, B, ... by position
    char gold_answer = 'A';
};

// JSONL: {"question_id", "question", "options", "gold_answer"}.  Validates
// 2-5 options and a gold answer within the lettered range.
std::vector<EvalTask> load_tasks(const std::string& path);
EvalTask task_from_json(const nlohmann::json& j);

// "A. first option\nB. second option\n..."
std::string render_options(const EvalTask& task);

enum class GenerationVariant { base, citation, posthoc };
GenerationVariant parse_variant(const std::string& name);
const char* variant_name(GenerationVariant v);

struct GenerationRow {
    std::string question_id;
    std::string variant;
    std::string raw;          // empty on failure
    std::string error;        // non-empty on failure
    std::vector<std::string> warnings;
};

class GenerationHarness {
public:
    GenerationHarness(std::shared_ptr<JudgeGateway> generator, MediaStore& store,
                      bool posthoc_from_citation = false);

    Response generate_base(const EvalTask& task);
    Response generate_with_citations(const EvalTask& task);

    // Citation-only surgery over an existing response: the repaired text must
    // keep the citation-stripped narrative and the answer letter bit-for-bit
    // (up to whitespace); anything else is rejected and the original kept.
    Response posthoc_attribute(const Response& r, const EvalTask& task,
                               std::vector<std::string>* warnings);

    // Per-task generation; failures are recorded and the run continues.
    // Output rows follow input task order regardless of completion order.
    std::vector<GenerationRow> run_generation(const std::vector<EvalTask>& tasks,
                                              GenerationVariant variant, int concurrency);

private:
    Response generate(const EvalTask& task, const std::string& template_name);
    std::vector<MediaRef> task_media(const EvalTask& task) const;

    std::shared_ptr<JudgeGateway> generator_;
    MediaStore& store_;
    bool posthoc_from_citation_;
};

nlohmann::json generation_row_to_json(const GenerationRow& row, const std::string& model_name,
                                      const std::string& effort);

} // namespace murgat
