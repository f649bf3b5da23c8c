#include "murgat/generation.hpp"

#include "murgat/digest.hpp"
#include "murgat/io_util.hpp"
#include "murgat/pipeline.hpp"

#include <algorithm>
#include <cctype>

using Json = nlohmann::json;

namespace murgat {

EvalTask task_from_json(const Json& j) {
    EvalTask t;
    t.question_id = j.at("question_id").get<std::string>();
    t.question = j.at("question").get<std::string>();
    for (const auto& o : j.at("options")) t.options.push_back(o.get<std::string>());
    if (t.options.size() < 2 || t.options.size() > 5)
        throw ValidationError("task " + t.question_id + ": need 2-5 options");
    const std::string gold = j.at("gold_answer").get<std::string>();
    if (gold.size() != 1)
        throw ValidationError("task " + t.question_id + ": gold_answer must be one letter");
    t.gold_answer = static_cast<char>(std::toupper(static_cast<unsigned char>(gold[0])));
    if (t.gold_answer < 'A' || t.gold_answer >= static_cast<char>('A' + t.options.size()))
        throw ValidationError("task " + t.question_id + ": gold_answer outside option range");
    return t;
}

std::vector<EvalTask> load_tasks(const std::string& path) {
    std::vector<EvalTask> tasks;
    for (const auto& j : read_jsonl(path)) tasks.push_back(task_from_json(j));
    return tasks;
}

std::string render_options(const EvalTask& task) {
    std::string out;
    for (std::size_t i = 0; i < task.options.size(); ++i) {
        out += static_cast<char>('A' + i);
        out += ". ";
        out += task.options[i];
        if (i + 1 < task.options.size()) out += "\n";
    }
    return out;
}

GenerationVariant parse_variant(const std::string& name) {
    if (name == "base") return GenerationVariant::base;
    if (name == "citation") return GenerationVariant::citation;
    if (name == "posthoc") return GenerationVariant::posthoc;
    throw ConfigError("unknown generation variant: " + name);
}

const char* variant_name(GenerationVariant v) {
    switch (v) {
    case GenerationVariant::base: return "base";
    case GenerationVariant::citation: return "citation";
    default: return "posthoc";
    }
}

GenerationHarness::GenerationHarness(std::shared_ptr<JudgeGateway> generator, MediaStore& store,
                                     bool posthoc_from_citation)
    : generator_(std::move(generator)), store_(store),
      posthoc_from_citation_(posthoc_from_citation) {}

std::vector<MediaRef> GenerationHarness::task_media(const EvalTask& task) const {
    // Generators see the full inputs; judges later see only cited segments.
    const ManifestEntry& entry = store_.manifest().at(task.question_id);
    std::vector<MediaRef> media;
    if (entry.video_path)
        media.push_back(MediaRef{*entry.video_path, sha256_file_hex(*entry.video_path),
                                 "(video track)"});
    if (entry.audio_path)
        media.push_back(MediaRef{*entry.audio_path, sha256_file_hex(*entry.audio_path),
                                 "(audio track)"});
    return media;
}

Response GenerationHarness::generate(const EvalTask& task, const std::string& template_name) {
    const std::string prompt = generator_->prompts().render(
        template_name, {{"question", task.question}, {"options", render_options(task)}});
    const std::string raw = generator_->complete(prompt, task_media(task));
    return parse_response(raw, task.question_id);
}

Response GenerationHarness::generate_base(const EvalTask& task) {
    return generate(task, "generation_base");
}

Response GenerationHarness::generate_with_citations(const EvalTask& task) {
    return generate(task, "generation_citation");
}

namespace {

std::string squeeze_ws(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!out.empty() && out.back() != ' ') out.push_back(' ');
        } else {
            out.push_back(c);
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

std::string narrative_of(const Response& r) {
    std::string joined;
    for (const auto& s : r.sentences) {
        if (!joined.empty()) joined += " ";
        joined += s.text;
    }
    return squeeze_ws(joined);
}

} // namespace

Response GenerationHarness::posthoc_attribute(const Response& r, const EvalTask& task,
                                              std::vector<std::string>* warnings) {
    std::string repaired_raw;
    try {
        const std::string prompt =
            generator_->prompts().render("posthoc", {{"Output", r.raw}});
        repaired_raw = generator_->complete(prompt, task_media(task));
    } catch (const BackendError& e) {
        if (warnings) warnings->push_back("post-hoc backend failed: " + std::string(e.what()));
        return r;
    }

    Response repaired = parse_response(repaired_raw, r.question_id);
    if (narrative_of(repaired) != narrative_of(r)) {
        if (warnings)
            warnings->push_back("post-hoc repair rewrote the narrative text; original kept");
        return r;
    }
    if (repaired.answer_letter != r.answer_letter) {
        if (warnings)
            warnings->push_back("post-hoc repair changed the answer letter; original kept");
        return r;
    }
    return repaired;
}

std::vector<GenerationRow> GenerationHarness::run_generation(const std::vector<EvalTask>& tasks,
                                                             GenerationVariant variant,
                                                             int concurrency) {
    std::vector<GenerationRow> rows(tasks.size());
    parallel_indexed(tasks.size(), concurrency, [&](std::size_t i) {
        GenerationRow& row = rows[i];
        row.question_id = tasks[i].question_id;
        row.variant = variant_name(variant);
        try {
            Response r;
            switch (variant) {
            case GenerationVariant::base:
                r = generate_base(tasks[i]);
                break;
            case GenerationVariant::citation:
                r = generate_with_citations(tasks[i]);
                break;
            case GenerationVariant::posthoc: {
                const Response source = posthoc_from_citation_
                                            ? generate_with_citations(tasks[i])
                                            : generate_base(tasks[i]);
                r = posthoc_attribute(source, tasks[i], &row.warnings);
                break;
            }
            }
            row.raw = r.raw;
        } catch (const Error& e) {
            row.error = e.what();
        }
    });
    return rows;
}

Json generation_row_to_json(const GenerationRow& row, const std::string& model_name,
                            const std::string& effort) {
    Json j;
    j["question_id"] = row.question_id;
    j["variant"] = row.variant;
    if (row.error.empty()) {
        j["raw"] = row.raw;
        j["model_name"] = model_name;
        j["effort_level"] = effort.empty() ? Json(nullptr) : Json(effort);
    } else {
        j["error"] = row.error;
    }
    if (!row.warnings.empty()) j["warnings"] = row.warnings;
    return j;
}

} // namespace murgat
