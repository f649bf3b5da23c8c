#pragma once

#include "murgat/citation.hpp"
#include "murgat/judge.hpp"
#include "murgat/media_store.hpp"
#include "murgat/metrics.hpp"

#include <nlohmann/json.hpp>

#include <functional>
#include <memory>
#include <optional>

namespace murgat {

struct PipelineFlags {
    bool atomic_level_verifiability = false; // judge facts instead of sentences
    int concurrency = 1;                     // independent judge calls per response
};

// The three judge slots the evaluation protocol composes.
struct Judges {
    std::shared_ptr<JudgeGateway> verifiability;
    std::shared_ptr<JudgeGateway> decomposition;
    std::shared_ptr<JudgeGateway> entailment;
};

struct EvalRecord {
    std::string question_id;
    std::vector<Sentence> sentences; // echoed for meta-eval over components
    VerifiabilityMarks marks;
    std::vector<AtomicFact> facts;
    AttributionJudgments judgments;
    MetricBundle metrics;
    std::vector<std::string> warnings;
};

// Subtask 1: one verifiability judgment per sentence; cited flag from citation
// presence.  Judge failures mark the sentence not-verifiable with a warning.
VerifiabilityMarks identify_verifiable(const Response& r, Judges& judges,
                                       const PipelineFlags& flags,
                                       std::vector<std::string>* warnings);

// Subtask 2: decontextualize the whole reasoning block once, re-segment, then
// decompose only the verifiable-and-cited sentences, keeping sentence order.
std::vector<AtomicFact> decompose_response(const Response& r, const VerifiabilityMarks& marks,
                                           Judges& judges, const PipelineFlags& flags,
                                           std::vector<std::string>* warnings);

// Subtask 3: combined-segments entailment per fact (recall side), then
// singleton calls per citation for supported multi-citation facts (precision
// side).  Citations whose modality is missing from the manifest are scored
// not-relevant without a judge call.
AttributionJudgments assess_attribution(const std::string& question_id,
                                        const std::vector<AtomicFact>& facts, MediaStore& store,
                                        Judges& judges, const PipelineFlags& flags,
                                        std::vector<std::string>* warnings);

// All three subtasks over one parsed response.  Throws Error when the
// manifest does not cover the question id.
EvalRecord evaluate_response(const Response& r, MediaStore& store, Judges& judges,
                             const PipelineFlags& flags,
                             std::optional<char> gold_answer = std::nullopt);

// Run fn(0..n-1) with at most `width` worker threads; results must be written
// by index so aggregation stays order-deterministic.  First exception rethrows
// after all workers finish.
void parallel_indexed(std::size_t n, int width, const std::function<void(std::size_t)>& fn);

// ── Serialization (line format of the eval output file) ─────────────────────

nlohmann::json metric_bundle_to_json(const MetricBundle& b);
nlohmann::json eval_record_to_json(const EvalRecord& rec);
EvalRecord eval_record_from_json(const nlohmann::json& j);

} // namespace murgat
