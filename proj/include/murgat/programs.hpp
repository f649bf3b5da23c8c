#pragma once

#include "murgat/citation.hpp"
#include "murgat/generation.hpp"
#include "murgat/judge.hpp"
#include "murgat/media_store.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace murgat::prog {

// ── Program representation ──────────────────────────────────────────────────

enum class Paradigm { logic, narrative };
Paradigm parse_paradigm(const std::string& name);
const char* paradigm_name(Paradigm p);

enum class GroundingMode { declarative, imperative };
GroundingMode parse_grounding(const std::string& name);
const char* grounding_name(GroundingMode g);

enum class StepOp { find_event, describe, synthesize };
const char* step_op_name(StepOp op);

struct Step {
    StepOp op = StepOp::describe;
    std::string binding; // result variable; synthesized for narrative programs

    // find_event
    std::string query;
    Modality modality = Modality::visual;

    // describe: either explicit spans (declarative) or a find-result reference
    std::vector<TimeSpan> spans;
    std::string ref;
    bool fan_out = false; // loop/comprehension: one call per span in ref
    std::string instruction;

    // synthesize
    std::vector<std::string> evidence_refs; // empty: all prior step outputs

    int line = 0; // 1-based source line
};

struct GroundingProgram {
    Paradigm paradigm = Paradigm::narrative;
    GroundingMode grounding = GroundingMode::declarative;
    std::vector<Step> steps; // exactly one synthesize, last
};

// Narrative grammar: dash-prefixed call lines.  Logic grammar: a
// "def execute_command(video, options):" header, tool-call assignments, an
// optional single loop (statement or comprehension form), and a terminal
// "return answer_question(...)".  Grounding mode is inferred from the parsed
// steps; when `expected` is supplied, a mismatch is an axis violation.
// Throws ParseError with line information.
GroundingProgram parse_program(const std::string& text, Paradigm paradigm,
                               std::optional<GroundingMode> expected = std::nullopt);

// ── Execution ───────────────────────────────────────────────────────────────

struct RefinementRecord {
    bool checked = false;
    bool passed = false;
    bool retried = false;
};

struct StepRecord {
    std::string op;
    std::string binding;
    std::string inputs;     // human-readable resolved inputs
    std::string raw_output; // judge output or find-result listing
    std::vector<Citation> segments_used;
    RefinementRecord refinement;
    std::string error; // non-empty when the step failed
};

struct Trace {
    std::string question_id;
    Paradigm paradigm = Paradigm::narrative;
    GroundingMode grounding = GroundingMode::declarative;
    std::vector<StepRecord> steps;
};

nlohmann::json trace_to_json(const Trace& t);

struct EvidenceItem {
    std::string text;
    std::vector<Citation> citations;
};

// Locates spans for a semantic query; pluggable so tests and --mock runs can
// script results while production uses judge-windowed search.
class Retriever {
public:
    virtual ~Retriever() = default;
    virtual std::vector<TimeSpan> find(const std::string& query, Modality modality,
                                       const std::string& question_id,
                                       std::vector<std::string>* warnings) = 0;
};

// Windows the track (default 10 s window, 5 s stride), asks the judge per
// window whether the query occurs, and merges adjacent matches.
std::shared_ptr<Retriever> make_windowed_retriever(std::shared_ptr<JudgeGateway> judge,
                                                   MediaStore& store, int window_s = 10,
                                                   int stride_s = 5);

// Reads the "retrieval" table of a mock script; point entries expand to 1 s
// spans.  Unknown queries return no matches.
std::shared_ptr<Retriever> make_scripted_retriever(const std::string& mock_script_path);

struct ExecutorConfig {
    bool refinement = true;
    int concurrency = 1;
};

class ProgramExecutor {
public:
    ProgramExecutor(MediaStore& store, std::shared_ptr<JudgeGateway> describe_judge,
                    std::shared_ptr<JudgeGateway> synthesize_judge,
                    std::shared_ptr<JudgeGateway> refine_judge,
                    std::shared_ptr<Retriever> retriever, ExecutorConfig cfg);

    // Steps run in order; loops fan out over find results; describe outputs
    // are refinement-checked when enabled.  The final response carries, per
    // sentence, the citations of the evidence items it used (via [E#] tags in
    // the synthesizer output; untagged sentences inherit the union of all
    // evidence citations).  Synthesize calls never attach media.
    std::pair<Trace, Response> execute(const GroundingProgram& p, const EvalTask& task);

private:
    MediaStore& store_;
    std::shared_ptr<JudgeGateway> describe_judge_;
    std::shared_ptr<JudgeGateway> synthesize_judge_;
    std::shared_ptr<JudgeGateway> refine_judge_;
    std::shared_ptr<Retriever> retriever_;
    ExecutorConfig cfg_;
};

// One planning call rendered from the (paradigm, grounding) template; on a
// parse failure the error is appended and the planner re-prompted once.
GroundingProgram plan(const EvalTask& task, JudgeGateway& planner, MediaStore& store,
                      Paradigm paradigm, GroundingMode grounding,
                      std::string* program_text = nullptr);

} // namespace murgat::prog
