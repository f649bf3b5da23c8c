#include "murgat/programs.hpp"

#include "murgat/digest.hpp"
#include "murgat/io_util.hpp"
#include "murgat/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

using Json = nlohmann::json;

namespace murgat::prog {

Paradigm parse_paradigm(const std::string& name) {
    if (name == "logic") return Paradigm::logic;
    if (name == "narrative") return Paradigm::narrative;
    throw ConfigError("unknown paradigm: " + name);
}

const char* paradigm_name(Paradigm p) {
    return p == Paradigm::logic ? "logic" : "narrative";
}

GroundingMode parse_grounding(const std::string& name) {
    if (name == "declarative") return GroundingMode::declarative;
    if (name == "imperative") return GroundingMode::imperative;
    throw ConfigError("unknown grounding mode: " + name);
}

const char* grounding_name(GroundingMode g) {
    return g == GroundingMode::declarative ? "declarative" : "imperative";
}

const char* step_op_name(StepOp op) {
    switch (op) {
    case StepOp::find_event: return "find_event";
    case StepOp::describe: return "describe";
    default: return "synthesize";
    }
}

// ── Shared argument parsing ─────────────────────────────────────────────────

namespace {

struct Arg {
    enum class Kind { string, identifier, call, elision } kind;
    std::string keyword;       // non-empty for key=value arguments
    std::string text;          // literal value or identifier name
    std::string call_name;     // for Kind::call
    std::vector<Arg> call_args;
};

[[noreturn]] void fail(int line, const std::string& what) {
    throw ParseError("line " + std::to_string(line) + ": " + what);
}

std::string trim_copy(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

bool is_identifier(const std::string& s) {
    if (s.empty() || std::isdigit(static_cast<unsigned char>(s[0]))) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
    });
}

// Split a call argument list on top-level commas, honoring quotes and nesting.
std::vector<std::string> split_args(const std::string& inner, int line) {
    std::vector<std::string> parts;
    std::string cur;
    int depth = 0;
    char quote = 0;
    for (char c : inner) {
        if (quote) {
            cur.push_back(c);
            if (c == quote) quote = 0;
            continue;
        }
        if (c == '\'' || c == '"') {
            quote = c;
            cur.push_back(c);
            continue;
        }
        if (c == '(' || c == '[' || c == '{') ++depth;
        if (c == ')' || c == ']' || c == '}') {
            if (--depth < 0) fail(line, "unbalanced brackets in argument list");
        }
        if (c == ',' && depth == 0) {
            parts.push_back(trim_copy(cur));
            cur.clear();
            continue;
        }
        cur.push_back(c);
    }
    if (quote) fail(line, "unterminated string literal");
    if (depth != 0) fail(line, "unbalanced brackets in argument list");
    const std::string last = trim_copy(cur);
    if (!last.empty()) parts.push_back(last);
    return parts;
}

Arg parse_value(const std::string& text, int line);

// name(arg, arg, ...) -> (name, args); the whole text must be the call.
std::pair<std::string, std::vector<Arg>> parse_call(const std::string& text, int line) {
    const std::size_t open = text.find('(');
    if (open == std::string::npos || text.back() != ')')
        fail(line, "expected a call, got '" + text + "'");
    const std::string name = trim_copy(text.substr(0, open));
    if (!is_identifier(name)) fail(line, "bad call name '" + name + "'");
    std::vector<Arg> args;
    for (const auto& piece : split_args(text.substr(open + 1, text.size() - open - 2), line))
        args.push_back(parse_value(piece, line));
    return {name, std::move(args)};
}

Arg parse_value(const std::string& raw, int line) {
    std::string text = trim_copy(raw);
    if (text.empty()) fail(line, "empty argument");
    if (text == "..." || text == "\xe2\x80\xa6")
        return Arg{Arg::Kind::elision, "", "", "", {}};
    // listings elide trailing arguments as "call(...)..."; drop the marker
    while (text.size() > 3 && text.rfind("...") == text.size() - 3)
        text = trim_copy(text.substr(0, text.size() - 3));
    // key=value keyword argument ("modality='audio'", "instruction=...")
    if (text.front() != '\'' && text.front() != '"') {
        const std::size_t eq = text.find('=');
        if (eq != std::string::npos) {
            const std::string key = trim_copy(text.substr(0, eq));
            const std::size_t paren = text.find('(');
            if (is_identifier(key) && key.find('.') == std::string::npos &&
                (paren == std::string::npos || eq < paren)) {
                Arg value = parse_value(text.substr(eq + 1), line);
                value.keyword = key;
                return value;
            }
        }
    }
    if (text.front() == '\'' || text.front() == '"') {
        if (text.size() < 2 || text.back() != text.front())
            fail(line, "unterminated string literal " + text);
        return Arg{Arg::Kind::string, "", text.substr(1, text.size() - 2), "", {}};
    }
    if (text.find('(') != std::string::npos) {
        auto [name, args] = parse_call(text, line);
        Arg a{Arg::Kind::call, "", "", name, std::move(args)};
        return a;
    }
    if (is_identifier(text)) return Arg{Arg::Kind::identifier, "", text, "", {}};
    fail(line, "unparseable argument '" + text + "'");
}

struct CallView {
    std::vector<Arg> positional;
    std::map<std::string, Arg> keywords;
};

CallView classify_args(const std::vector<Arg>& args) {
    CallView view;
    for (const auto& arg : args) {
        if (arg.keyword.empty()) view.positional.push_back(arg);
        else view.keywords[arg.keyword] = arg;
    }
    return view;
}

TimeSpan parse_program_timestamp(const std::string& text, int line) {
    try {
        return parse_timestamp(text);
    } catch (const ParseError& e) {
        fail(line, e.what());
    }
}

Modality modality_from(const CallView& view, int line) {
    auto it = view.keywords.find("modality");
    if (it == view.keywords.end()) return Modality::visual;
    if (it->second.kind != Arg::Kind::string) fail(line, "modality must be a quoted string");
    try {
        return parse_modality(it->second.text);
    } catch (const ParseError& e) {
        fail(line, e.what());
    }
}

std::string instruction_from(const CallView& view, std::size_t positional_index, int line) {
    auto it = view.keywords.find("instruction");
    if (it != view.keywords.end()) {
        if (it->second.kind == Arg::Kind::elision) return "";
        if (it->second.kind != Arg::Kind::string)
            fail(line, "instruction must be a quoted string");
        return it->second.text;
    }
    if (positional_index < view.positional.size()) {
        const Arg& a = view.positional[positional_index];
        if (a.kind == Arg::Kind::string) return a.text;
    }
    return "";
}

// ── Narrative grammar ───────────────────────────────────────────────────────

// "- op(args...)" lines; find_events may appear nested as describe's segment.
GroundingProgram parse_narrative(const std::string& text) {
    GroundingProgram program;
    program.paradigm = Paradigm::narrative;
    int implicit_find = 0;

    std::istringstream in(text);
    std::string raw_line;
    int lineno = 0;
    while (std::getline(in, raw_line)) {
        ++lineno;
        std::string line = trim_copy(raw_line);
        if (line.empty()) continue;
        if (line.rfind("- ", 0) != 0 && line.rfind("-\t", 0) != 0) continue; // prose around the plan
        line = trim_copy(line.substr(2));
        if (line.empty()) continue;

        auto [name, args] = parse_call(line, lineno);
        CallView view = classify_args(args);

        if (name == "describe") {
            if (view.positional.empty() ||
                (view.positional[0].kind != Arg::Kind::string &&
                 view.positional[0].kind != Arg::Kind::call))
                fail(lineno, "describe needs a timestamp or find_events(...) segment");
            Step step;
            step.op = StepOp::describe;
            step.line = lineno;
            step.modality = modality_from(view, lineno);
            step.instruction = instruction_from(view, 1, lineno);
            step.binding = "_desc" + std::to_string(program.steps.size());

            const Arg& seg = view.positional[0];
            if (seg.kind == Arg::Kind::string) {
                step.spans.push_back(parse_program_timestamp(seg.text, lineno));
            } else {
                if (seg.call_name != "find_events" && seg.call_name != "find_event" &&
                    seg.call_name != "find")
                    fail(lineno, "unknown operation '" + seg.call_name + "'");
                if (seg.call_args.empty() || seg.call_args[0].kind != Arg::Kind::string)
                    fail(lineno, "find_events needs a quoted query");
                Step find;
                find.op = StepOp::find_event;
                find.line = lineno;
                find.query = seg.call_args[0].text;
                find.binding = "_find" + std::to_string(++implicit_find);
                if (seg.call_args.size() > 1 && seg.call_args[1].kind == Arg::Kind::string) {
                    try {
                        find.modality = parse_modality(seg.call_args[1].text);
                    } catch (const ParseError& e) {
                        fail(lineno, e.what());
                    }
                }
                step.ref = find.binding;
                step.modality = find.modality;
                program.steps.push_back(std::move(find));
            }
            program.steps.push_back(std::move(step));
        } else if (name == "synthesize") {
            Step step;
            step.op = StepOp::synthesize;
            step.line = lineno;
            step.instruction = instruction_from(view, 0, lineno);
            step.binding = "_answer";
            program.steps.push_back(std::move(step)); // evidence: all prior outputs
        } else if (name == "find_events" || name == "find_event" || name == "find") {
            fail(lineno, "find_events must appear nested inside describe(...)");
        } else {
            fail(lineno, "unknown operation '" + name + "'");
        }
    }
    return program;
}

// ── Logic grammar ───────────────────────────────────────────────────────────

// Restricted imperative subset: header, tool-call assignments, one optional
// loop (statement or comprehension), terminal answer call.
GroundingProgram parse_logic(const std::string& text) {
    GroundingProgram program;
    program.paradigm = Paradigm::logic;

    std::vector<std::pair<int, std::string>> lines; // (lineno, trimmed)
    {
        std::istringstream in(text);
        std::string raw_line;
        int lineno = 0;
        while (std::getline(in, raw_line)) {
            ++lineno;
            const std::string t = trim_copy(raw_line);
            if (!t.empty()) lines.emplace_back(lineno, t);
        }
    }

    std::size_t i = 0;
    // Skip prose (code fences, chatter) until the def header.
    while (i < lines.size() && lines[i].second.rfind("def ", 0) != 0) ++i;
    if (i >= lines.size()) throw ParseError("logic program: missing 'def execute_command' header");
    {
        const auto& [ln, header] = lines[i];
        if (header.rfind("def execute_command(", 0) != 0 || header.back() != ':')
            fail(ln, "header must be 'def execute_command(video, options):'");
        ++i;
    }

    std::set<std::string> defined;
    bool saw_loop = false;

    auto parse_tool_call = [&](const std::string& expr, int ln, const std::string& loop_var)
        -> Step {
        auto [name, args] = parse_call(expr, ln);
        CallView view = classify_args(args);

        if (name == "video.find" || name == "audio.find" || name == "find") {
            Step step;
            step.op = StepOp::find_event;
            step.line = ln;
            if (view.positional.empty() || view.positional[0].kind != Arg::Kind::string)
                fail(ln, "find needs a quoted query");
            step.query = view.positional[0].text;
            step.modality = name.rfind("audio", 0) == 0 ? Modality::audio
                                                        : modality_from(view, ln);
            return step;
        }
        if (name == "video.query" || name == "audio.query" || name == "query" ||
            name == "video.describe" || name == "describe") {
            Step step;
            step.op = StepOp::describe;
            step.line = ln;
            step.modality = name.rfind("audio", 0) == 0 ? Modality::audio
                                                        : modality_from(view, ln);
            step.instruction = instruction_from(view, 1, ln);
            if (view.positional.empty())
                fail(ln, "query needs a segment argument");
            const Arg& seg = view.positional[0];
            if (seg.kind == Arg::Kind::string) {
                step.spans.push_back(parse_program_timestamp(seg.text, ln));
            } else if (seg.kind == Arg::Kind::identifier) {
                if (!loop_var.empty() && seg.text == loop_var) {
                    step.fan_out = true; // resolved by the caller to the loop source
                } else if (defined.count(seg.text)) {
                    step.ref = seg.text;
                } else {
                    fail(ln, "reference to undefined name '" + seg.text + "'");
                }
            } else {
                fail(ln, "bad segment argument in query");
            }
            return step;
        }
        fail(ln, "unknown operation '" + name + "'");
    };

    for (; i < lines.size(); ++i) {
        const auto& [ln, line] = lines[i];

        if (line.rfind("return ", 0) == 0) {
            const std::string expr = trim_copy(line.substr(7));
            const std::size_t call_open = expr.find('(');
            if (call_open == std::string::npos || expr.back() != ')')
                fail(ln, "terminal must call answer_question(...)");
            const std::string name = trim_copy(expr.substr(0, call_open));
            if (name != "answer_question" && name != "answer" && name != "synthesize")
                fail(ln, "terminal must call answer_question(...)");
            Step step;
            step.op = StepOp::synthesize;
            step.line = ln;
            step.binding = "_answer";
            // arguments: identifiers, a {a, b} / {a...b} set, or a list
            const std::size_t open = expr.find('(');
            std::string inner = trim_copy(expr.substr(open + 1, expr.size() - open - 2));
            if (!inner.empty() &&
                (inner.front() == '{' || inner.front() == '[' || inner.front() == '(')) {
                inner = trim_copy(inner.substr(1, inner.size() - 2));
            }
            for (std::string piece : split_args(inner, ln)) {
                piece = trim_copy(piece);
                if (piece.empty()) continue;
                const std::size_t dots = piece.find("...");
                if (dots != std::string::npos) {
                    // "obs_1...obs_4": expand over the defined binding range
                    const std::string a = trim_copy(piece.substr(0, dots));
                    const std::string b = trim_copy(piece.substr(dots + 3));
                    auto split_suffix = [&](const std::string& s) -> std::pair<std::string, int> {
                        std::size_t d = s.size();
                        while (d > 0 && std::isdigit(static_cast<unsigned char>(s[d - 1]))) --d;
                        if (d == s.size()) fail(ln, "bad range endpoint '" + s + "'");
                        return {s.substr(0, d), std::stoi(s.substr(d))};
                    };
                    const auto [prefix_a, lo] = split_suffix(a);
                    const auto [prefix_b, hi] = split_suffix(b);
                    if (prefix_a != prefix_b || lo > hi)
                        fail(ln, "bad binding range '" + piece + "'");
                    for (int k = lo; k <= hi; ++k) {
                        const std::string nm = prefix_a + std::to_string(k);
                        if (!defined.count(nm))
                            fail(ln, "reference to undefined name '" + nm + "'");
                        step.evidence_refs.push_back(nm);
                    }
                } else {
                    if (!is_identifier(piece)) fail(ln, "bad evidence reference '" + piece + "'");
                    if (!defined.count(piece))
                        fail(ln, "reference to undefined name '" + piece + "'");
                    step.evidence_refs.push_back(piece);
                }
            }
            program.steps.push_back(std::move(step));
            continue;
        }

        if (line.rfind("for ", 0) == 0) {
            if (saw_loop) fail(ln, "only a single loop is allowed");
            saw_loop = true;
            // "for var in source:"
            const std::size_t in_at = line.find(" in ");
            if (in_at == std::string::npos || line.back() != ':')
                fail(ln, "malformed for loop");
            const std::string var = trim_copy(line.substr(4, in_at - 4));
            const std::string source = trim_copy(line.substr(in_at + 4, line.size() - in_at - 5));
            if (!is_identifier(var) || !is_identifier(source)) fail(ln, "malformed for loop");
            if (!defined.count(source))
                fail(ln, "reference to undefined name '" + source + "'");
            // exactly one body assignment
            if (i + 1 >= lines.size()) fail(ln, "empty loop body");
            const auto& [bln, body] = lines[i + 1];
            const std::size_t eq = body.find('=');
            if (eq == std::string::npos) fail(bln, "loop body must be an assignment");
            const std::string target = trim_copy(body.substr(0, eq));
            if (!is_identifier(target)) fail(bln, "bad assignment target '" + target + "'");
            Step step = parse_tool_call(trim_copy(body.substr(eq + 1)), bln, var);
            if (step.op != StepOp::describe || !step.fan_out)
                fail(bln, "loop body must query the loop variable");
            step.ref = source;
            step.binding = target;
            defined.insert(target);
            program.steps.push_back(std::move(step));
            ++i;
            continue;
        }

        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) fail(ln, "expected an assignment, loop, or return");
        const std::string target = trim_copy(line.substr(0, eq));
        if (!is_identifier(target)) fail(ln, "bad assignment target '" + target + "'");
        std::string expr = trim_copy(line.substr(eq + 1));

        if (!expr.empty() && expr.front() == '[') {
            // comprehension: [video.query(t, ...) for t in source]
            if (saw_loop) fail(ln, "only a single loop is allowed");
            saw_loop = true;
            if (expr.back() != ']') fail(ln, "unterminated comprehension");
            const std::string body = trim_copy(expr.substr(1, expr.size() - 2));
            const std::size_t for_at = body.rfind(" for ");
            if (for_at == std::string::npos) fail(ln, "malformed comprehension");
            const std::string call_part = trim_copy(body.substr(0, for_at));
            const std::string loop_part = trim_copy(body.substr(for_at + 5));
            const std::size_t in_at = loop_part.find(" in ");
            if (in_at == std::string::npos) fail(ln, "malformed comprehension");
            const std::string var = trim_copy(loop_part.substr(0, in_at));
            const std::string source = trim_copy(loop_part.substr(in_at + 4));
            if (!is_identifier(var) || !is_identifier(source)) fail(ln, "malformed comprehension");
            if (!defined.count(source))
                fail(ln, "reference to undefined name '" + source + "'");
            Step step = parse_tool_call(call_part, ln, var);
            if (step.op != StepOp::describe || !step.fan_out)
                fail(ln, "comprehension body must query the loop variable");
            step.ref = source;
            step.binding = target;
            defined.insert(target);
            program.steps.push_back(std::move(step));
            continue;
        }

        Step step = parse_tool_call(expr, ln, "");
        step.binding = target;
        defined.insert(target);
        program.steps.push_back(std::move(step));
    }
    return program;
}

void validate_program(GroundingProgram& program,
                      const std::optional<GroundingMode>& expected) {
    if (program.steps.empty()) throw ParseError("program has no steps");

    int synth_count = 0;
    int find_count = 0;
    for (const auto& s : program.steps) {
        if (s.op == StepOp::synthesize) ++synth_count;
        if (s.op == StepOp::find_event) ++find_count;
    }
    if (synth_count != 1)
        throw ParseError("program must have exactly one terminal synthesize/answer step");
    if (program.steps.back().op != StepOp::synthesize)
        throw ParseError("the synthesize/answer step must be last");

    // find-result references must point at earlier find bindings
    std::set<std::string> find_bindings;
    for (const auto& s : program.steps) {
        if (s.op == StepOp::describe && !s.ref.empty() && !find_bindings.count(s.ref))
            fail(s.line, "describe references '" + s.ref + "' before it is defined");
        if (s.op == StepOp::find_event) find_bindings.insert(s.binding);
    }

    program.grounding =
        find_count > 0 ? GroundingMode::imperative : GroundingMode::declarative;
    if (program.grounding == GroundingMode::declarative) {
        for (const auto& s : program.steps)
            if (s.op == StepOp::describe && s.spans.empty())
                fail(s.line, "declarative describe must carry explicit timestamps");
    }
    if (expected && *expected != program.grounding)
        throw ParseError(std::string("axis violation: requested ") + grounding_name(*expected) +
                         " grounding but the program is " + grounding_name(program.grounding));
}

} // namespace

GroundingProgram parse_program(const std::string& text, Paradigm paradigm,
                               std::optional<GroundingMode> expected) {
    GroundingProgram program =
        paradigm == Paradigm::narrative ? parse_narrative(text) : parse_logic(text);
    validate_program(program, expected);
    return program;
}

// ── Retrievers ──────────────────────────────────────────────────────────────

namespace {

class WindowedRetriever final : public Retriever {
public:
    WindowedRetriever(std::shared_ptr<JudgeGateway> judge, MediaStore& store, int window_s,
                      int stride_s)
        : judge_(std::move(judge)), store_(store), window_s_(std::max(1, window_s)),
          stride_s_(std::max(1, stride_s)) {}

    std::vector<TimeSpan> find(const std::string& query, Modality modality,
                               const std::string& qid,
                               std::vector<std::string>* warnings) override {
        const ManifestEntry& entry = store_.manifest().at(qid);
        if (!entry.path_for(modality))
            throw ModalityMissingError("no " + std::string(modality_name(modality)) +
                                           " track for question " + qid,
                                       qid);
        std::vector<TimeSpan> matches;
        for (int start = 0; start < entry.duration_s; start += stride_s_) {
            const int end = std::min(start + window_s_, entry.duration_s);
            try {
                const SegmentHandle seg =
                    store_.resolve_segment(qid, Citation{modality, TimeSpan{start, end}}, warnings);
                const std::string prompt = judge_->prompts().render(
                    "find_window",
                    {{"query", query}, {"window", format_timestamp(TimeSpan{start, end})}});
                const Verdict v =
                    parse_verdict(judge_->complete(prompt, {media_ref(seg)}), PromptStyle::simple);
                if (v.label) matches.push_back(TimeSpan{start, end});
            } catch (const Error& e) {
                if (warnings)
                    warnings->push_back("find window " + format_timestamp(TimeSpan{start, end}) +
                                        " skipped: " + e.what());
            }
            if (end >= entry.duration_s) break;
        }
        // merge adjacent or overlapping windows
        std::vector<TimeSpan> merged;
        for (const auto& m : matches) {
            if (!merged.empty() && m.start_s <= merged.back().end_s)
                merged.back().end_s = std::max(merged.back().end_s, m.end_s);
            else
                merged.push_back(m);
        }
        return merged;
    }

private:
    std::shared_ptr<JudgeGateway> judge_;
    MediaStore& store_;
    int window_s_, stride_s_;
};

class ScriptedRetriever final : public Retriever {
public:
    explicit ScriptedRetriever(const Json& script) {
        const Json table = script.value("retrieval", Json::object());
        for (const auto& [query, spans] : table.items()) {
            std::vector<TimeSpan> parsed;
            for (const auto& s : spans) {
                TimeSpan span = parse_timestamp(s.get<std::string>());
                if (span.is_point()) span.end_s = span.start_s + 1;
                parsed.push_back(span);
            }
            table_[query] = std::move(parsed);
        }
    }

    std::vector<TimeSpan> find(const std::string& query, Modality, const std::string&,
                               std::vector<std::string>*) override {
        auto it = table_.find(query);
        if (it == table_.end()) return {};
        return it->second;
    }

private:
    std::map<std::string, std::vector<TimeSpan>> table_;
};

} // namespace

std::shared_ptr<Retriever> make_windowed_retriever(std::shared_ptr<JudgeGateway> judge,
                                                   MediaStore& store, int window_s,
                                                   int stride_s) {
    return std::make_shared<WindowedRetriever>(std::move(judge), store, window_s, stride_s);
}

std::shared_ptr<Retriever> make_scripted_retriever(const std::string& mock_script_path) {
    return std::make_shared<ScriptedRetriever>(Json::parse(read_file(mock_script_path)));
}

// ── Executor ────────────────────────────────────────────────────────────────

ProgramExecutor::ProgramExecutor(MediaStore& store, std::shared_ptr<JudgeGateway> describe_judge,
                                 std::shared_ptr<JudgeGateway> synthesize_judge,
                                 std::shared_ptr<JudgeGateway> refine_judge,
                                 std::shared_ptr<Retriever> retriever, ExecutorConfig cfg)
    : store_(store), describe_judge_(std::move(describe_judge)),
      synthesize_judge_(std::move(synthesize_judge)), refine_judge_(std::move(refine_judge)),
      retriever_(std::move(retriever)), cfg_(cfg) {}

namespace {

std::string spans_text(const std::vector<TimeSpan>& spans) {
    std::string out;
    for (const auto& s : spans) {
        if (!out.empty()) out += ", ";
        out += format_timestamp(s);
    }
    return out;
}

std::string strip_evidence_tags(const std::string& text, std::vector<int>* indices) {
    std::string out;
    std::size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '[' && i + 1 < text.size() &&
            (text[i + 1] == 'E' || text[i + 1] == 'e')) {
            std::size_t j = i + 2;
            std::string digits;
            while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j])))
                digits.push_back(text[j++]);
            if (!digits.empty() && j < text.size() && text[j] == ']') {
                if (indices) indices->push_back(std::stoi(digits));
                i = j + 1;
                continue;
            }
        }
        out.push_back(text[i]);
        ++i;
    }
    // tidy doubled spaces left by removed tags
    std::string tidy;
    for (char c : out) {
        if (c == ' ' && !tidy.empty() && tidy.back() == ' ') continue;
        tidy.push_back(c);
    }
    while (!tidy.empty() && tidy.back() == ' ') tidy.pop_back();
    // no space before terminal punctuation
    std::string final_text;
    for (std::size_t k = 0; k < tidy.size(); ++k) {
        if (tidy[k] == ' ' && k + 1 < tidy.size() &&
            (tidy[k + 1] == '.' || tidy[k + 1] == ',' || tidy[k + 1] == '!' ||
             tidy[k + 1] == '?'))
            continue;
        final_text.push_back(tidy[k]);
    }
    return final_text;
}

void append_unique(std::vector<Citation>& into, const std::vector<Citation>& from) {
    for (const auto& c : from)
        if (std::find(into.begin(), into.end(), c) == into.end()) into.push_back(c);
}

// Insert a citation group before the sentence's terminal punctuation.
std::string attach_citations(const std::string& sentence, const std::vector<Citation>& cs) {
    if (cs.empty()) return sentence;
    const std::string group = format_citation_group(cs);
    std::string s = sentence;
    if (!s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == '?')) {
        const char tail = s.back();
        s.pop_back();
        return s + " " + group + tail;
    }
    return s + " " + group + ".";
}

} // namespace

std::pair<Trace, Response> ProgramExecutor::execute(const GroundingProgram& p,
                                                    const EvalTask& task) {
    Trace trace;
    trace.question_id = task.question_id;
    trace.paradigm = p.paradigm;
    trace.grounding = p.grounding;

    std::map<std::string, std::vector<TimeSpan>> find_results;
    std::map<std::string, std::vector<EvidenceItem>> evidence_map;
    std::vector<std::string> evidence_order; // binding order for "all prior"

    auto describe_segments = [&](const std::vector<SegmentHandle>& segments,
                                 const std::string& instruction, StepRecord& rec)
        -> EvidenceItem {
        std::string context;
        std::vector<MediaRef> media;
        for (const auto& seg : segments) {
            if (!context.empty()) context += "\n";
            context += format_citation(seg.citation);
            media.push_back(media_ref(seg));
        }
        auto run = [&](const std::string& extra) {
            const std::string prompt = describe_judge_->prompts().render(
                "describe", {{"instruction", instruction + extra}, {"context", context}});
            return describe_judge_->complete(prompt, media);
        };

        EvidenceItem item;
        item.text = run("");
        for (const auto& seg : segments) item.citations.push_back(seg.citation);

        if (cfg_.refinement) {
            rec.refinement.checked = true;
            auto entails = [&](const std::string& text) {
                return refine_judge_->judge_entailment(text, segments).label;
            };
            try {
                if (entails(item.text)) {
                    rec.refinement.passed = true;
                } else {
                    rec.refinement.retried = true;
                    item.text =
                        run(" Describe only what is directly observable in the provided segments.");
                    rec.refinement.passed = entails(item.text);
                }
            } catch (const Error& e) {
                rec.refinement.passed = false;
                rec.error = "refinement check failed: " + std::string(e.what());
            }
        }
        rec.raw_output = item.text;
        rec.segments_used = item.citations;
        return item;
    };

    std::vector<std::string> warnings;

    for (const auto& step : p.steps) {
        if (step.op == StepOp::find_event) {
            StepRecord rec;
            rec.op = "find_event";
            rec.binding = step.binding;
            rec.inputs = "query=" + step.query + " modality=" + modality_name(step.modality);
            try {
                const auto spans =
                    retriever_->find(step.query, step.modality, task.question_id, &warnings);
                find_results[step.binding] = spans;
                rec.raw_output = "[" + spans_text(spans) + "]";
                for (const auto& s : spans)
                    rec.segments_used.push_back(Citation{step.modality, s});
            } catch (const Error& e) {
                rec.error = e.what();
                find_results[step.binding] = {};
            }
            trace.steps.push_back(std::move(rec));
            continue;
        }

        if (step.op == StepOp::describe) {
            std::vector<TimeSpan> targets = step.spans;
            if (!step.ref.empty()) {
                auto it = find_results.find(step.ref);
                targets = it == find_results.end() ? std::vector<TimeSpan>{} : it->second;
            }

            if (targets.empty()) {
                StepRecord rec;
                rec.op = "describe";
                rec.binding = step.binding;
                rec.inputs = step.ref.empty() ? "segments=[]" : "ref=" + step.ref + " (empty)";
                rec.raw_output = "";
                warnings.push_back("describe over empty segment set at line " +
                                   std::to_string(step.line));
                trace.steps.push_back(std::move(rec));
                evidence_map[step.binding] = {};
                evidence_order.push_back(step.binding);
                continue;
            }

            auto resolve_all = [&](const std::vector<TimeSpan>& spans,
                                   StepRecord& rec) -> std::vector<SegmentHandle> {
                std::vector<SegmentHandle> segments;
                for (const auto& span : spans) {
                    try {
                        segments.push_back(store_.resolve_segment(
                            task.question_id, Citation{step.modality, span}, &warnings));
                    } catch (const Error& e) {
                        rec.error = e.what();
                    }
                }
                return segments;
            };

            if (step.fan_out) {
                // One verification/describe call per found span.
                std::vector<StepRecord> recs(targets.size());
                std::vector<EvidenceItem> items(targets.size());
                parallel_indexed(targets.size(), cfg_.concurrency, [&](std::size_t k) {
                    StepRecord& rec = recs[k];
                    rec.op = "describe";
                    rec.binding = step.binding + "[" + std::to_string(k) + "]";
                    rec.inputs = "segment=" + format_timestamp(targets[k]) +
                                 " instruction=" + step.instruction;
                    const auto segments = resolve_all({targets[k]}, rec);
                    if (segments.empty()) return;
                    try {
                        items[k] = describe_segments(segments, step.instruction, rec);
                    } catch (const Error& e) {
                        rec.error = e.what();
                    }
                });
                std::vector<EvidenceItem>& bound = evidence_map[step.binding];
                for (std::size_t k = 0; k < targets.size(); ++k) {
                    trace.steps.push_back(std::move(recs[k]));
                    if (!items[k].text.empty()) bound.push_back(std::move(items[k]));
                }
                evidence_order.push_back(step.binding);
                continue;
            }

            StepRecord rec;
            rec.op = "describe";
            rec.binding = step.binding;
            rec.inputs = "segments=[" + spans_text(targets) + "] instruction=" + step.instruction;
            const auto segments = resolve_all(targets, rec);
            if (!segments.empty()) {
                try {
                    const EvidenceItem item = describe_segments(segments, step.instruction, rec);
                    evidence_map[step.binding].push_back(item);
                } catch (const Error& e) {
                    rec.error = e.what();
                }
            }
            evidence_order.push_back(step.binding);
            trace.steps.push_back(std::move(rec));
            continue;
        }

        // synthesize: terminal, text-only, always attempted
        StepRecord rec;
        rec.op = "synthesize";
        rec.binding = step.binding;

        std::vector<EvidenceItem> evidence;
        const std::vector<std::string>& refs =
            step.evidence_refs.empty() ? evidence_order : step.evidence_refs;
        for (const auto& name : refs) {
            auto it = evidence_map.find(name);
            if (it == evidence_map.end()) continue;
            evidence.insert(evidence.end(), it->second.begin(), it->second.end());
        }

        Response response;
        response.question_id = task.question_id;

        if (evidence.empty()) {
            warnings.push_back("synthesize with no evidence; emitting degenerate response");
            response.raw = "Reasoning: Insufficient evidence was gathered to answer.";
            response = parse_response(response.raw, task.question_id);
            rec.raw_output = response.raw;
            trace.steps.push_back(std::move(rec));
            trace.steps.back().error = "no evidence";
            Response final = response;
            final.warnings = warnings;
            return {trace, final};
        }

        std::string listing;
        for (std::size_t k = 0; k < evidence.size(); ++k) {
            listing += "[E" + std::to_string(k + 1) + "] " + evidence[k].text;
            if (!evidence[k].citations.empty())
                listing += " " + format_citation_group(evidence[k].citations);
            listing += "\n";
        }
        const std::string prompt = synthesize_judge_->prompts().render(
            "synthesize", {{"instruction", step.instruction},
                           {"question", task.question},
                           {"options", render_options(task)},
                           {"evidence", listing}});
        std::string raw;
        try {
            raw = synthesize_judge_->complete(prompt); // no media, enforced by signature
        } catch (const Error& e) {
            rec.error = e.what();
            warnings.push_back("synthesize call failed: " + std::string(e.what()));
            response.raw = "Reasoning: Insufficient evidence was gathered to answer.";
            response = parse_response(response.raw, task.question_id);
            rec.raw_output = response.raw;
            trace.steps.push_back(std::move(rec));
            Response final = response;
            final.warnings = warnings;
            return {trace, final};
        }
        rec.raw_output = raw;

        // Map [E#] tags back to citations and rebuild the cited response.
        const Response tagged = parse_response(raw, task.question_id);
        std::vector<Citation> all_citations;
        for (const auto& item : evidence) append_unique(all_citations, item.citations);

        std::string reasoning;
        for (const auto& s : tagged.sentences) {
            std::vector<int> indices;
            const std::string stripped = strip_evidence_tags(s.raw_text, &indices);
            std::vector<Citation> cs;
            for (int idx : indices)
                if (idx >= 1 && idx <= static_cast<int>(evidence.size()))
                    append_unique(cs, evidence[idx - 1].citations);
            if (indices.empty()) cs = all_citations; // untagged: union fallback
            if (!reasoning.empty()) reasoning += " ";
            // strip any citations the synthesizer invented, then attach ours
            const std::string bare = extract_citations(stripped).clean_text;
            reasoning += attach_citations(bare, cs);
        }
        std::string raw_final = "Reasoning: " + reasoning;
        if (tagged.answer_letter) raw_final += "\nAnswer: " + std::string(1, *tagged.answer_letter);

        response = parse_response(raw_final, task.question_id);
        for (const auto& s : response.sentences) rec.segments_used.insert(
            rec.segments_used.end(), s.citations.begin(), s.citations.end());
        trace.steps.push_back(std::move(rec));

        Response final = response;
        final.warnings = warnings;
        return {trace, final};
    }

    // No synthesize step: validated programs never reach here.
    throw Error("program ended without a synthesize step");
}

// ── Planning ────────────────────────────────────────────────────────────────

GroundingProgram plan(const EvalTask& task, JudgeGateway& planner, MediaStore& store,
                      Paradigm paradigm, GroundingMode grounding, std::string* program_text) {
    const std::string template_name =
        std::string("plan_") + paradigm_name(paradigm) + "_" + grounding_name(grounding);
    const std::string prompt = planner.prompts().render(
        template_name, {{"question", task.question}, {"options", render_options(task)}});

    std::vector<MediaRef> media;
    const ManifestEntry& entry = store.manifest().at(task.question_id);
    if (entry.video_path)
        media.push_back(MediaRef{*entry.video_path, sha256_file_hex(*entry.video_path),
                                 "(video track)"});
    if (entry.audio_path)
        media.push_back(MediaRef{*entry.audio_path, sha256_file_hex(*entry.audio_path),
                                 "(audio track)"});

    const std::string first = planner.complete(prompt, media);
    try {
        GroundingProgram p = parse_program(first, paradigm, grounding);
        if (program_text) *program_text = first;
        return p;
    } catch (const ParseError& e) {
        const std::string reprompt = prompt + "\n\nThe previous program failed to parse: " +
                                     e.what() + "\nEmit a corrected program only.";
        const std::string second = planner.complete(reprompt, media);
        GroundingProgram p = parse_program(second, paradigm, grounding); // throws on failure
        if (program_text) *program_text = second;
        return p;
    }
}

// ── Trace serialization ─────────────────────────────────────────────────────

Json trace_to_json(const Trace& t) {
    Json j;
    j["question_id"] = t.question_id;
    j["paradigm"] = paradigm_name(t.paradigm);
    j["grounding"] = grounding_name(t.grounding);
    Json steps = Json::array();
    for (const auto& s : t.steps) {
        Json sj;
        sj["op"] = s.op;
        sj["binding"] = s.binding;
        sj["inputs"] = s.inputs;
        sj["raw_output"] = s.raw_output;
        Json segs = Json::array();
        for (const auto& c : s.segments_used) segs.push_back(format_citation(c));
        sj["segments_used"] = std::move(segs);
        sj["refinement"] = Json{{"checked", s.refinement.checked},
                                {"passed", s.refinement.passed},
                                {"retried", s.refinement.retried}};
        if (!s.error.empty()) sj["error"] = s.error;
        steps.push_back(std::move(sj));
    }
    j["steps"] = std::move(steps);
    return j;
}

} // namespace murgat::prog
