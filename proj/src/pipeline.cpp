#include "murgat/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

using Json = nlohmann::json;

namespace murgat {

void parallel_indexed(std::size_t n, int width, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    const int workers = std::max(1, std::min<int>(width, static_cast<int>(n)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lk(err_mu);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

namespace {

// Warnings from worker threads, merged in index order afterwards.
struct WarningSink {
    std::vector<std::vector<std::string>> per_index;
    explicit WarningSink(std::size_t n) : per_index(n) {}
    void drain_to(std::vector<std::string>* out) const {
        if (!out) return;
        for (const auto& ws : per_index) out->insert(out->end(), ws.begin(), ws.end());
    }
};

} // namespace

VerifiabilityMarks identify_verifiable(const Response& r, Judges& judges,
                                       const PipelineFlags& flags,
                                       std::vector<std::string>* warnings) {
    VerifiabilityMarks marks(r.sentences.size());
    WarningSink sink(r.sentences.size());

    parallel_indexed(r.sentences.size(), flags.concurrency, [&](std::size_t i) {
        const Sentence& s = r.sentences[i];
        marks[i].cited = !s.citations.empty();
        if (s.text.empty()) {
            sink.per_index[i].push_back("sentence " + std::to_string(s.index) +
                                        " empty after citation stripping; not verifiable");
            return;
        }
        try {
            if (flags.atomic_level_verifiability) {
                // Appendix-style fine granularity: a sentence is verifiable
                // when any of its atomic facts is.
                auto facts = judges.decomposition->decompose_sentence(s, &sink.per_index[i]);
                for (const auto& f : facts) {
                    Sentence unit;
                    unit.index = s.index;
                    unit.text = f.text;
                    unit.raw_text = f.text;
                    if (judges.verifiability->judge_verifiable(unit).label) {
                        marks[i].verifiable = true;
                        break;
                    }
                }
            } else {
                marks[i].verifiable = judges.verifiability->judge_verifiable(s).label;
            }
        } catch (const Error& e) {
            marks[i].verifiable = false;
            sink.per_index[i].push_back("verifiability judge failed on sentence " +
                                        std::to_string(s.index) + ": " + e.what());
        }
    });

    sink.drain_to(warnings);
    return marks;
}

std::vector<AtomicFact> decompose_response(const Response& r, const VerifiabilityMarks& marks,
                                           Judges& judges, const PipelineFlags& flags,
                                           std::vector<std::string>* warnings) {
    std::vector<AtomicFact> facts;
    if (r.sentences.empty()) return facts;

    const std::string block = reasoning_block(r.raw);
    const std::string rewritten = judges.decomposition->decontextualize(block, warnings);

    std::vector<Sentence> sentences = segment_sentences(rewritten);
    if (sentences.size() != r.sentences.size()) {
        if (warnings)
            warnings->push_back("decontextualized text re-segmented to " +
                                std::to_string(sentences.size()) + " sentences (expected " +
                                std::to_string(r.sentences.size()) + "); using original text");
        sentences = r.sentences;
    }

    std::vector<std::size_t> targets;
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        if (i < marks.size() && marks[i].verifiable && marks[i].cited) {
            sentences[i].index = static_cast<int>(i); // parent index in original order
            targets.push_back(i);
        }
    }

    std::vector<std::vector<AtomicFact>> per_sentence(targets.size());
    WarningSink sink(targets.size());
    parallel_indexed(targets.size(), flags.concurrency, [&](std::size_t t) {
        per_sentence[t] = judges.decomposition->decompose_sentence(sentences[targets[t]],
                                                                   &sink.per_index[t]);
    });
    sink.drain_to(warnings);

    for (auto& group : per_sentence)
        facts.insert(facts.end(), group.begin(), group.end());
    return facts;
}

AttributionJudgments assess_attribution(const std::string& question_id,
                                        const std::vector<AtomicFact>& facts, MediaStore& store,
                                        Judges& judges, const PipelineFlags& flags,
                                        std::vector<std::string>* warnings) {
    AttributionJudgments judgments(facts.size());
    WarningSink sink(facts.size());

    parallel_indexed(facts.size(), flags.concurrency, [&](std::size_t fi) {
        const AtomicFact& fact = facts[fi];
        FactJudgment& j = judgments[fi];
        auto& warn = sink.per_index[fi];

        j.citations.reserve(fact.citations.size());
        std::vector<SegmentHandle> present;
        std::vector<std::size_t> present_at; // index into j.citations
        for (const auto& c : fact.citations) {
            j.citations.push_back(CitationJudgment{c, false});
            try {
                present.push_back(store.resolve_segment(question_id, c, &warn));
                present_at.push_back(j.citations.size() - 1);
            } catch (const ModalityMissingError& e) {
                warn.push_back("citation " + format_citation(c) + ": " + e.what());
            }
        }

        if (present.empty()) return; // nothing resolvable: unsupported, no judge call

        try {
            j.supported = judges.entailment->judge_entailment(fact.text, present).label;
        } catch (const Error& e) {
            j.supported = false;
            warn.push_back("entailment judge failed on fact: " + std::string(e.what()));
            return;
        }
        if (!j.supported) return;

        if (present.size() == 1) {
            // The combined call already was the singleton call.
            j.citations[present_at[0]].relevant = true;
            return;
        }
        for (std::size_t k = 0; k < present.size(); ++k) {
            try {
                j.citations[present_at[k]].relevant =
                    judges.entailment->judge_entailment(fact.text, {present[k]}).label;
            } catch (const Error& e) {
                warn.push_back("precision judge failed on citation " +
                               format_citation(present[k].citation) + ": " + e.what());
            }
        }
    });

    sink.drain_to(warnings);
    return judgments;
}

EvalRecord evaluate_response(const Response& r, MediaStore& store, Judges& judges,
                             const PipelineFlags& flags, std::optional<char> gold_answer) {
    if (!store.manifest().contains(r.question_id))
        throw Error("question id not in manifest: " + r.question_id);

    EvalRecord rec;
    rec.question_id = r.question_id;
    rec.sentences = r.sentences;
    rec.warnings = r.warnings;

    rec.marks = identify_verifiable(r, judges, flags, &rec.warnings);
    rec.facts = decompose_response(r, rec.marks, judges, flags, &rec.warnings);
    rec.judgments =
        assess_attribution(r.question_id, rec.facts, store, judges, flags, &rec.warnings);

    std::optional<bool> answer_correct;
    if (gold_answer) answer_correct = answer_accuracy(r.answer_letter, *gold_answer);
    rec.metrics = compute_bundle(rec.marks, rec.judgments, answer_correct);
    return rec;
}

// ── serialization ───────────────────────────────────────────────────────────

namespace {

Json opt_fraction_json(const OptFraction& f) {
    if (!f) return nullptr;
    return f->value();
}

Json citations_json(const std::vector<Citation>& cs) {
    Json arr = Json::array();
    for (const auto& c : cs) arr.push_back(format_citation(c));
    return arr;
}

std::vector<Citation> citations_from_json(const Json& arr) {
    std::vector<Citation> out;
    for (const auto& s : arr) {
        auto group = parse_citation_group(s.get<std::string>());
        out.insert(out.end(), group.begin(), group.end());
    }
    return out;
}

} // namespace

Json metric_bundle_to_json(const MetricBundle& b) {
    Json j;
    j["coverage"] = opt_fraction_json(b.coverage);
    j["precision"] = opt_fraction_json(b.precision);
    j["recall"] = opt_fraction_json(b.recall);
    j["f1"] = opt_fraction_json(b.f1);
    j["murgat_score"] = opt_fraction_json(b.murgat_score);
    Json strata;
    for (const auto& [m, s] : b.per_modality_precision) {
        Json entry;
        entry["precision"] = opt_fraction_json(s.precision);
        entry["relevant"] = s.relevant;
        entry["total"] = s.total;
        strata[modality_name(m)] = std::move(entry);
    }
    j["per_modality_precision"] = std::move(strata);
    j["answer_correct"] = b.answer_correct ? Json(*b.answer_correct) : Json(nullptr);
    j["over_citation_rate"] = opt_fraction_json(b.over_citation_rate);
    return j;
}

Json eval_record_to_json(const EvalRecord& rec) {
    Json j;
    j["question_id"] = rec.question_id;

    Json sentences = Json::array();
    for (const auto& s : rec.sentences) {
        Json sj;
        sj["index"] = s.index;
        sj["text"] = s.text;
        sj["raw_text"] = s.raw_text;
        sj["citations"] = citations_json(s.citations);
        sentences.push_back(std::move(sj));
    }
    j["sentences"] = std::move(sentences);

    Json marks = Json::array();
    for (const auto& m : rec.marks)
        marks.push_back(Json{{"verifiable", m.verifiable}, {"cited", m.cited}});
    j["marks"] = std::move(marks);

    Json facts = Json::array();
    for (const auto& f : rec.facts) {
        Json fj;
        fj["text"] = f.text;
        fj["parent_index"] = f.parent_index;
        fj["citations"] = citations_json(f.citations);
        facts.push_back(std::move(fj));
    }
    j["facts"] = std::move(facts);

    Json judgments = Json::array();
    for (const auto& fj : rec.judgments) {
        Json jj;
        jj["supported"] = fj.supported;
        Json cs = Json::array();
        for (const auto& c : fj.citations)
            cs.push_back(Json{{"citation", format_citation(c.citation)},
                              {"relevant", c.relevant}});
        jj["citations"] = std::move(cs);
        judgments.push_back(std::move(jj));
    }
    j["judgments"] = std::move(judgments);

    j["metrics"] = metric_bundle_to_json(rec.metrics);
    j["warnings"] = rec.warnings;
    return j;
}

EvalRecord eval_record_from_json(const Json& j) {
    EvalRecord rec;
    rec.question_id = j.at("question_id").get<std::string>();
    for (const auto& sj : j.value("sentences", Json::array())) {
        Sentence s;
        s.index = sj.at("index").get<int>();
        s.text = sj.at("text").get<std::string>();
        s.raw_text = sj.value("raw_text", s.text);
        s.citations = citations_from_json(sj.value("citations", Json::array()));
        rec.sentences.push_back(std::move(s));
    }
    for (const auto& mj : j.value("marks", Json::array()))
        rec.marks.push_back(SentenceMark{mj.at("verifiable").get<bool>(),
                                         mj.at("cited").get<bool>()});
    for (const auto& fj : j.value("facts", Json::array())) {
        AtomicFact f;
        f.text = fj.at("text").get<std::string>();
        f.parent_index = fj.at("parent_index").get<int>();
        f.citations = citations_from_json(fj.value("citations", Json::array()));
        rec.facts.push_back(std::move(f));
    }
    for (const auto& jj : j.value("judgments", Json::array())) {
        FactJudgment fj;
        fj.supported = jj.at("supported").get<bool>();
        for (const auto& cj : jj.value("citations", Json::array())) {
            auto parsed = parse_citation_group(cj.at("citation").get<std::string>());
            fj.citations.push_back(CitationJudgment{parsed.at(0), cj.at("relevant").get<bool>()});
        }
        rec.judgments.push_back(std::move(fj));
    }

    std::optional<bool> answer_correct;
    if (j.contains("metrics") && j["metrics"].contains("answer_correct") &&
        !j["metrics"]["answer_correct"].is_null())
        answer_correct = j["metrics"]["answer_correct"].get<bool>();
    rec.metrics = compute_bundle(rec.marks, rec.judgments, answer_correct);
    for (const auto& w : j.value("warnings", Json::array()))
        rec.warnings.push_back(w.get<std::string>());
    return rec;
}

} // namespace murgat
