#pragma once

#include "murgat/citation.hpp"
#include "murgat/judge.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace murgat {

// ── Gold labels ─────────────────────────────────────────────────────────────

enum class UnitKind { sentence, fact, response };
UnitKind parse_unit_kind(const std::string& name);
const char* unit_kind_name(UnitKind k);

struct GoldItem {
    std::string unit_id;
    UnitKind kind = UnitKind::sentence;
    std::optional<bool> flag;            // boolean-labeled units
    std::optional<double> score;         // score-labeled units
    std::vector<std::string> fact_texts; // reference decompositions
    std::string annotator_id;
};

struct GoldLabelSet {
    std::vector<GoldItem> items; // unit_ids unique

    const GoldItem* find(const std::string& unit_id) const;
};

// JSONL: {"unit_id", "unit_kind", "gold", "annotator_id"} where gold is a
// boolean, a number, or a list of fact strings.
GoldLabelSet load_gold_labels(const std::string& path);

// ── Component statistics ────────────────────────────────────────────────────

// (TPR + TNR) / 2.  Requires equal lengths and both classes in golds.
double balanced_accuracy(const std::vector<bool>& preds, const std::vector<bool>& golds);

// Unigram-overlap F1 over lowercased, punctuation-stripped, whitespace-split
// tokens with clipped multiset counts.  Two empty strings score 1, one empty
// scores 0.
double rouge1_f1(const std::string& a, const std::string& b);

struct MatchScores {
    double precision = 0, recall = 0, f1 = 0;
};

// Per-item max Rouge-1 F1, then mean: precision over generated facts against
// references, recall the other way around.  Empty/empty scores 1, one side
// empty scores 0.
MatchScores greedy_match_f1(const std::vector<std::string>& generated,
                            const std::vector<std::string>& reference);

// Fraction of facts whose citation set equals (as a set) their parent
// sentence's citation set; no missing and no additional citations.
double citation_propagation_accuracy(const std::vector<AtomicFact>& facts,
                                     const std::vector<Sentence>& sentences);

struct CorrelationResult {
    std::optional<double> pearson_r;    // undefined on constant input
    std::optional<double> spearman_rho; // average ranks for ties
    std::optional<double> kendall_tau;  // tau-b, tie-corrected
    int n = 0;
};

CorrelationResult correlate(const std::vector<double>& x, const std::vector<double>& y);

// ── LLM-judge baseline scorers ──────────────────────────────────────────────

// Single 1-5 response quality score; lenient integer extraction from the
// judge output.  Throws ParseError when no score digit is present.
int holistic_judge(const Response& response, const std::string& question, JudgeGateway& judge);

struct DisentangledScores {
    std::optional<double> coverage, attr_recall, attr_precision;
};

enum class Granularity { response, sentence };

// One coverage/recall/precision triple per call; sentence granularity runs
// per sentence and averages.  Zero-sentence responses yield undefined scores.
DisentangledScores disentangled_judge(const Response& response, const std::string& question,
                                      JudgeGateway& judge, Granularity granularity);

// ── Annotation merging ──────────────────────────────────────────────────────

// Per-unit boolean OR; units present in only one set keep their label.
GoldLabelSet merge_annotations_union(const GoldLabelSet& a, const GoldLabelSet& b);

// Fraction of shared unit_ids with equal boolean labels.
double agreement(const GoldLabelSet& a, const GoldLabelSet& b);

} // namespace murgat
