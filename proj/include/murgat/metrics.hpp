#pragma once

#include "murgat/citation.hpp"
#include "murgat/fraction.hpp"

#include <map>
#include <optional>
#include <vector>

namespace murgat {

// ── Pipeline verdict carriers (produced by eval_pipeline, consumed here) ────

struct SentenceMark {
    bool verifiable = false;
    bool cited = false;
};

// Index-aligned with Response.sentences.
using VerifiabilityMarks = std::vector<SentenceMark>;

struct CitationJudgment {
    Citation citation;
    bool relevant = false; // precision side; meaningful only when supported
};

struct FactJudgment {
    bool supported = false; // recall side: combined citations entail the fact
    std::vector<CitationJudgment> citations;
};

// Index-aligned with the fact list of the response.
using AttributionJudgments = std::vector<FactJudgment>;

// ── Metric bundle ───────────────────────────────────────────────────────────

struct StratumPrecision {
    OptFraction precision; // undefined when the stratum has no citations
    int relevant = 0;
    int total = 0;
};

struct MetricBundle {
    OptFraction coverage;            // |R_vc| / |R_v|; undefined when |R_v| = 0
    OptFraction precision;           // relevant citations / all citations
    OptFraction recall;              // supported facts / all facts
    OptFraction f1;                  // harmonic mean; 0 iff P*R = 0
    OptFraction murgat_score;        // coverage x f1; see murgat_score() rules
    std::map<Modality, StratumPrecision> per_modality_precision;
    std::optional<bool> answer_correct;
    OptFraction over_citation_rate;  // cited fraction of not-verifiable sentences
};

struct AttributionScores {
    OptFraction precision, recall, f1;
};

// ── Per-response metric math ────────────────────────────────────────────────

OptFraction coverage(const VerifiabilityMarks& marks);
AttributionScores attribution_scores(const AttributionJudgments& judgments);

// coverage x f1 when both defined; 0 when coverage is defined but attribution
// is not (uncited responses score zero); undefined when coverage is undefined.
OptFraction murgat_score(const OptFraction& coverage, const OptFraction& f1);

std::map<Modality, StratumPrecision>
per_modality_precision(const AttributionJudgments& judgments);

// True iff pred is present and equals gold after uppercasing. gold must be A-E.
bool answer_accuracy(std::optional<char> pred, char gold);

OptFraction over_citation_rate(const VerifiabilityMarks& marks);

MetricBundle compute_bundle(const VerifiabilityMarks& marks,
                            const AttributionJudgments& judgments,
                            std::optional<bool> answer_correct);

// ── Dataset aggregation (macro means over defined per-response values) ──────

struct MeanStat {
    std::optional<double> mean; // undefined when no response defines the metric
    int n = 0;                  // size of the defined subset
};

struct DatasetReport {
    int responses = 0;
    int skipped = 0;
    int undefined_coverage = 0;
    int undefined_attribution = 0;
    MeanStat coverage, precision, recall, f1, murgat, over_citation;
    std::map<Modality, MeanStat> per_modality_precision;
    MeanStat accuracy; // over responses with a known gold answer
};

DatasetReport aggregate(const std::vector<MetricBundle>& bundles, int skipped);

} // namespace murgat
