#include "murgat/metrics.hpp"

#include <cctype>

namespace murgat {

OptFraction coverage(const VerifiabilityMarks& marks) {
    std::int64_t verifiable = 0, cited_verifiable = 0;
    for (const auto& m : marks) {
        if (!m.verifiable) continue;
        ++verifiable;
        if (m.cited) ++cited_verifiable;
    }
    if (verifiable == 0) return std::nullopt;
    return Fraction(cited_verifiable, verifiable);
}

AttributionScores attribution_scores(const AttributionJudgments& judgments) {
    AttributionScores out;
    if (judgments.empty()) return out; // all undefined

    std::int64_t supported = 0, relevant = 0, total_citations = 0;
    for (const auto& j : judgments) {
        if (j.supported) ++supported;
        for (const auto& c : j.citations) {
            ++total_citations;
            if (c.relevant) ++relevant;
        }
    }
    out.recall = Fraction(supported, static_cast<std::int64_t>(judgments.size()));
    if (total_citations == 0) return out; // precision and f1 stay undefined
    out.precision = Fraction(relevant, total_citations);

    const Fraction p = *out.precision, r = *out.recall;
    if (p.is_zero() || r.is_zero()) out.f1 = Fraction(0, 1);
    else out.f1 = Fraction(2, 1) * p * r / (p + r);
    return out;
}

OptFraction murgat_score(const OptFraction& coverage, const OptFraction& f1) {
    if (!coverage) return std::nullopt;
    if (!f1) return Fraction(0, 1);
    return *coverage * *f1;
}

std::map<Modality, StratumPrecision>
per_modality_precision(const AttributionJudgments& judgments) {
    std::map<Modality, StratumPrecision> strata;
    strata[Modality::visual] = StratumPrecision{};
    strata[Modality::audio] = StratumPrecision{};
    for (const auto& j : judgments) {
        for (const auto& c : j.citations) {
            auto& s = strata[c.citation.modality];
            ++s.total;
            if (c.relevant) ++s.relevant;
        }
    }
    for (auto& [m, s] : strata)
        if (s.total > 0) s.precision = Fraction(s.relevant, s.total);
    return strata;
}

bool answer_accuracy(std::optional<char> pred, char gold) {
    const char g = static_cast<char>(std::toupper(static_cast<unsigned char>(gold)));
    if (g < 'A' || g > 'E') throw ValidationError("gold answer must be A-E");
    if (!pred) return false;
    return static_cast<char>(std::toupper(static_cast<unsigned char>(*pred))) == g;
}

OptFraction over_citation_rate(const VerifiabilityMarks& marks) {
    std::int64_t not_verifiable = 0, cited = 0;
    for (const auto& m : marks) {
        if (m.verifiable) continue;
        ++not_verifiable;
        if (m.cited) ++cited;
    }
    if (not_verifiable == 0) return std::nullopt;
    return Fraction(cited, not_verifiable);
}

MetricBundle compute_bundle(const VerifiabilityMarks& marks,
                            const AttributionJudgments& judgments,
                            std::optional<bool> answer_correct) {
    MetricBundle b;
    b.coverage = coverage(marks);
    const AttributionScores a = attribution_scores(judgments);
    b.precision = a.precision;
    b.recall = a.recall;
    b.f1 = a.f1;
    b.murgat_score = murgat_score(b.coverage, b.f1);
    b.per_modality_precision = per_modality_precision(judgments);
    b.answer_correct = answer_correct;
    b.over_citation_rate = over_citation_rate(marks);
    return b;
}

namespace {

struct MeanAccum {
    double sum = 0;
    int n = 0;
    void add(const OptFraction& f) {
        if (!f) return;
        sum += f->value();
        ++n;
    }
    MeanStat stat() const {
        MeanStat s;
        s.n = n;
        if (n > 0) s.mean = sum / n;
        return s;
    }
};

} // namespace

DatasetReport aggregate(const std::vector<MetricBundle>& bundles, int skipped) {
    DatasetReport rep;
    rep.responses = static_cast<int>(bundles.size());
    rep.skipped = skipped;

    MeanAccum cov, prec, rec, f1, murgat, over, acc;
    std::map<Modality, MeanAccum> strata;
    strata[Modality::visual] = MeanAccum{};
    strata[Modality::audio] = MeanAccum{};

    for (const auto& b : bundles) {
        if (!b.coverage) ++rep.undefined_coverage;
        if (!b.f1) ++rep.undefined_attribution;
        cov.add(b.coverage);
        prec.add(b.precision);
        rec.add(b.recall);
        f1.add(b.f1);
        murgat.add(b.murgat_score);
        over.add(b.over_citation_rate);
        if (b.answer_correct) acc.add(Fraction(*b.answer_correct ? 1 : 0, 1));
        for (const auto& [m, s] : b.per_modality_precision) strata[m].add(s.precision);
    }

    rep.coverage = cov.stat();
    rep.precision = prec.stat();
    rep.recall = rec.stat();
    rep.f1 = f1.stat();
    rep.murgat = murgat.stat();
    rep.over_citation = over.stat();
    rep.accuracy = acc.stat();
    for (const auto& [m, a] : strata) rep.per_modality_precision[m] = a.stat();
    return rep;
}

} // namespace murgat
