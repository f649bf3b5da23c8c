#include "murgat/metrics.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace murgat;

// ── Independent brute-force oracle ──────────────────────────────────────────
// Direct evaluation of the metric summations with its own unreduced rational
// type; shares nothing with the implementation path it checks.
namespace oracle {

struct Rat {
    long long num = 0, den = 0; // den == 0 encodes undefined
    bool defined() const { return den != 0; }
};

bool same(const Rat& a, const OptFraction& b) {
    if (!a.defined()) return !b.has_value();
    if (!b.has_value()) return false;
    return a.num * b->den == b->num * a.den;
}

Rat coverage(const VerifiabilityMarks& marks) {
    long long v = 0, vc = 0;
    for (const auto& m : marks) {
        if (m.verifiable) {
            ++v;
            if (m.cited) ++vc;
        }
    }
    if (v == 0) return {};
    return {vc, v};
}

struct Attr {
    Rat precision, recall, f1;
};

Attr attribution(const AttributionJudgments& js) {
    Attr out;
    if (js.empty()) return out;
    long long sup = 0, rel = 0, tot = 0;
    for (const auto& j : js) {
        if (j.supported) ++sup;
        for (const auto& c : j.citations) {
            ++tot;
            if (c.relevant) ++rel;
        }
    }
    out.recall = {sup, static_cast<long long>(js.size())};
    if (tot == 0) return out;
    out.precision = {rel, tot};
    // F1 = 2PR/(P+R) with P=rel/tot, R=sup/n  ->  2*rel*sup / (rel*n + sup*tot)
    const long long n = static_cast<long long>(js.size());
    if (rel == 0 || sup == 0) out.f1 = {0, 1};
    else out.f1 = {2 * rel * sup, rel * n + sup * tot};
    return out;
}

Rat murgat(const Rat& cov, const Rat& f1) {
    if (!cov.defined()) return {};
    if (!f1.defined()) return {0, 1};
    return {cov.num * f1.num, cov.den * f1.den};
}

} // namespace oracle

namespace {

VerifiabilityMarks random_marks(std::mt19937& rng) {
    std::uniform_int_distribution<int> n(0, 8), coin(0, 1);
    VerifiabilityMarks marks(n(rng));
    for (auto& m : marks) {
        m.verifiable = coin(rng) == 1;
        m.cited = coin(rng) == 1;
    }
    return marks;
}

AttributionJudgments random_judgments(std::mt19937& rng) {
    std::uniform_int_distribution<int> n(0, 6), ncit(1, 4), coin(0, 1);
    AttributionJudgments js(n(rng));
    for (auto& j : js) {
        j.supported = coin(rng) == 1;
        const int k = ncit(rng);
        for (int i = 0; i < k; ++i) {
            CitationJudgment c;
            c.citation = testutil::random_citation(rng);
            // invariants: unsupported facts have no relevant citations; a
            // supported single-citation fact's citation is relevant
            c.relevant = j.supported && (k == 1 || coin(rng) == 1);
            j.citations.push_back(c);
        }
        if (j.supported && k == 1) j.citations[0].relevant = true;
    }
    return js;
}

} // namespace

TEST_CASE("coverage examples") {
    VerifiabilityMarks m(6);
    for (int i = 0; i < 4; ++i) m[i].verifiable = true;
    m[0].cited = m[1].cited = true;
    m[5].cited = true; // cited but not verifiable: does not count
    CHECK(coverage(m) == Fraction(1, 2));

    CHECK_FALSE(coverage(VerifiabilityMarks{}).has_value());
    VerifiabilityMarks none(3); // nothing verifiable
    none[0].cited = true;
    CHECK_FALSE(coverage(none).has_value());

    VerifiabilityMarks all(3);
    for (auto& x : all) x.verifiable = x.cited = true;
    CHECK(coverage(all) == Fraction(1, 1));
}

TEST_CASE("worked attribution fixture: P=1/2, R=2/3, F1=4/7") {
    AttributionJudgments js(3);
    js[0].supported = true;
    js[0].citations.push_back({Citation{Modality::visual, {1, 2}}, true});
    js[0].citations.push_back({Citation{Modality::audio, {3, 4}}, false});
    js[1].supported = true;
    js[1].citations.push_back({Citation{Modality::visual, {5, 6}}, true});
    js[2].supported = false;
    js[2].citations.push_back({Citation{Modality::visual, {7, 8}}, false});

    const auto scores = attribution_scores(js);
    CHECK(scores.precision == Fraction(1, 2));
    CHECK(scores.recall == Fraction(2, 3));
    CHECK(scores.f1 == Fraction(4, 7));
}

TEST_CASE("attribution ceilings and empties") {
    AttributionJudgments all(2);
    for (auto& j : all) {
        j.supported = true;
        j.citations.push_back({Citation{}, true});
    }
    const auto top = attribution_scores(all);
    CHECK(top.precision == Fraction(1, 1));
    CHECK(top.recall == Fraction(1, 1));
    CHECK(top.f1 == Fraction(1, 1));

    const auto empty = attribution_scores({});
    CHECK_FALSE(empty.precision.has_value());
    CHECK_FALSE(empty.recall.has_value());
    CHECK_FALSE(empty.f1.has_value());
}

TEST_CASE("murgat_score composition rules") {
    CHECK(murgat_score(Fraction(1, 1), Fraction(3, 7)) == Fraction(3, 7));
    CHECK(murgat_score(Fraction(1, 2), Fraction(1, 2)) == Fraction(1, 4));
    CHECK(murgat_score(Fraction(1, 2), std::nullopt) == Fraction(0, 1));
    CHECK_FALSE(murgat_score(std::nullopt, Fraction(1, 2)).has_value());
}

TEST_CASE("oracle equivalence over 500 random fixtures") {
    std::mt19937 rng(4242);
    for (int iter = 0; iter < 500; ++iter) {
        const auto marks = random_marks(rng);
        const auto js = random_judgments(rng);
        const MetricBundle b = compute_bundle(marks, js, std::nullopt);

        CHECK(oracle::same(oracle::coverage(marks), b.coverage));
        const auto attr = oracle::attribution(js);
        CHECK(oracle::same(attr.precision, b.precision));
        CHECK(oracle::same(attr.recall, b.recall));
        CHECK(oracle::same(attr.f1, b.f1));
        CHECK(oracle::same(oracle::murgat(oracle::coverage(marks), attr.f1), b.murgat_score));
    }
}

TEST_CASE("metric identities hold on random fixtures") {
    std::mt19937 rng(555);
    for (int iter = 0; iter < 500; ++iter) {
        const auto marks = random_marks(rng);
        const auto js = random_judgments(rng);
        const MetricBundle b = compute_bundle(marks, js, std::nullopt);

        if (b.murgat_score && b.coverage && b.f1) {
            CHECK(*b.murgat_score <= *b.coverage);
            CHECK(*b.murgat_score <= *b.f1);
        }
        if (b.f1 && b.precision && b.recall) {
            // F1 <= (P+R)/2 and F1 = 0 <=> P*R = 0
            const Fraction mean = (*b.precision + *b.recall) * Fraction(1, 2);
            CHECK(*b.f1 <= mean);
            CHECK((b.f1->is_zero()) == (b.precision->is_zero() || b.recall->is_zero()));
        }

        // stratified precision recombines to overall precision exactly
        if (b.precision) {
            std::int64_t rel = 0, tot = 0;
            for (const auto& [m, s] : b.per_modality_precision) {
                rel += s.relevant;
                tot += s.total;
            }
            REQUIRE(tot > 0);
            CHECK(Fraction(rel, tot) == *b.precision);
        }
    }
}

TEST_CASE("per-modality precision strata") {
    AttributionJudgments js(1);
    js[0].supported = true;
    js[0].citations.push_back({Citation{Modality::visual, {0, 1}}, true});
    js[0].citations.push_back({Citation{Modality::visual, {2, 3}}, true});
    js[0].citations.push_back({Citation{Modality::visual, {4, 5}}, true});
    js[0].citations.push_back({Citation{Modality::visual, {6, 7}}, false});
    const auto only_visual = per_modality_precision(js);
    CHECK(only_visual.at(Modality::visual).precision == Fraction(3, 4));
    CHECK_FALSE(only_visual.at(Modality::audio).precision.has_value());
    CHECK(only_visual.at(Modality::audio).total == 0);

    js[0].citations.push_back({Citation{Modality::audio, {0, 1}}, true});
    js[0].citations.push_back({Citation{Modality::audio, {2, 3}}, false});
    const auto mixed = per_modality_precision(js);
    CHECK(mixed.at(Modality::visual).precision == Fraction(3, 4));
    CHECK(mixed.at(Modality::audio).precision == Fraction(1, 2));
}

TEST_CASE("answer accuracy") {
    CHECK(answer_accuracy('B', 'B'));
    CHECK_FALSE(answer_accuracy(std::nullopt, 'B'));
    CHECK(answer_accuracy('b', 'B'));
    CHECK_FALSE(answer_accuracy('A', 'B'));
    CHECK_THROWS_AS(answer_accuracy('A', 'Z'), ValidationError);
}

TEST_CASE("over-citation rate") {
    VerifiabilityMarks m(40);
    for (int i = 0; i < 3; ++i) m[i].verifiable = true; // 37 not verifiable
    m[10].cited = m[11].cited = m[12].cited = true;     // 3 of them cited
    const auto rate = over_citation_rate(m);
    REQUIRE(rate.has_value());
    CHECK(*rate == Fraction(3, 37));
    CHECK(std::abs(rate->value() - 0.081) < 0.001);

    VerifiabilityMarks all_verifiable(4);
    for (auto& x : all_verifiable) x.verifiable = true;
    CHECK_FALSE(over_citation_rate(all_verifiable).has_value());

    VerifiabilityMarks uncited(5); // nothing cited anywhere
    CHECK(over_citation_rate(uncited) == Fraction(0, 1));
}

TEST_CASE("aggregate macro means over defined subsets") {
    MetricBundle a, b, c;
    a.coverage = Fraction(1, 5);
    a.murgat_score = Fraction(1, 5);
    a.answer_correct = true;
    b.coverage = Fraction(2, 5);
    b.murgat_score = Fraction(2, 5);
    b.answer_correct = false;
    c.coverage = std::nullopt; // excluded from the coverage mean
    c.murgat_score = std::nullopt;

    const DatasetReport rep = aggregate({a, b, c}, 1);
    CHECK(rep.responses == 3);
    CHECK(rep.skipped == 1);
    CHECK(rep.undefined_coverage == 1);
    REQUIRE(rep.murgat.mean.has_value());
    CHECK(*rep.murgat.mean == doctest::Approx(0.3));
    CHECK(rep.murgat.n == 2);
    REQUIRE(rep.accuracy.mean.has_value());
    CHECK(*rep.accuracy.mean == doctest::Approx(0.5));

    const DatasetReport empty = aggregate({}, 0);
    CHECK(empty.responses == 0);
    CHECK_FALSE(empty.coverage.mean.has_value());
}
