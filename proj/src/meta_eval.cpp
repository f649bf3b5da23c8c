#include "murgat/meta_eval.hpp"

#include "murgat/io_util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

using Json = nlohmann::json;

namespace murgat {

UnitKind parse_unit_kind(const std::string& name) {
    if (name == "sentence") return UnitKind::sentence;
    if (name == "fact") return UnitKind::fact;
    if (name == "response") return UnitKind::response;
    throw ParseError("unknown unit kind: " + name);
}

const char* unit_kind_name(UnitKind k) {
    switch (k) {
    case UnitKind::sentence: return "sentence";
    case UnitKind::fact: return "fact";
    default: return "response";
    }
}

const GoldItem* GoldLabelSet::find(const std::string& unit_id) const {
    for (const auto& it : items)
        if (it.unit_id == unit_id) return &it;
    return nullptr;
}

GoldLabelSet load_gold_labels(const std::string& path) {
    GoldLabelSet set;
    std::set<std::string> seen;
    for (const auto& j : read_jsonl(path)) {
        GoldItem item;
        item.unit_id = j.at("unit_id").get<std::string>();
        if (!seen.insert(item.unit_id).second)
            throw ValidationError("duplicate unit_id in " + path + ": " + item.unit_id);
        item.kind = parse_unit_kind(j.value("unit_kind", std::string("sentence")));
        item.annotator_id = j.value("annotator_id", std::string());
        const Json& gold = j.at("gold");
        if (gold.is_boolean()) item.flag = gold.get<bool>();
        else if (gold.is_number()) item.score = gold.get<double>();
        else if (gold.is_array())
            for (const auto& f : gold) item.fact_texts.push_back(f.get<std::string>());
        else
            throw ParseError("gold must be a boolean, number, or fact list: " + item.unit_id);
        set.items.push_back(std::move(item));
    }
    return set;
}

// ── statistics ──────────────────────────────────────────────────────────────

double balanced_accuracy(const std::vector<bool>& preds, const std::vector<bool>& golds) {
    if (preds.size() != golds.size())
        throw ValidationError("balanced_accuracy: length mismatch");
    std::int64_t tp = 0, tn = 0, pos = 0, neg = 0;
    for (std::size_t i = 0; i < golds.size(); ++i) {
        if (golds[i]) {
            ++pos;
            if (preds[i]) ++tp;
        } else {
            ++neg;
            if (!preds[i]) ++tn;
        }
    }
    if (pos == 0 || neg == 0)
        throw ValidationError("balanced_accuracy: gold labels contain a single class");
    const double tpr = static_cast<double>(tp) / static_cast<double>(pos);
    const double tnr = static_cast<double>(tn) / static_cast<double>(neg);
    return (tpr + tnr) / 2.0;
}

namespace {

std::vector<std::string> rouge_tokens(const std::string& text) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char c : text) {
        const unsigned char u = static_cast<unsigned char>(c);
        if (std::isalnum(u)) {
            cur.push_back(static_cast<char>(std::tolower(u)));
        } else if (!cur.empty()) {
            tokens.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(cur);
    return tokens;
}

} // namespace

double rouge1_f1(const std::string& a, const std::string& b) {
    const auto ta = rouge_tokens(a);
    const auto tb = rouge_tokens(b);
    if (ta.empty() && tb.empty()) return 1.0;
    if (ta.empty() || tb.empty()) return 0.0;

    std::map<std::string, int> counts;
    for (const auto& t : tb) ++counts[t];
    std::int64_t overlap = 0;
    for (const auto& t : ta) {
        auto it = counts.find(t);
        if (it != counts.end() && it->second > 0) {
            ++overlap;
            --it->second;
        }
    }
    if (overlap == 0) return 0.0;
    const double p = static_cast<double>(overlap) / static_cast<double>(ta.size());
    const double r = static_cast<double>(overlap) / static_cast<double>(tb.size());
    return 2.0 * p * r / (p + r);
}

MatchScores greedy_match_f1(const std::vector<std::string>& generated,
                            const std::vector<std::string>& reference) {
    MatchScores s;
    if (generated.empty() && reference.empty()) {
        s.precision = s.recall = s.f1 = 1.0;
        return s;
    }
    if (generated.empty() || reference.empty()) return s; // all zero

    double psum = 0;
    for (const auto& g : generated) {
        double best = 0;
        for (const auto& r : reference) best = std::max(best, rouge1_f1(g, r));
        psum += best;
    }
    double rsum = 0;
    for (const auto& r : reference) {
        double best = 0;
        for (const auto& g : generated) best = std::max(best, rouge1_f1(r, g));
        rsum += best;
    }
    s.precision = psum / static_cast<double>(generated.size());
    s.recall = rsum / static_cast<double>(reference.size());
    if (s.precision + s.recall > 0)
        s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

double citation_propagation_accuracy(const std::vector<AtomicFact>& facts,
                                     const std::vector<Sentence>& sentences) {
    if (facts.empty()) return 1.0;
    auto as_set = [](const std::vector<Citation>& cs) {
        std::set<std::string> out;
        for (const auto& c : cs) out.insert(format_citation(c));
        return out;
    };
    std::int64_t correct = 0;
    for (const auto& f : facts) {
        if (f.parent_index < 0 || f.parent_index >= static_cast<int>(sentences.size()))
            throw ValidationError("citation_propagation_accuracy: fact parent_index out of range");
        if (as_set(f.citations) == as_set(sentences[f.parent_index].citations)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(facts.size());
}

namespace {

// Average ranks (1-based) with ties sharing their mean rank.
std::vector<double> average_ranks(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0 || syy == 0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

} // namespace

CorrelationResult correlate(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ValidationError("correlate: length mismatch");
    CorrelationResult res;
    res.n = static_cast<int>(x.size());
    if (res.n < 2) throw ValidationError("correlate: need at least 2 pairs");

    res.pearson_r = pearson(x, y);
    res.spearman_rho = pearson(average_ranks(x), average_ranks(y));

    // Kendall tau-b: (C - D) / sqrt((n0 - tied_x)(n0 - tied_y)).
    std::int64_t concordant = 0, discordant = 0, tied_x = 0, tied_y = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            const bool tx = x[i] == x[j];
            const bool ty = y[i] == y[j];
            if (tx) ++tied_x;
            if (ty) ++tied_y;
            if (tx || ty) continue;
            if ((x[i] < x[j]) == (y[i] < y[j])) ++concordant;
            else ++discordant;
        }
    }
    const std::int64_t n0 = static_cast<std::int64_t>(x.size()) *
                            (static_cast<std::int64_t>(x.size()) - 1) / 2;
    // single sqrt over the integer product keeps perfect squares exact
    const double denom = std::sqrt(static_cast<double>((n0 - tied_x) * (n0 - tied_y)));
    if (denom > 0)
        res.kendall_tau = static_cast<double>(concordant - discordant) / denom;
    return res;
}

// ── judge-backed baselines ──────────────────────────────────────────────────

namespace {

std::optional<int> first_score_digit(const std::string& raw) {
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(raw[i]))) continue;
        std::size_t e = i;
        while (e < raw.size() && std::isdigit(static_cast<unsigned char>(raw[e]))) ++e;
        const int v = std::stoi(raw.substr(i, e - i));
        if (v >= 1 && v <= 5) return v;
        i = e;
    }
    return std::nullopt;
}

std::optional<double> number_after(const std::string& raw, const std::string& label) {
    auto lower_str = [](std::string s) {
        for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return s;
    };
    const std::string low = lower_str(raw);
    const std::size_t at = low.find(lower_str(label));
    if (at == std::string::npos) return std::nullopt;
    std::size_t i = at + label.size();
    while (i < raw.size() && !std::isdigit(static_cast<unsigned char>(raw[i])) &&
           raw[i] != '.' && raw[i] != '-')
        ++i;
    if (i >= raw.size()) return std::nullopt;
    std::size_t e = i;
    while (e < raw.size() && (std::isdigit(static_cast<unsigned char>(raw[e])) || raw[e] == '.'))
        ++e;
    try {
        return std::stod(raw.substr(i, e - i));
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

} // namespace

int holistic_judge(const Response& response, const std::string& question, JudgeGateway& judge) {
    const std::string prompt = judge.prompts().render(
        "holistic", {{"question", question}, {"response", response.raw}});
    std::string raw = judge.complete(prompt);
    auto score = first_score_digit(raw);
    if (!score) {
        raw = judge.complete(prompt + "\n\nAnswer with a single digit from 1 to 5.");
        score = first_score_digit(raw);
    }
    if (!score) throw ParseError("holistic judge output carries no 1-5 score");
    return *score;
}

namespace {

DisentangledScores parse_triple(const std::string& raw) {
    DisentangledScores s;
    s.coverage = number_after(raw, "coverage");
    s.attr_recall = number_after(raw, "recall");
    s.attr_precision = number_after(raw, "precision");
    if (!s.coverage && !s.attr_recall && !s.attr_precision)
        throw ParseError("disentangled judge output carries no scores");
    return s;
}

} // namespace

DisentangledScores disentangled_judge(const Response& response, const std::string& question,
                                      JudgeGateway& judge, Granularity granularity) {
    if (granularity == Granularity::response) {
        const std::string prompt = judge.prompts().render(
            "disentangled", {{"question", question}, {"response", response.raw}});
        return parse_triple(judge.complete(prompt));
    }

    if (response.sentences.empty()) return DisentangledScores{};
    double cov = 0, rec = 0, prec = 0;
    int n = 0;
    for (const auto& s : response.sentences) {
        const std::string prompt = judge.prompts().render(
            "disentangled_sentence", {{"question", question}, {"sentence", s.raw_text}});
        const DisentangledScores one = parse_triple(judge.complete(prompt));
        cov += one.coverage.value_or(0);
        rec += one.attr_recall.value_or(0);
        prec += one.attr_precision.value_or(0);
        ++n;
    }
    DisentangledScores out;
    out.coverage = cov / n;
    out.attr_recall = rec / n;
    out.attr_precision = prec / n;
    return out;
}

// ── annotation ops ──────────────────────────────────────────────────────────

GoldLabelSet merge_annotations_union(const GoldLabelSet& a, const GoldLabelSet& b) {
    if (!a.items.empty() && !b.items.empty() && a.items.front().kind != b.items.front().kind)
        throw ValidationError("merge: unit kinds differ");
    for (const auto& set : {&a, &b})
        for (const auto& it : set->items)
            if (!it.flag)
                throw ValidationError("merge: unit " + it.unit_id + " is not boolean-labeled");

    GoldLabelSet out;
    std::map<std::string, std::size_t> index;
    for (const auto& it : a.items) {
        index[it.unit_id] = out.items.size();
        out.items.push_back(it);
        out.items.back().annotator_id = "union";
    }
    for (const auto& it : b.items) {
        auto found = index.find(it.unit_id);
        if (found == index.end()) {
            out.items.push_back(it);
            out.items.back().annotator_id = "union";
        } else {
            auto& target = out.items[found->second];
            target.flag = *target.flag || *it.flag;
        }
    }
    return out;
}

double agreement(const GoldLabelSet& a, const GoldLabelSet& b) {
    std::int64_t shared = 0, equal = 0;
    for (const auto& it : a.items) {
        const GoldItem* other = b.find(it.unit_id);
        if (!other) continue;
        if (!it.flag || !other->flag)
            throw ValidationError("agreement: unit " + it.unit_id + " is not boolean-labeled");
        ++shared;
        if (*it.flag == *other->flag) ++equal;
    }
    if (shared == 0) throw ValidationError("agreement: no shared unit ids");
    return static_cast<double>(equal) / static_cast<double>(shared);
}

} // namespace murgat
