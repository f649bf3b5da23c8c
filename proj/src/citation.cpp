#include "murgat/citation.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <sstream>

namespace murgat {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return s.substr(b, e - b);
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

// Parse one H:MM:SS / MM:SS / M:SS token into seconds.
int parse_clock_token(const std::string& token) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : token) {
        if (c == ':') { fields.push_back(cur); cur.clear(); }
        else cur.push_back(c);
    }
    fields.push_back(cur);
    if (fields.size() < 2 || fields.size() > 3)
        throw ParseError("bad timestamp token '" + token + "'");
    for (const auto& f : fields) {
        if (f.empty() || !std::all_of(f.begin(), f.end(), is_digit))
            throw ParseError("bad timestamp token '" + token + "'");
    }
    // Trailing fields carry two digits ("0:4" is rejected, "0:42" accepted).
    for (std::size_t i = 1; i < fields.size(); ++i)
        if (fields[i].size() != 2)
            throw ParseError("bad timestamp token '" + token + "'");
    std::vector<int> v;
    for (const auto& f : fields) v.push_back(std::stoi(f));
    if (fields.size() == 2) {
        if (v[1] >= 60) throw ParseError("seconds out of range in '" + token + "'");
        return v[0] * 60 + v[1];
    }
    if (v[1] >= 60) throw ParseError("minutes out of range in '" + token + "'");
    if (v[2] >= 60) throw ParseError("seconds out of range in '" + token + "'");
    return v[0] * 3600 + v[1] * 60 + v[2];
}

} // namespace

const char* modality_name(Modality m) {
    return m == Modality::visual ? "visual" : "audio";
}

Modality parse_modality(const std::string& token) {
    const std::string t = lower(trim(token));
    if (t == "visual") return Modality::visual;
    if (t == "audio") return Modality::audio;
    throw ParseError("unknown modality '" + token + "'");
}

TimeSpan parse_timestamp(const std::string& text) {
    const std::string t = trim(text);
    if (t.empty()) throw ParseError("empty timestamp");
    const std::size_t dash = t.find('-');
    if (dash == std::string::npos) {
        const int s = parse_clock_token(t);
        return TimeSpan{s, s};
    }
    const std::string a = trim(t.substr(0, dash));
    const std::string b = trim(t.substr(dash + 1));
    if (b.find('-') != std::string::npos)
        throw ParseError("bad timestamp range '" + text + "'");
    const int start = parse_clock_token(a);
    const int end = parse_clock_token(b);
    if (start > end)
        throw ParseError("reversed timestamp range '" + text + "'");
    return TimeSpan{start, end};
}

std::vector<Citation> parse_citation_group(const std::string& text) {
    std::string t = trim(text);
    if (t.size() >= 2 &&
        ((t.front() == '(' && t.back() == ')') || (t.front() == '[' && t.back() == ']')))
        t = t.substr(1, t.size() - 2);
    t = trim(t);
    if (t.empty()) throw ParseError("empty citation group");

    std::vector<Citation> out;
    std::size_t pos = 0;
    while (pos <= t.size()) {
        std::size_t semi = t.find(';', pos);
        const std::string entry =
            trim(semi == std::string::npos ? t.substr(pos) : t.substr(pos, semi - pos));
        if (entry.empty()) throw ParseError("empty citation entry in '" + text + "'");
        const std::size_t comma = entry.find(',');
        if (comma == std::string::npos)
            throw ParseError("missing comma in citation entry '" + entry + "'");
        const Modality m = parse_modality(entry.substr(0, comma));
        const TimeSpan span = parse_timestamp(entry.substr(comma + 1));
        out.push_back(Citation{m, span});
        if (semi == std::string::npos) break;
        pos = semi + 1;
    }
    return out;
}

std::string format_timestamp(const TimeSpan& span) {
    auto clock = [](int s) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%d:%02d", s / 60, s % 60);
        return std::string(buf);
    };
    if (span.is_point()) return clock(span.start_s);
    return clock(span.start_s) + "-" + clock(span.end_s);
}

std::string format_citation(const Citation& c) {
    return "(" + std::string(modality_name(c.modality)) + ", " + format_timestamp(c.span) + ")";
}

std::string format_citation_group(const std::vector<Citation>& cs) {
    std::string body;
    for (std::size_t i = 0; i < cs.size(); ++i) {
        if (i) body += "; ";
        body += std::string(modality_name(cs[i].modality)) + ", " + format_timestamp(cs[i].span);
    }
    return "(" + body + ")";
}

namespace {

// A delimited group is citation-like when it mentions a modality word or a
// clock token.  Ordinary parentheticals ("(see above)") are neither.
bool looks_like_citation(const std::string& inner) {
    const std::string low = lower(inner);
    for (const char* word : {"visual", "audio"}) {
        std::size_t p = low.find(word);
        while (p != std::string::npos) {
            const bool left_ok = p == 0 || !is_alpha(low[p - 1]);
            const std::size_t after = p + std::string(word).size();
            const bool right_ok = after >= low.size() || !is_alpha(low[after]);
            if (left_ok && right_ok) return true;
            p = low.find(word, p + 1);
        }
    }
    for (std::size_t i = 0; i + 2 < inner.size(); ++i) {
        if (is_digit(inner[i]) && inner[i + 1] == ':' && is_digit(inner[i + 2])) {
            if (i > 0 && is_digit(inner[i - 1])) continue; // mid-number, let the start handle it
            return true;
        }
    }
    return false;
}

std::size_t find_group_close(const std::string& s, std::size_t open) {
    const char close = s[open] == '(' ? ')' : ']';
    for (std::size_t i = open + 1; i < s.size(); ++i) {
        if (s[i] == close) return i;
        if (s[i] == '(' || s[i] == '[') return std::string::npos; // nested: not a group
    }
    return std::string::npos;
}

void normalize_spacing(std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (is_space(c) && !out.empty() && out.back() == ' ') continue;
        out.push_back(is_space(c) ? ' ' : c);
    }
    // No space before closing punctuation left behind by a removed group.
    std::string tidy;
    tidy.reserve(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i] == ' ' && i + 1 < out.size() &&
            (out[i + 1] == '.' || out[i + 1] == ',' || out[i + 1] == '!' ||
             out[i + 1] == '?' || out[i + 1] == ';' || out[i + 1] == ':'))
            continue;
        tidy.push_back(out[i]);
    }
    s = trim(tidy);
}

} // namespace

ExtractedCitations extract_citations(const std::string& sentence_text) {
    ExtractedCitations result;
    std::string clean;
    clean.reserve(sentence_text.size());

    std::size_t i = 0;
    while (i < sentence_text.size()) {
        const char c = sentence_text[i];
        if (c == '(' || c == '[') {
            const std::size_t close = find_group_close(sentence_text, i);
            if (close != std::string::npos) {
                const std::string group = sentence_text.substr(i, close - i + 1);
                const std::string inner = group.substr(1, group.size() - 2);
                if (looks_like_citation(inner)) {
                    try {
                        auto parsed = parse_citation_group(group);
                        for (auto& cit : parsed) {
                            const bool dup = std::find(result.citations.begin(),
                                                       result.citations.end(),
                                                       cit) != result.citations.end();
                            if (!dup) result.citations.push_back(cit);
                        }
                        i = close + 1;
                        continue; // group consumed, not copied to clean text
                    } catch (const ParseError& e) {
                        result.warnings.push_back("malformed citation group " + group + ": " +
                                                  e.what());
                        // falls through: group stays in the text
                    }
                }
            }
        }
        clean.push_back(c);
        ++i;
    }
    normalize_spacing(clean);
    result.clean_text = clean;
    return result;
}

std::vector<std::vector<Citation>> scan_citation_groups(const std::string& text) {
    std::vector<std::vector<Citation>> groups;
    std::size_t i = 0;
    while (i < text.size()) {
        const char c = text[i];
        if (c == '(' || c == '[') {
            const std::size_t close = find_group_close(text, i);
            if (close != std::string::npos) {
                const std::string group = text.substr(i, close - i + 1);
                if (looks_like_citation(group.substr(1, group.size() - 2))) {
                    try {
                        groups.push_back(parse_citation_group(group));
                        i = close + 1;
                        continue;
                    } catch (const ParseError&) {
                        // malformed: skip over it like plain text
                    }
                }
            }
        }
        ++i;
    }
    return groups;
}

namespace {

// Title/latin abbreviations that never end a sentence.  Compared with internal
// periods stripped, lowercase ("e.g" -> "eg").
const std::array<const char*, 16> kAbbrev = {
    "mr", "mrs", "ms", "dr", "prof", "st", "vs", "etc",
    "eg", "ie", "cf", "fig", "al", "inc", "jr", "sr",
};

bool is_protected_abbrev(const std::string& word) {
    std::string w;
    for (char c : word)
        if (c != '.') w.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (w.size() == 1 && is_alpha(w[0])) return true; // single-letter initials
    return std::find_if(kAbbrev.begin(), kAbbrev.end(),
                        [&](const char* a) { return w == a; }) != kAbbrev.end();
}

// Word immediately preceding position `dot` (exclusive), stopping at whitespace.
std::string word_before(const std::string& s, std::size_t dot) {
    std::size_t b = dot;
    while (b > 0 && !is_space(s[b - 1])) --b;
    return s.substr(b, dot - b);
}

bool sentence_start_char(char c) {
    return std::isupper(static_cast<unsigned char>(c)) || is_digit(c) || c == '"' || c == '\'';
}

} // namespace

namespace {

// Marks every index lying inside a matched (...) or [...] pair.  Unmatched
// openers protect nothing, so a stray "(" cannot swallow the rest of the text.
std::vector<bool> protected_spans(const std::string& text) {
    std::vector<bool> prot(text.size(), false);
    std::vector<std::size_t> parens, brackets;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '(') parens.push_back(i);
        else if (c == '[') brackets.push_back(i);
        else if (c == ')' && !parens.empty()) {
            for (std::size_t k = parens.back(); k <= i; ++k) prot[k] = true;
            parens.pop_back();
        } else if (c == ']' && !brackets.empty()) {
            for (std::size_t k = brackets.back(); k <= i; ++k) prot[k] = true;
            brackets.pop_back();
        }
    }
    return prot;
}

} // namespace

std::vector<Sentence> segment_sentences(const std::string& reasoning_text) {
    std::vector<Sentence> sentences;
    const std::string& text = reasoning_text;
    const std::vector<bool> prot = protected_spans(text);

    std::size_t begin = 0;
    auto emit = [&](std::size_t end_exclusive) {
        const std::string raw = trim(text.substr(begin, end_exclusive - begin));
        if (!raw.empty()) {
            Sentence s;
            s.index = static_cast<int>(sentences.size());
            s.raw_text = raw;
            auto extracted = extract_citations(raw);
            s.text = extracted.clean_text;
            s.citations = std::move(extracted.citations);
            sentences.push_back(std::move(s));
        }
        begin = end_exclusive;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (prot[i]) continue;
        if (c != '.' && c != '!' && c != '?') continue;

        // Consume a run of terminal punctuation ("?!", "...").
        std::size_t j = i;
        while (j + 1 < text.size() &&
               (text[j + 1] == '.' || text[j + 1] == '!' || text[j + 1] == '?'))
            ++j;
        std::size_t k = j + 1;
        if (k >= text.size()) { i = j; continue; } // handled by the tail emit
        if (!is_space(text[k])) { i = j; continue; }
        while (k < text.size() && is_space(text[k])) ++k;
        if (k >= text.size()) { i = j; continue; }
        if (!sentence_start_char(text[k])) { i = j; continue; }
        if (c == '.' && j == i && is_protected_abbrev(word_before(text, i))) continue;

        emit(j + 1);
        i = k - 1;
        begin = i + 1;
    }
    emit(text.size());
    return sentences;
}

namespace {

// First case-insensitive occurrence of `marker` in `s`, from `from`.
std::size_t find_ci(const std::string& s, const std::string& marker, std::size_t from) {
    if (marker.empty() || s.size() < marker.size()) return std::string::npos;
    const std::string low_s = lower(s);
    return low_s.find(lower(marker), from);
}

} // namespace

std::string reasoning_block(const std::string& raw) {
    std::size_t start = 0;
    const std::size_t r = find_ci(raw, "reasoning:", 0);
    if (r != std::string::npos) start = r + std::string("reasoning:").size();
    const std::size_t a = find_ci(raw, "answer:", start);
    const std::size_t end = a == std::string::npos ? raw.size() : a;
    return trim(raw.substr(start, end - start));
}

Response parse_response(const std::string& raw, const std::string& question_id) {
    Response r;
    r.question_id = question_id;
    r.raw = raw;
    r.sentences = segment_sentences(reasoning_block(raw));
    for (const auto& s : r.sentences) {
        auto extracted = extract_citations(s.raw_text);
        for (auto& w : extracted.warnings)
            r.warnings.push_back("sentence " + std::to_string(s.index) + ": " + w);
    }

    std::size_t start = 0;
    const std::size_t rm = find_ci(raw, "reasoning:", 0);
    if (rm != std::string::npos) start = rm + std::string("reasoning:").size();
    const std::size_t a = find_ci(raw, "answer:", start);
    if (a != std::string::npos) {
        // First single-letter A-E token after the marker.
        std::size_t i = a + std::string("answer:").size();
        while (i < raw.size()) {
            if (!std::isalnum(static_cast<unsigned char>(raw[i]))) { ++i; continue; }
            std::size_t e = i;
            while (e < raw.size() && std::isalnum(static_cast<unsigned char>(raw[e]))) ++e;
            if (e - i == 1 && is_alpha(raw[i])) {
                const char up =
                    static_cast<char>(std::toupper(static_cast<unsigned char>(raw[i])));
                if (up >= 'A' && up <= 'E') {
                    r.answer_letter = up;
                    break;
                }
            }
            i = e;
        }
    }
    return r;
}

} // namespace murgat
