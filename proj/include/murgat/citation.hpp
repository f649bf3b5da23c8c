#pragma once

#include "murgat/errors.hpp"

#include <optional>
#include <string>
#include <vector>

namespace murgat {

// ── Domain types ────────────────────────────────────────────────────────────

enum class Modality { visual, audio };

const char* modality_name(Modality m);
// Throws ParseError on anything but "visual"/"audio" (case-insensitive).
Modality parse_modality(const std::string& token);

// Closed integer-second interval.  A point timestamp has start_s == end_s.
struct TimeSpan {
    int start_s = 0;
    int end_s = 0;

    friend bool operator==(const TimeSpan&, const TimeSpan&) = default;
    bool is_point() const { return start_s == end_s; }
    int length_s() const { return end_s - start_s; }
};

// One modality-tagged temporal evidence reference, e.g. "(audio, 0:42-0:46)".
struct Citation {
    Modality modality = Modality::visual;
    TimeSpan span;

    friend bool operator==(const Citation&, const Citation&) = default;
};

struct Sentence {
    int index = 0;                  // 0-based position in the response
    std::string text;               // citation groups stripped
    std::string raw_text;           // original slice, citations in place
    std::vector<Citation> citations; // source order, duplicates removed
};

struct Response {
    std::string question_id;
    std::string raw;
    std::vector<Sentence> sentences;           // from the reasoning block
    std::optional<char> answer_letter;         // uppercase A..E
    std::vector<std::string> warnings;
};

// Minimal decontextualized claim inheriting citations from its sentence.
struct AtomicFact {
    std::string text;
    int parent_index = 0;
    std::vector<Citation> citations;

    friend bool operator==(const AtomicFact&, const AtomicFact&) = default;
};

// ── Parsing / formatting ────────────────────────────────────────────────────

// "M:SS", "MM:SS", "H:MM:SS", optionally "A-B" ranges of two such tokens.
// Seconds (and minutes, in the H:MM:SS form) must be < 60; ranges must not be
// reversed.  Throws ParseError naming the offending token.
TimeSpan parse_timestamp(const std::string& text);

// One parenthesized or bracketed group, e.g. "(visual, 0:12; audio, 0:12-0:14)".
// Returns one Citation per semicolon-separated entry, in order.
std::vector<Citation> parse_citation_group(const std::string& text);

// Canonical form "(modality, M:SS)" / "(modality, M:SS-M:SS)"; minutes
// unpadded, seconds zero-padded to two digits.
std::string format_citation(const Citation& c);
std::string format_timestamp(const TimeSpan& span);
// Canonical multi-entry group "(visual, 0:12; audio, 0:12-0:14)".
std::string format_citation_group(const std::vector<Citation>& cs);

struct ExtractedCitations {
    std::string clean_text;
    std::vector<Citation> citations;
    std::vector<std::string> warnings; // malformed citation-like groups
};

// Remove every well-formed citation group from the text, concatenating the
// parsed citations in order and dropping exact duplicates.  Citation-like but
// malformed groups stay in the text and are reported as warnings, never
// errors: evaluation has to score sloppy model output.
ExtractedCitations extract_citations(const std::string& sentence_text);

// Every well-formed citation group in the text, in order, without
// de-duplication.  Backs the conservation check the decontextualization pass
// runs over judge rewrites.
std::vector<std::vector<Citation>> scan_citation_groups(const std::string& text);

// Deterministic rule-based segmentation: split on . ! ? followed by
// whitespace and an uppercase/quote/digit start.  No splits inside
// parenthesized or bracketed groups, after single-letter abbreviations, or
// after common title abbreviations.  Each sentence then runs
// extract_citations.  Empty input yields an empty list.
std::vector<Sentence> segment_sentences(const std::string& reasoning_text);

// Split arbitrary model output into reasoning block + answer letter, then
// segment the reasoning.  Never throws: a missing answer marker just leaves
// answer_letter unset.
Response parse_response(const std::string& raw, const std::string& question_id);

// The reasoning block slice parse_response would segment (exposed for the
// decontextualization pass, which rewrites the block as a whole).
std::string reasoning_block(const std::string& raw);

} // namespace murgat
