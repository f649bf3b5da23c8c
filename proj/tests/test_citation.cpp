#include "murgat/citation.hpp"

#include "helpers.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <array>
#include <random>

using namespace murgat;

TEST_CASE("parse_timestamp accepts the canonical forms") {
    CHECK(parse_timestamp("0:42-0:46") == TimeSpan{42, 46});
    CHECK(parse_timestamp("1:05") == TimeSpan{65, 65});
    CHECK(parse_timestamp("0:00") == TimeSpan{0, 0});
    CHECK(parse_timestamp("00:03-00:05") == TimeSpan{3, 5});
    CHECK(parse_timestamp("10:42") == TimeSpan{642, 642});
    CHECK(parse_timestamp("1:02:03") == TimeSpan{3723, 3723});
    CHECK(parse_timestamp("61:01") == TimeSpan{3661, 3661}); // big minutes, no hours form
}

TEST_CASE("parse_timestamp rejects malformed tokens") {
    CHECK_THROWS_AS(parse_timestamp("0:75"), ParseError);      // seconds >= 60
    CHECK_THROWS_AS(parse_timestamp("1:75:03"), ParseError);   // minutes >= 60 with hours
    CHECK_THROWS_AS(parse_timestamp("0:46-0:42"), ParseError); // reversed
    CHECK_THROWS_AS(parse_timestamp("abc"), ParseError);
    CHECK_THROWS_AS(parse_timestamp("0:4"), ParseError);       // one-digit seconds
    CHECK_THROWS_AS(parse_timestamp(""), ParseError);
    CHECK_THROWS_AS(parse_timestamp("0:10-0:20-0:30"), ParseError);
}

TEST_CASE("parse_citation_group handles both delimiters and semicolons") {
    const auto multi = parse_citation_group("(visual, 0:12; audio, 0:12-0:14)");
    REQUIRE(multi.size() == 2);
    CHECK(multi[0] == Citation{Modality::visual, {12, 12}});
    CHECK(multi[1] == Citation{Modality::audio, {12, 14}});

    const auto bracket = parse_citation_group("[audio, 0:03-0:08]");
    REQUIRE(bracket.size() == 1);
    CHECK(bracket[0] == Citation{Modality::audio, {3, 8}});

    CHECK_THROWS_AS(parse_citation_group("(video, 0:15)"), ParseError); // unknown modality
    CHECK_THROWS_AS(parse_citation_group("(visual 0:15)"), ParseError); // missing comma
    CHECK_THROWS_AS(parse_citation_group("()"), ParseError);            // empty group
    CHECK_THROWS_AS(parse_citation_group("(visual, 0:12;)"), ParseError);
}

TEST_CASE("format_citation is canonical") {
    CHECK(format_citation(Citation{Modality::audio, {42, 46}}) == "(audio, 0:42-0:46)");
    CHECK(format_citation(Citation{Modality::visual, {65, 65}}) == "(visual, 1:05)");
    CHECK(format_citation(Citation{Modality::visual, {3661, 3661}}) == "(visual, 61:01)");
    CHECK(format_citation_group({Citation{Modality::visual, {12, 12}},
                                 Citation{Modality::audio, {12, 14}}}) ==
          "(visual, 0:12; audio, 0:12-0:14)");
}

TEST_CASE("round-trip parse(format(c)) == [c] over random citations") {
    std::mt19937 rng(20240817);
    for (int i = 0; i < 1000; ++i) {
        const Citation c = testutil::random_citation(rng);
        const auto back = parse_citation_group(format_citation(c));
        REQUIRE(back.size() == 1);
        CHECK(back[0] == c);
    }
}

TEST_CASE("extract_citations removes well-formed groups") {
    const auto melody = extract_citations("The melody continues (audio, 0:50-0:55).");
    CHECK(melody.clean_text == "The melody continues.");
    REQUIRE(melody.citations.size() == 1);
    CHECK(melody.citations[0] == Citation{Modality::audio, {50, 55}});
    CHECK(melody.warnings.empty());

    const auto none = extract_citations("Therefore, option A is correct.");
    CHECK(none.clean_text == "Therefore, option A is correct.");
    CHECK(none.citations.empty());
}

// Independent oracle: scan for "(visual, M:SS)" point groups by hand.
namespace {
std::vector<int> scan_point_seconds(const std::string& text) {
    std::vector<int> out;
    std::size_t pos = 0;
    while ((pos = text.find("(visual, ", pos)) != std::string::npos) {
        const std::size_t close = text.find(')', pos);
        const std::string token = text.substr(pos + 9, close - pos - 9);
        const std::size_t colon = token.find(':');
        out.push_back(std::stoi(token.substr(0, colon)) * 60 +
                      std::stoi(token.substr(colon + 1)));
        pos = close;
    }
    return out;
}
} // namespace

TEST_CASE("extract_citations keeps order over multiple embedded groups") {
    const std::string text = "A hits B (visual, 1:00) then C (visual, 2:00).";
    const auto extracted = extract_citations(text);
    CHECK(extracted.clean_text == "A hits B then C.");
    const auto oracle = scan_point_seconds(text);
    REQUIRE(extracted.citations.size() == oracle.size());
    for (std::size_t i = 0; i < oracle.size(); ++i) {
        CHECK(extracted.citations[i].modality == Modality::visual);
        CHECK(extracted.citations[i].span.start_s == oracle[i]);
    }
}

TEST_CASE("extract_citations leaves malformed groups as warnings") {
    const auto bad = extract_citations("A car passes (video, 0:15) on the left.");
    CHECK(bad.citations.empty());
    CHECK(bad.clean_text == "A car passes (video, 0:15) on the left.");
    REQUIRE(bad.warnings.size() == 1);

    // ordinary parentheticals are not citation-like and produce no warnings
    const auto prose = extract_citations("The value (see above) is large.");
    CHECK(prose.warnings.empty());
    CHECK(prose.clean_text == "The value (see above) is large.");
}

TEST_CASE("extract_citations drops exact duplicates") {
    const auto d = extract_citations("X (visual, 0:10) and Y (visual, 0:10).");
    CHECK(d.citations.size() == 1);
}

TEST_CASE("extract_citations is idempotent on its own clean text") {
    std::mt19937 rng(7);
    const std::vector<std::string> bodies = {
        "A man sits quietly",  "The chart shows a dip", "Two birds fly past",
        "Someone says hello",  "The light turns green", "A (video, 0:09) glitch stays",
    };
    for (int iter = 0; iter < 200; ++iter) {
        std::string text;
        std::uniform_int_distribution<int> n(1, 4), pick(0, static_cast<int>(bodies.size()) - 1);
        const int k = n(rng);
        for (int i = 0; i < k; ++i) {
            text += bodies[pick(rng)];
            if (rng() % 2) text += " " + format_citation(testutil::random_citation(rng));
            text += ". ";
        }
        const auto once = extract_citations(text);
        const auto twice = extract_citations(once.clean_text);
        CHECK(twice.clean_text == once.clean_text);
        CHECK(twice.citations.empty());
    }
}

TEST_CASE("segment_sentences splits on terminal punctuation") {
    const auto two = segment_sentences("A man sits (visual, 0:06). He speaks (audio, 0:07).");
    REQUIRE(two.size() == 2);
    CHECK(two[0].citations.size() == 1);
    CHECK(two[1].citations.size() == 1);
    CHECK(two[0].text == "A man sits.");
    CHECK(two[1].index == 1);

    const auto decimal = segment_sentences("The value is 3.5 at the start (visual, 0:10).");
    CHECK(decimal.size() == 1);

    CHECK(segment_sentences("").empty());
}

TEST_CASE("segment_sentences honors protected tokens") {
    CHECK(segment_sentences("Dr. Smith waves (visual, 0:05). A dog barks.").size() == 2);
    CHECK(segment_sentences("Option B. Next we see a tree (visual, 0:09).").size() == 1);
    CHECK(segment_sentences("He cites Lee et al. for the claim. The slide changes.").size() == 2);
    // no split inside a matched parenthetical, even with inner punctuation
    const auto paren = segment_sentences("The notes (e.g. C, D. E) repeat. A chord ends it.");
    CHECK(paren.size() == 2);
    // a stray unmatched opener does not swallow the rest of the text
    const auto stray = segment_sentences("A smiley ( appears. The video continues. It ends.");
    CHECK(stray.size() == 3);
}

namespace {
std::string squeeze(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!out.empty() && out.back() != ' ') out.push_back(' ');
        } else {
            out.push_back(c);
        }
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}
} // namespace

TEST_CASE("segmentation conservation: raw texts reassemble the block") {
    std::mt19937 rng(99);
    const std::vector<std::string> bodies = {
        "A man in a red coat enters", "The chart dips sharply near the end",
        "Dr. Lopez nods twice",       "The figure 2.5 appears on screen",
        "Is that a violin",           "Someone shouts from off screen",
    };
    for (int iter = 0; iter < 100; ++iter) {
        std::string text;
        std::uniform_int_distribution<int> n(1, 8), pick(0, static_cast<int>(bodies.size()) - 1),
            punct(0, 2);
        const int k = n(rng);
        for (int i = 0; i < k; ++i) {
            text += bodies[pick(rng)];
            if (rng() % 2) text += " " + format_citation(testutil::random_citation(rng));
            text += std::array{".", "!", "?"}[punct(rng)];
            text += " ";
        }
        const auto sentences = segment_sentences(text);
        std::string joined;
        for (const auto& s : sentences) {
            if (!joined.empty()) joined += " ";
            joined += s.raw_text;
        }
        CHECK(squeeze(joined) == squeeze(text));
        for (const auto& s : sentences) {
            CHECK(extract_citations(s.text).citations.empty()); // no syntax survives
        }
    }
}

TEST_CASE("20-sentence fixture matches the hand-segmented gold file") {
    const std::string text = read_file(testutil::fixtures_dir() + "/segmentation_response.txt");
    const auto gold =
        nlohmann::json::parse(read_file(testutil::fixtures_dir() + "/segmentation_gold.json"));
    const auto sentences = segment_sentences(squeeze(text));
    const auto& expected = gold["sentences"];
    REQUIRE(sentences.size() == expected.size());
    for (std::size_t i = 0; i < sentences.size(); ++i) {
        CHECK(sentences[i].raw_text == expected[i]["raw_text"].get<std::string>());
        CHECK(sentences[i].citations.size() == expected[i]["citations"].get<std::size_t>());
    }
}

TEST_CASE("parse_response extracts reasoning block and answer letter") {
    const Response r = parse_response("Reasoning: X (visual, 0:05). Answer: B", "q1");
    CHECK(r.question_id == "q1");
    REQUIRE(r.sentences.size() == 1);
    CHECK(r.sentences[0].citations.size() == 1);
    CHECK(r.answer_letter == 'B');

    CHECK(parse_response("answer: c", "q").answer_letter == 'C');
    CHECK_FALSE(parse_response("no marker at all here", "q").answer_letter.has_value());
    CHECK(parse_response("Answer: The answer is B", "q").answer_letter == 'B');
    CHECK(parse_response("Reasoning: ok. Answer: (D)", "q").answer_letter == 'D');
    // letters beyond E never match
    CHECK_FALSE(parse_response("Answer: F", "q").answer_letter.has_value());

    // without a Reasoning marker the whole prefix is the reasoning block
    const Response whole = parse_response("A bird lands (visual, 0:02). Answer: A", "q");
    REQUIRE(whole.sentences.size() == 1);
    CHECK(whole.answer_letter == 'A');
}

TEST_CASE("scan_citation_groups keeps duplicates and order") {
    const auto groups =
        scan_citation_groups("A (visual, 0:10). B (visual, 0:10). C (audio, 0:02-0:04).");
    REQUIRE(groups.size() == 3);
    CHECK(groups[0] == groups[1]);
    CHECK(groups[2][0].modality == Modality::audio);
}

TEST_CASE("modality parsing is strict") {
    CHECK(parse_modality("visual") == Modality::visual);
    CHECK(parse_modality("AUDIO") == Modality::audio);
    CHECK_THROWS_AS(parse_modality("video"), ParseError);
    CHECK_THROWS_AS(parse_modality("text"), ParseError);
}
