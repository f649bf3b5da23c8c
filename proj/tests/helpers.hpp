#pragma once

#include "murgat/citation.hpp"
#include "murgat/io_util.hpp"
#include "murgat/media_store.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

namespace testutil {

namespace fs = std::filesystem;

inline std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v ? v : fallback;
}

inline std::string repo_root() { return env_or("MURGAT_ROOT", "."); }
inline std::string prompts_dir() { return repo_root() + "/assets/prompts"; }
inline std::string fixtures_dir() { return repo_root() + "/tests/fixtures"; }
inline std::string cli_path() { return env_or("MURGAT_CLI", "./murgat"); }

struct TempDir {
    fs::path path;

    TempDir() {
        static std::atomic<int> counter{0};
        path = fs::temp_directory_path() /
               ("murgat_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter.fetch_add(1)));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }

    std::string file(const std::string& name, const std::string& content) const {
        const fs::path p = path / name;
        murgat::write_file_atomic(p.string(), content);
        return p.string();
    }
    std::string sub(const std::string& name) const { return (path / name).string(); }
};

// Extractor stand-in: the "clip" is a text record of what was asked for, so
// window math is observable and digests differ per window.
inline const char* kStubExtractor =
    "printf 'CLIP input=%s start=%s end=%s' {input} {start} {end} > {output}";

// Manifest with both tracks (stub media files created inside the dir).
inline murgat::SourceManifest make_manifest(const TempDir& dir,
                                            const std::vector<std::string>& qids,
                                            int duration_s = 120) {
    murgat::SourceManifest m;
    for (const auto& qid : qids) {
        murgat::ManifestEntry e;
        e.video_path = dir.file(qid + "_video.mp4", "fake video bytes for " + qid);
        e.audio_path = dir.file(qid + "_audio.wav", "fake audio bytes for " + qid);
        e.duration_s = duration_s;
        m.entries[qid] = e;
    }
    return m;
}

inline murgat::Citation random_citation(std::mt19937& rng) {
    std::uniform_int_distribution<int> mod(0, 1);
    std::uniform_int_distribution<int> start(0, 7199);
    std::uniform_int_distribution<int> len(0, 120);
    murgat::Citation c;
    c.modality = mod(rng) == 0 ? murgat::Modality::visual : murgat::Modality::audio;
    c.span.start_s = start(rng);
    c.span.end_s = c.span.start_s + len(rng);
    return c;
}

// ── Scripted end-to-end corpus ──────────────────────────────────────────────
// n tasks answered by a mock generator; odd tasks cite both sentences and
// answer correctly (MuRGAt 2/3), even tasks leave one sentence uncited and
// answer wrong (MuRGAt 1/4).

struct MockCorpus {
    std::string tasks_path;
    std::string manifest_path;
    std::string script_path;
    std::string config_path;
    std::string gold_scores_path; // response-level murgat_score golds
};

inline MockCorpus build_mock_corpus(const TempDir& dir, int n_tasks) {
    using nlohmann::json;
    MockCorpus corpus;

    std::string tasks, manifest;
    json rules = json::array();
    // meta-eval baseline scorers first: their prompts embed the question text,
    // so the per-task generation rules would shadow them otherwise
    rules.push_back({{"prompt_contains", "Rate the overall quality"}, {"response", "4"}});
    rules.push_back({{"prompt_contains", "Score the response below"},
                     {"response", "coverage: 0.8\nrecall: 0.7\nprecision: 0.6"}});
    std::string gold_scores;
    for (int i = 0; i < n_tasks; ++i) {
        const std::string qid = "q" + std::to_string(i);
        const bool odd = i % 2 == 1;
        tasks += json{{"question_id", qid},
                      {"question", "What happens in scene " + std::to_string(i) + "?"},
                      {"options", {"first thing", "second thing", "third thing"}},
                      {"gold_answer", "B"}}
                     .dump() +
                 "\n";
        manifest += json{{"question_id", qid},
                         {"video_path", dir.file(qid + "_v.mp4", "video " + qid)},
                         {"audio_path", dir.file(qid + "_a.wav", "audio " + qid)},
                         {"duration_s", 60}}
                        .dump() +
                    "\n";
        const std::string second =
            odd ? "The scene shows banner " + std::to_string(i) + " (audio, 0:10-0:12)."
                : "The scene shows banner " + std::to_string(i) + ".";
        rules.push_back(
            {{"prompt_contains", "Question: What happens in scene " + std::to_string(i) + "?"},
             {"response", "Reasoning: An actor performs action " + std::to_string(i) +
                              " on stage (visual, 0:05). " + second +
                              " Therefore, the answer follows. Answer: " +
                              (odd ? "B" : "C")}});
        gold_scores += json{{"unit_id", qid},
                            {"unit_kind", "response"},
                            {"gold", odd ? 2.0 / 3.0 : 0.25}}
                           .dump() +
                       "\n";
    }
    // verifiability
    rules.push_back({{"prompt_contains", "Sentence: An actor performs"}, {"response", "YES"}});
    rules.push_back({{"prompt_contains", "Sentence: The scene shows"}, {"response", "YES"}});
    // decomposition (decontextualization falls back via the default response)
    rules.push_back(
        {{"prompt_contains", "Current Sentence:\nAn actor performs"},
         {"response", "- An actor performs an action (visual, 0:05).\n- The action happens on "
                      "stage (visual, 0:05).\n"}});
    rules.push_back({{"prompt_contains", "Current Sentence:\nThe scene shows"},
                     {"response", "- The scene shows a banner (audio, 0:10-0:12).\n"}});
    // entailment
    rules.push_back(
        {{"prompt_contains", "Atomic Fact: An actor performs an action."}, {"response", "YES"}});
    rules.push_back(
        {{"prompt_contains", "Atomic Fact: The action happens on stage."}, {"response", "NO"}});
    rules.push_back(
        {{"prompt_contains", "Atomic Fact: The scene shows a banner."}, {"response", "YES"}});

    const json script = {{"default_response", "NO"}, {"rules", rules}};
    corpus.tasks_path = dir.file("tasks.jsonl", tasks);
    corpus.manifest_path = dir.file("manifest.jsonl", manifest);
    corpus.script_path = dir.file("mock.json", script.dump(2));
    corpus.gold_scores_path = dir.file("gold_scores.jsonl", gold_scores);

    const json config = {{"prompt_dir", prompts_dir()},
                         {"cache_dir", dir.sub("cache")},
                         {"concurrency", 4},
                         {"extractor_command", kStubExtractor}};
    corpus.config_path = dir.file("config.json", config.dump(2));
    return corpus;
}

} // namespace testutil
