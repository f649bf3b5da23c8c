#include "murgat/media_store.hpp"

#include "murgat/digest.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <condition_variable>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <unordered_map>

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace murgat {

const ManifestEntry& SourceManifest::at(const std::string& qid) const {
    auto it = entries.find(qid);
    if (it == entries.end()) throw Error("question id not in manifest: " + qid);
    return it->second;
}

SourceManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("manifest file not found: " + path);
    SourceManifest m;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const Json::exception& e) {
            throw ParseError("manifest line " + std::to_string(lineno) + ": " + e.what());
        }
        const std::string where = "manifest line " + std::to_string(lineno);
        if (!j.contains("question_id"))
            throw ValidationError(where + ": missing question_id");
        ManifestEntry e;
        if (j.contains("video_path") && !j["video_path"].is_null())
            e.video_path = j["video_path"].get<std::string>();
        if (j.contains("audio_path") && !j["audio_path"].is_null())
            e.audio_path = j["audio_path"].get<std::string>();
        if (!e.video_path && !e.audio_path)
            throw ValidationError(where + ": entry has neither video_path nor audio_path");
        e.duration_s = j.value("duration_s", 0);
        if (e.duration_s <= 0)
            throw ValidationError(where + ": duration_s must be positive");
        m.entries[j["question_id"].get<std::string>()] = std::move(e);
    }
    return m;
}

namespace {

std::string shell_quote(const std::string& s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') out += "'\"'\"'";
        else out.push_back(c);
    }
    out += "'";
    return out;
}

std::string substitute(std::string tmpl, const std::string& key, const std::string& value) {
    const std::string needle = "{" + key + "}";
    std::size_t pos = 0;
    while ((pos = tmpl.find(needle, pos)) != std::string::npos) {
        tmpl.replace(pos, needle.size(), value);
        pos += value.size();
    }
    return tmpl;
}

// Bounded counter so extractor subprocesses never exceed the configured limit.
class ProcGate {
public:
    explicit ProcGate(int limit) : limit_(std::max(1, limit)) {}
    void acquire() {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return in_flight_ < limit_; });
        ++in_flight_;
    }
    void release() {
        {
            std::lock_guard lk(mu_);
            --in_flight_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int limit_;
    int in_flight_ = 0;
};

} // namespace

struct MediaStore::Impl {
    std::mutex map_mu;
    std::unordered_map<std::string, SegmentHandle> cache;
    std::unordered_map<std::string, std::unique_ptr<std::mutex>> key_locks;
    ProcGate gate;

    explicit Impl(int procs) : gate(procs) {}

    std::mutex& lock_for(const std::string& key) {
        std::lock_guard lk(map_mu);
        auto& slot = key_locks[key];
        if (!slot) slot = std::make_unique<std::mutex>();
        return *slot;
    }
};

MediaStore::MediaStore(SourceManifest manifest, MediaStoreConfig cfg)
    : manifest_(std::move(manifest)), cfg_(std::move(cfg)),
      impl_(std::make_unique<Impl>(cfg_.max_extractor_procs)) {
    fs::create_directories(fs::path(cfg_.cache_dir) / "clips");
}

MediaStore::~MediaStore() = default;

TimeSpan MediaStore::effective_window(const TimeSpan& span, int duration_s,
                                      std::vector<std::string>* warnings) const {
    int start = span.start_s;
    int end = span.end_s;
    if (start == end) end = start + 1; // minimum extractable window
    start -= cfg_.padding_s;
    end += cfg_.padding_s;
    if (end > duration_s) {
        if (span.end_s > duration_s && warnings)
            warnings->push_back("span " + format_timestamp(span) + " clamped to track duration " +
                                std::to_string(duration_s) + "s");
        end = duration_s;
    }
    if (start < 0) start = 0;
    if (start >= end) start = std::max(0, end - 1);
    return TimeSpan{start, end};
}

SegmentHandle MediaStore::resolve_segment(const std::string& qid, const Citation& c,
                                          std::vector<std::string>* warnings) {
    const ManifestEntry& entry = manifest_.at(qid);
    const auto& track = entry.path_for(c.modality);
    if (!track)
        throw ModalityMissingError("no " + std::string(modality_name(c.modality)) +
                                       " track for question " + qid,
                                   qid);

    const std::string key = sha256_hex({qid, modality_name(c.modality),
                                        std::to_string(c.span.start_s),
                                        std::to_string(c.span.end_s),
                                        std::to_string(cfg_.padding_s)});

    {
        std::lock_guard lk(impl_->map_mu);
        auto it = impl_->cache.find(key);
        if (it != impl_->cache.end()) return it->second;
    }

    std::lock_guard key_lk(impl_->lock_for(key));
    {
        std::lock_guard lk(impl_->map_mu);
        auto it = impl_->cache.find(key);
        if (it != impl_->cache.end()) return it->second;
    }

    const TimeSpan window = effective_window(c.span, entry.duration_s, warnings);
    const fs::path clip = fs::path(cfg_.cache_dir) / "clips" / (key + ".clip");

    if (!fs::exists(clip) || fs::file_size(clip) == 0) {
        std::string cmd = cfg_.extractor_command;
        cmd = substitute(cmd, "input", shell_quote(*track));
        cmd = substitute(cmd, "start", std::to_string(window.start_s));
        cmd = substitute(cmd, "end", std::to_string(window.end_s));
        const fs::path tmp = clip.string() + ".tmp";
        cmd = substitute(cmd, "output", shell_quote(tmp.string()));

        impl_->gate.acquire();
        const int rc = std::system(cmd.c_str());
        impl_->gate.release();
        if (rc != 0)
            throw Error("extractor command failed (exit " + std::to_string(rc) + "): " + cmd);
        if (!fs::exists(tmp) || fs::file_size(tmp) == 0)
            throw Error("extractor produced no output for " + qid + " " + format_citation(c));
        fs::rename(tmp, clip);
    }

    SegmentHandle handle;
    handle.question_id = qid;
    handle.citation = c;
    handle.clip_path = clip.string();
    handle.content_digest = sha256_file_hex(clip.string());

    std::lock_guard lk(impl_->map_mu);
    impl_->cache.emplace(key, handle);
    return handle;
}

} // namespace murgat
