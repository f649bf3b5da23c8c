#pragma once

#include "murgat/citation.hpp"

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace murgat {

struct ManifestEntry {
    std::optional<std::string> video_path;
    std::optional<std::string> audio_path;
    int duration_s = 0;

    const std::optional<std::string>& path_for(Modality m) const {
        return m == Modality::visual ? video_path : audio_path;
    }
};

// question_id -> media tracks.  Loaded from a JSONL file, one object per line:
//   {"question_id": ..., "video_path": ..., "audio_path": ..., "duration_s": ...}
struct SourceManifest {
    std::map<std::string, ManifestEntry> entries;

    bool contains(const std::string& qid) const { return entries.count(qid) > 0; }
    const ManifestEntry& at(const std::string& qid) const;
};

SourceManifest load_manifest(const std::string& path);

struct SegmentHandle {
    std::string question_id;
    Citation citation;          // as cited, before window expansion or clamping
    std::string clip_path;
    std::string content_digest; // sha256 of the clip bytes

    friend bool operator==(const SegmentHandle&, const SegmentHandle&) = default;
};

struct MediaStoreConfig {
    std::string cache_dir;
    // External extractor template; placeholders {input} {start} {end} {output}.
    std::string extractor_command;
    int padding_s = 0;           // context added around the cited span
    int max_extractor_procs = 4; // concurrent subprocess bound
};

// Resolves citations into concrete media clips through the configured
// extractor, caching by (question_id, modality, span, padding).  Point
// citations expand to a 1 s window; spans overrunning the track clamp to its
// duration with a warning.
class MediaStore {
public:
    MediaStore(SourceManifest manifest, MediaStoreConfig cfg);
    ~MediaStore();

    // Throws ModalityMissingError when the manifest has no track for the
    // citation's modality (callers score the citation as unsupported), and
    // Error on unknown question ids or extractor failures.
    SegmentHandle resolve_segment(const std::string& qid, const Citation& c,
                                  std::vector<std::string>* warnings = nullptr);

    const SourceManifest& manifest() const { return manifest_; }

    // The extraction window actually used for a citation against a track of
    // the given duration (expansion, padding, clamping). Exposed for tests.
    TimeSpan effective_window(const TimeSpan& span, int duration_s,
                              std::vector<std::string>* warnings = nullptr) const;

private:
    struct Impl;
    SourceManifest manifest_;
    MediaStoreConfig cfg_;
    std::unique_ptr<Impl> impl_;
};

} // namespace murgat
