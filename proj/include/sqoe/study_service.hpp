// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "sqoe/dataset.hpp"
#include "sqoe/error.hpp"

namespace sqoe {

inline constexpr int kApiSchemaVersion = 1;
inline constexpr int kStudyBatchSize = 25;

enum class SessionState { active, on_break, complete };
enum class DisplayedChoice { first, second };

std::string_view to_string(SessionState s) noexcept;
SessionState parse_session_state(std::string_view s);
std::string_view to_string(DisplayedChoice c) noexcept;
DisplayedChoice parse_displayed_choice(std::string_view s);

/// Maps what the annotator saw to the canonical variant. A set arrangement
/// bit means B was shown first.
inline Choice deflip(DisplayedChoice shown, bool flipped) noexcept {
    const Choice c = shown == DisplayedChoice::first ? Choice::A : Choice::B;
    return flipped ? flip(c) : c;
}

struct StudySession {
    std::string session_id;
    std::string annotator_id;
    Medium medium = Medium::toggle;
    std::uint64_t seed = 0;
    std::vector<std::string> sample_order;
    std::vector<bool> arrangement_bits;
    std::size_t cursor = 0;
    int batch_size = kStudyBatchSize;
    int since_break = 0;  // submissions accepted since the last acknowledged break
    SessionState state = SessionState::active;
    std::size_t breaks_prompted = 0;

    /// Full persisted record, including the arrangement bits.
    [[nodiscard]] nlohmann::json to_json() const;
    static StudySession from_json(const nlohmann::json& j);
    /// What clients see: no arrangement bits, no canonical labels.
    [[nodiscard]] nlohmann::json public_json() const;
};

/// Seeded layout: permutation of `sample_ids` plus one arrangement bit each.
StudySession make_session_layout(const std::vector<std::string>& sample_ids, std::uint64_t seed);

/// Service-level failure carrying the HTTP status it maps to.
class StudyError : public Error {
public:
    StudyError(int status, std::string code, const std::string& message)
        : Error(status == 404   ? ErrorKind::not_found
                : status == 400 ? ErrorKind::invalid_argument
                                : ErrorKind::state,
                message),
          status_(status),
          code_(std::move(code)) {}
    [[nodiscard]] int status() const noexcept { return status_; }
    [[nodiscard]] const std::string& code() const noexcept { return code_; }

private:
    int status_;
    std::string code_;
};

struct MediaRef {
    std::filesystem::path file;
};

/// 2AFC study runner over one manifest. Sessions persist under
/// `data_dir/sessions/`, judgments append to `data_dir/judgments.jsonl`, and
/// both are replayed when the service is reopened.
class StudyService {
public:
    using Clock = std::function<Timestamp()>;

    StudyService(const std::filesystem::path& manifest_path, std::filesystem::path data_dir,
                 std::uint64_t seed, Clock clock = now_utc);

    [[nodiscard]] std::size_t sample_count() const noexcept { return samples_.size(); }

    /// Without `seed`, one is derived from the service seed, the annotator and a counter.
    StudySession create_session(const std::string& annotator_id, Medium medium,
                                std::optional<std::uint64_t> seed = std::nullopt);
    [[nodiscard]] StudySession session(const std::string& session_id) const;
    [[nodiscard]] nlohmann::json next_item(const std::string& session_id) const;
    nlohmann::json submit(const std::string& session_id, const std::string& sample_id,
                          DisplayedChoice shown, std::optional<Medium> medium = std::nullopt);
    StudySession acknowledge_break(const std::string& session_id);

    /// Resolves /media/{session}/{index}/{first|second}/{L|R}.png.
    [[nodiscard]] MediaRef media(const std::string& session_id, std::size_t index,
                                 DisplayedChoice which, char eye) const;

    /// Manifest samples with every persisted judgment attached.
    [[nodiscard]] std::vector<Sample2AFC> annotated_samples() const;
    /// Writes annotated_samples() as JSONL. Image paths stay relative to the
    /// source manifest, so the default target sits next to it.
    std::filesystem::path export_manifest(std::filesystem::path out_path = {}) const;

private:
    struct JournalEntry {
        std::string session_id;
        std::size_t index = 0;
        std::string sample_id;
        Judgment judgment;
    };

    StudySession& find(const std::string& session_id);
    [[nodiscard]] const StudySession& find(const std::string& session_id) const;
    void persist(const StudySession& s) const;
    void append_journal(const JournalEntry& e) const;
    void replay();
    static void advance(StudySession& s);

    std::filesystem::path manifest_path_;
    std::filesystem::path data_dir_;
    std::uint64_t seed_;
    Clock clock_;
    std::vector<Sample2AFC> samples_;
    std::map<std::string, std::size_t> sample_index_;
    std::map<std::string, StudySession> sessions_;
    std::vector<JournalEntry> journal_;
    std::uint64_t counter_ = 0;
    mutable std::mutex mutex_;
};

}  // namespace sqoe
