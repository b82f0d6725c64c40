// SPDX-License-Identifier: Apache-2.0

#include "sqoe/study_service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "sqoe/rng.hpp"

namespace sqoe {

std::string_view to_string(SessionState s) noexcept {
    switch (s) {
        case SessionState::active: return "active";
        case SessionState::on_break: return "on_break";
        case SessionState::complete: return "complete";
    }
    return "unknown";
}

SessionState parse_session_state(std::string_view s) {
    for (auto v : {SessionState::active, SessionState::on_break, SessionState::complete}) {
        if (to_string(v) == s) {
            return v;
        }
    }
    fail(ErrorKind::parse, "unknown session state '" + std::string(s) + "'");
}

std::string_view to_string(DisplayedChoice c) noexcept {
    return c == DisplayedChoice::first ? "first" : "second";
}

DisplayedChoice parse_displayed_choice(std::string_view s) {
    if (s == "first" || s == "1") {
        return DisplayedChoice::first;
    }
    if (s == "second" || s == "2") {
        return DisplayedChoice::second;
    }
    throw StudyError(400, "bad_choice", "displayed_choice must be 'first' or 'second'");
}

nlohmann::json StudySession::to_json() const {
    std::vector<int> bits(arrangement_bits.begin(), arrangement_bits.end());
    return {{"schema_version", kApiSchemaVersion},
            {"session_id", session_id},
            {"annotator_id", annotator_id},
            {"medium", to_string(medium)},
            {"seed", seed},
            {"sample_order", sample_order},
            {"arrangement_bits", bits},
            {"cursor", cursor},
            {"batch_size", batch_size},
            {"since_break", since_break},
            {"state", to_string(state)},
            {"breaks_prompted", breaks_prompted}};
}

StudySession StudySession::from_json(const nlohmann::json& j) {
    StudySession s;
    s.session_id = j.at("session_id").get<std::string>();
    s.annotator_id = j.at("annotator_id").get<std::string>();
    s.medium = parse_medium(j.at("medium").get<std::string>());
    s.seed = j.at("seed").get<std::uint64_t>();
    s.sample_order = j.at("sample_order").get<std::vector<std::string>>();
    for (int b : j.at("arrangement_bits").get<std::vector<int>>()) {
        s.arrangement_bits.push_back(b != 0);
    }
    s.cursor = j.at("cursor").get<std::size_t>();
    s.batch_size = j.value("batch_size", kStudyBatchSize);
    s.since_break = j.value("since_break", 0);
    s.state = parse_session_state(j.at("state").get<std::string>());
    s.breaks_prompted = j.value("breaks_prompted", std::size_t{0});
    require(s.arrangement_bits.size() == s.sample_order.size() &&
                s.cursor <= s.sample_order.size(),
            ErrorKind::parse, "corrupt session record '" + s.session_id + "'");
    return s;
}

nlohmann::json StudySession::public_json() const {
    return {{"session_id", session_id},
            {"annotator_id", annotator_id},
            {"medium", to_string(medium)},
            {"cursor", cursor},
            {"total", sample_order.size()},
            {"batch_size", batch_size},
            {"state", to_string(state)}};
}

StudySession make_session_layout(const std::vector<std::string>& sample_ids, std::uint64_t seed) {
    StudySession s;
    s.seed = seed;
    s.sample_order = sample_ids;
    Rng order_rng(mix_seed(seed, 0x0de7));
    order_rng.shuffle(s.sample_order);
    Rng bit_rng(mix_seed(seed, 0xa770));
    s.arrangement_bits.reserve(s.sample_order.size());
    for (std::size_t i = 0; i < s.sample_order.size(); ++i) {
        s.arrangement_bits.push_back(bit_rng.bernoulli(0.5));
    }
    s.state = s.sample_order.empty() ? SessionState::complete : SessionState::active;
    return s;
}

// ---- service -------------------------------------------------------------------------

namespace {

constexpr const char* kJournalName = "judgments.jsonl";

void write_atomic(const std::filesystem::path& path, const std::string& text) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), ErrorKind::io, "cannot write '" + tmp + "'");
        out << text;
        out.flush();
        require(out.good(), ErrorKind::io, "failed writing '" + tmp + "'");
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

StudyService::StudyService(const std::filesystem::path& manifest_path,
                           std::filesystem::path data_dir, std::uint64_t seed, Clock clock)
    : manifest_path_(manifest_path),
      data_dir_(std::move(data_dir)),
      seed_(seed),
      clock_(std::move(clock)) {
    samples_ = load_scope(manifest_path_);
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        sample_index_.emplace(samples_[i].sample_id, i);
    }
    std::filesystem::create_directories(data_dir_ / "sessions");
    replay();
}

void StudyService::replay() {
    for (const auto& entry : std::filesystem::directory_iterator(data_dir_ / "sessions")) {
        if (entry.path().extension() != ".json") {
            continue;
        }
        std::ifstream in(entry.path());
        auto s = StudySession::from_json(nlohmann::json::parse(in));
        sessions_.emplace(s.session_id, std::move(s));
    }
    counter_ = sessions_.size();

    const auto journal = data_dir_ / kJournalName;
    std::ifstream in(journal);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        JournalEntry e;
        try {
            const auto j = nlohmann::json::parse(line);
            e.session_id = j.at("session_id").get<std::string>();
            e.index = j.at("index").get<std::size_t>();
            e.sample_id = j.at("sample_id").get<std::string>();
            e.judgment = j.at("judgment").get<Judgment>();
        } catch (const std::exception& ex) {
            // A torn final line is the only expected corruption; anything else is fatal.
            require(in.peek() == EOF, ErrorKind::parse,
                    journal.string() + ":" + std::to_string(line_no) + ": " + ex.what());
            break;
        }
        const auto it = sessions_.find(e.session_id);
        require(it != sessions_.end(), ErrorKind::parse,
                journal.string() + ":" + std::to_string(line_no) + ": unknown session '" +
                    e.session_id + "'");
        auto& s = it->second;
        // The journal is written before the session file, so it may run ahead by one.
        if (e.index == s.cursor && s.state == SessionState::active &&
            s.sample_order[s.cursor] == e.sample_id) {
            advance(s);
            persist(s);
        }
        require(e.index < s.cursor, ErrorKind::parse,
                journal.string() + ":" + std::to_string(line_no) +
                    ": judgment does not match the session record");
        journal_.push_back(std::move(e));
    }
}

void StudyService::advance(StudySession& s) {
    s.cursor += 1;
    s.since_break += 1;
    if (s.since_break >= s.batch_size || s.cursor == s.sample_order.size()) {
        s.state = SessionState::on_break;
        s.breaks_prompted += 1;
    }
}

StudySession& StudyService::find(const std::string& session_id) {
    const auto it = sessions_.find(session_id);
    if (it == sessions_.end()) {
        throw StudyError(404, "unknown_session", "unknown session '" + session_id + "'");
    }
    return it->second;
}

const StudySession& StudyService::find(const std::string& session_id) const {
    return const_cast<StudyService*>(this)->find(session_id);
}

void StudyService::persist(const StudySession& s) const {
    write_atomic(data_dir_ / "sessions" / (s.session_id + ".json"), s.to_json().dump(2) + "\n");
}

void StudyService::append_journal(const JournalEntry& e) const {
    const nlohmann::json j = {{"schema_version", kApiSchemaVersion},
                              {"session_id", e.session_id},
                              {"index", e.index},
                              {"sample_id", e.sample_id},
                              {"judgment", e.judgment}};
    const std::string line = j.dump() + "\n";
    const auto path = (data_dir_ / kJournalName).string();
    const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    require(fd >= 0, ErrorKind::io, "cannot open '" + path + "': " + std::strerror(errno));
    // One write per line keeps appends atomic with respect to other writers.
    const auto n = ::write(fd, line.data(), line.size());
    const bool ok = n == static_cast<ssize_t>(line.size()) && ::fsync(fd) == 0;
    ::close(fd);
    require(ok, ErrorKind::io, "failed to append judgment to '" + path + "'");
}

StudySession StudyService::create_session(const std::string& annotator_id, Medium medium,
                                          std::optional<std::uint64_t> seed) {
    if (annotator_id.empty()) {
        throw StudyError(400, "bad_request", "annotator_id must be non-empty");
    }
    std::lock_guard lock(mutex_);
    Fnv1a h;
    h.update(annotator_id);
    const auto layout_seed = seed ? *seed : mix_seed(mix_seed(seed_, h.digest()), counter_);
    std::vector<std::string> ids;
    ids.reserve(samples_.size());
    for (const auto& s : samples_) {
        ids.push_back(s.sample_id);
    }
    StudySession s = make_session_layout(ids, layout_seed);
    s.annotator_id = annotator_id;
    s.medium = medium;
    do {
        char buf[24];
        std::snprintf(buf, sizeof(buf), "s%016llx",
                      static_cast<unsigned long long>(mix_seed(mix_seed(seed_, 0x5e55), counter_++) ^
                                                      h.digest()));
        s.session_id = buf;
    } while (sessions_.count(s.session_id) != 0);
    persist(s);
    sessions_.emplace(s.session_id, s);
    return s;
}

StudySession StudyService::session(const std::string& session_id) const {
    std::lock_guard lock(mutex_);
    return find(session_id);
}

nlohmann::json StudyService::next_item(const std::string& session_id) const {
    std::lock_guard lock(mutex_);
    const auto& s = find(session_id);
    nlohmann::json j = {{"schema_version", kApiSchemaVersion},
                        {"session_id", s.session_id},
                        {"state", to_string(s.state)},
                        {"break_flag", s.state == SessionState::on_break},
                        {"progress",
                         {{"index", s.cursor},
                          {"total", s.sample_order.size()},
                          {"batch_size", s.batch_size},
                          {"in_batch", s.since_break}}},
                        {"item", nullptr}};
    if (s.state != SessionState::active) {
        return j;
    }
    const auto base = "/media/" + s.session_id + "/" + std::to_string(s.cursor) + "/";
    auto pair = [&](const char* which) {
        return nlohmann::json{{"left", base + which + "/L.png"}, {"right", base + which + "/R.png"}};
    };
    j["item"] = {{"index", s.cursor},
                 {"sample_id", s.sample_order[s.cursor]},
                 {"first", pair("first")},
                 {"second", pair("second")},
                 {"display_modes", {"toggle", "anaglyph"}},
                 {"medium", to_string(s.medium)}};
    return j;
}

nlohmann::json StudyService::submit(const std::string& session_id, const std::string& sample_id,
                                    DisplayedChoice shown, std::optional<Medium> medium) {
    std::lock_guard lock(mutex_);
    auto& s = find(session_id);
    if (s.state == SessionState::complete) {
        throw StudyError(410, "session_complete", "session '" + session_id + "' is complete");
    }
    if (s.state == SessionState::on_break) {
        throw StudyError(409, "on_break", "session is on a break; acknowledge it first");
    }
    if (s.sample_order[s.cursor] != sample_id) {
        const auto begin = s.sample_order.begin();
        const bool seen = std::find(begin, begin + static_cast<std::ptrdiff_t>(s.cursor), sample_id) !=
                          begin + static_cast<std::ptrdiff_t>(s.cursor);
        if (seen) {
            throw StudyError(409, "duplicate", "sample '" + sample_id + "' was already judged");
        }
        throw StudyError(409, "out_of_order",
                         "expected sample '" + s.sample_order[s.cursor] + "', got '" + sample_id + "'");
    }
    JournalEntry e;
    e.session_id = s.session_id;
    e.index = s.cursor;
    e.sample_id = sample_id;
    e.judgment.annotator_id = s.annotator_id;
    e.judgment.choice = deflip(shown, s.arrangement_bits[s.cursor]);
    e.judgment.medium = medium.value_or(s.medium);
    e.judgment.timestamp = clock_();
    append_journal(e);
    journal_.push_back(e);
    advance(s);
    persist(s);
    return {{"schema_version", kApiSchemaVersion},
            {"ack", true},
            {"session_id", s.session_id},
            {"cursor", s.cursor},
            {"state", to_string(s.state)},
            {"break_flag", s.state == SessionState::on_break}};
}

StudySession StudyService::acknowledge_break(const std::string& session_id) {
    std::lock_guard lock(mutex_);
    auto& s = find(session_id);
    if (s.state != SessionState::on_break) {
        throw StudyError(409, "not_on_break", "session '" + session_id + "' is not on a break");
    }
    s.since_break = 0;
    s.state = s.cursor == s.sample_order.size() ? SessionState::complete : SessionState::active;
    persist(s);
    return s;
}

MediaRef StudyService::media(const std::string& session_id, std::size_t index,
                             DisplayedChoice which, char eye) const {
    std::lock_guard lock(mutex_);
    const auto& s = find(session_id);
    if (index >= s.sample_order.size()) {
        throw StudyError(404, "unknown_item", "item index out of range");
    }
    if (eye != 'L' && eye != 'R') {
        throw StudyError(404, "unknown_item", "eye must be L or R");
    }
    const auto& sample = samples_[sample_index_.at(s.sample_order[index])];
    const Choice canonical = deflip(which, s.arrangement_bits[index]);
    const auto& v = canonical == Choice::A ? sample.variant_a : sample.variant_b;
    return {manifest_path_.parent_path() / (eye == 'L' ? v.left_path : v.right_path)};
}

std::vector<Sample2AFC> StudyService::annotated_samples() const {
    std::lock_guard lock(mutex_);
    auto out = samples_;
    for (const auto& e : journal_) {
        out[sample_index_.at(e.sample_id)].judgments.push_back(e.judgment);
    }
    return out;
}

std::filesystem::path StudyService::export_manifest(std::filesystem::path out_path) const {
    if (out_path.empty()) {
        out_path = manifest_path_.parent_path() / "scope_manifest.annotated.jsonl";
    }
    std::string text;
    for (const auto& s : annotated_samples()) {
        text += nlohmann::json(s).dump();
        text += '\n';
    }
    write_atomic(out_path, text);
    return out_path;
}

}  // namespace sqoe
