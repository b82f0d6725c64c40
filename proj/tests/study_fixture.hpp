// SPDX-License-Identifier: Apache-2.0
//
// Study fixtures: a small on-disk manifest and a scripted annotator that
// drives the HTTP API end to end.

#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <string>
#include <thread>

#include "json.hpp"

#include "sqoe/dataset.hpp"
#include "sqoe/http_server.hpp"
#include "sqoe/study_service.hpp"
#include "support.hpp"

// Last: <resolv.h>, pulled in by httplib, defines a `_res` macro that breaks Eigen.
#include "httplib.h"

namespace sqoe::fixtures {

/// Writes `n` samples over tiny gradient scenes and returns the manifest path.
inline std::filesystem::path make_study_manifest(const std::filesystem::path& dir, int n,
                                                 std::uint64_t seed = 1) {
    std::vector<StereoImage> sources;
    for (int i = 0; i < n; ++i) {
        sources.push_back(gradient_stereo(8, 6, seed * 1000 + static_cast<std::uint64_t>(i),
                                          "scene" + std::to_string(i)));
    }
    GenerateOptions opt;
    opt.seed = seed;
    const auto samples = generate_samples(sources, opt, DistortionTable::builtin(), dir);
    return save_scope(samples, dir);
}

inline Timestamp fixed_clock() { return Timestamp(std::chrono::milliseconds(1700000000000)); }

/// Study server on an ephemeral loopback port, stopped on destruction.
class TestServer {
public:
    explicit TestServer(StudyService& service) {
        register_routes(server_, service);
        port_ = server_.bind_to_any_port("127.0.0.1");
        require(port_ > 0, ErrorKind::io, "cannot bind a test port");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~TestServer() {
        server_.stop();
        thread_.join();
    }
    TestServer(const TestServer&) = delete;
    TestServer& operator=(const TestServer&) = delete;

    [[nodiscard]] int port() const noexcept { return port_; }

private:
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

struct ScriptOutcome {
    std::string session_id;
    std::size_t judgments_submitted = 0;
    std::size_t break_prompts = 0;
    std::size_t flipped_items = 0;  // items where B was displayed first
    bool completed = false;
    /// Canonical variant the script intended to pick, by sample id.
    std::map<std::string, Choice> intended;
};

/// Plays one session over HTTP. For every item the script decides which
/// canonical variant it prefers, identifies that variant among the displayed
/// pair by comparing the served PNG bytes with the manifest files, and clicks
/// the matching position.
inline ScriptOutcome run_scripted_session(int port, const std::filesystem::path& manifest,
                                          const std::string& annotator, std::uint64_t layout_seed,
                                          Rng& rng) {
    std::map<std::string, Sample2AFC> by_id;
    for (auto& s : load_scope(manifest)) {
        by_id.emplace(s.sample_id, std::move(s));
    }
    httplib::Client client("127.0.0.1", port);
    auto post = [&](const std::string& path, const nlohmann::json& body) {
        auto res = client.Post(path, body.dump(), "application/json");
        require(res != nullptr, ErrorKind::io, "no response from " + path);
        return std::make_pair(res->status, nlohmann::json::parse(res->body));
    };
    auto get = [&](const std::string& path) {
        auto res = client.Get(path);
        require(res != nullptr, ErrorKind::io, "no response from " + path);
        return std::make_pair(res->status, res->body);
    };

    ScriptOutcome out;
    const auto [status, created] =
        post("/sessions", {{"annotator_id", annotator}, {"medium", "toggle"}, {"seed", layout_seed}});
    require(status == 201, ErrorKind::state, "session creation failed: " + created.dump());
    const auto sid = created["session"]["session_id"].get<std::string>();
    out.session_id = sid;
    const auto root = manifest.parent_path();
    for (;;) {
        const auto [st, body] = get("/sessions/" + sid + "/next");
        require(st == 200, ErrorKind::state, "next failed: " + body);
        const auto next = nlohmann::json::parse(body);
        if (next["break_flag"].get<bool>()) {
            ++out.break_prompts;
            post("/sessions/" + sid + "/ack-break", nlohmann::json::object());
            continue;
        }
        if (next["state"] == "complete") {
            out.completed = true;
            break;
        }
        const auto& item = next["item"];
        const auto sample_id = item["sample_id"].get<std::string>();
        const auto& sample = by_id.at(sample_id);
        // One view may be untouched in both variants, so compare the pair.
        const auto shown = get(item["first"]["left"].get<std::string>()).second +
                           get(item["first"]["right"].get<std::string>()).second;
        auto bytes_of = [&](const Variant& v) {
            return read_file(root / v.left_path) + read_file(root / v.right_path);
        };
        const bool a_first = shown == bytes_of(sample.variant_a);
        const bool b_first = shown == bytes_of(sample.variant_b);
        require(a_first != b_first, ErrorKind::state, "cannot tell which variant is shown first");
        out.flipped_items += b_first ? 1 : 0;
        const Choice want = rng.bernoulli(0.5) ? Choice::A : Choice::B;
        out.intended[sample_id] = want;
        const bool click_first = (want == Choice::A) == a_first;
        const auto [js, ack] = post("/sessions/" + sid + "/judgments",
                                    {{"sample_id", sample_id},
                                     {"displayed_choice", click_first ? "first" : "second"}});
        require(js == 200, ErrorKind::state, "judgment rejected: " + ack.dump());
        ++out.judgments_submitted;
    }
    return out;
}

}  // namespace sqoe::fixtures
