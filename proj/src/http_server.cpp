// SPDX-License-Identifier: Apache-2.0

#include "sqoe/http_server.hpp"

#include <fstream>
#include <iterator>

#include "httplib.h"
#include "json.hpp"

#include "sqoe/study_service.hpp"

namespace sqoe {

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code,
                const std::string& message) {
    send_json(res, status,
              {{"schema_version", kApiSchemaVersion},
               {"error", {{"code", code}, {"message", message}}}});
}

int status_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::not_found: return 404;
        case ErrorKind::invalid_argument:
        case ErrorKind::parse:
        case ErrorKind::dimension_mismatch: return 400;
        case ErrorKind::state: return 409;
        default: return 500;
    }
}

/// Runs a handler and turns exceptions into JSON error responses.
template <typename F>
httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const StudyError& e) {
            send_error(res, e.status(), e.code(), e.what());
        } catch (const Error& e) {
            send_error(res, status_for(e.kind()), std::string(to_string(e.kind())), e.what());
        } catch (const nlohmann::json::exception& e) {
            send_error(res, 400, "bad_request", e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "internal", e.what());
        }
    };
}

nlohmann::json body_json(const httplib::Request& req) {
    if (req.body.empty()) {
        return nlohmann::json::object();
    }
    auto j = nlohmann::json::parse(req.body);
    if (!j.is_object()) {
        throw StudyError(400, "bad_request", "request body must be a JSON object");
    }
    return j;
}

}  // namespace

void register_routes(httplib::Server& server, StudyService& service) {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Get("/health", guarded([&service](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200,
                  {{"schema_version", kApiSchemaVersion},
                   {"status", "ok"},
                   {"samples", service.sample_count()}});
    }));

    server.Post("/sessions", guarded([&service](const httplib::Request& req, httplib::Response& res) {
        const auto j = body_json(req);
        const auto annotator = j.value("annotator_id", std::string{});
        const auto medium = parse_medium(j.value("medium", std::string("toggle")));
        std::optional<std::uint64_t> seed;
        if (j.contains("seed") && !j.at("seed").is_null()) {
            seed = j.at("seed").get<std::uint64_t>();
        }
        const auto s = service.create_session(annotator, medium, seed);
        send_json(res, 201, {{"schema_version", kApiSchemaVersion}, {"session", s.public_json()}});
    }));

    server.Get(R"(/sessions/([^/]+))", guarded([&service](const httplib::Request& req,
                                                          httplib::Response& res) {
        send_json(res, 200,
                  {{"schema_version", kApiSchemaVersion},
                   {"session", service.session(req.matches[1]).public_json()}});
    }));

    server.Get(R"(/sessions/([^/]+)/next)", guarded([&service](const httplib::Request& req,
                                                               httplib::Response& res) {
        send_json(res, 200, service.next_item(req.matches[1]));
    }));

    server.Post(R"(/sessions/([^/]+)/judgments)", guarded([&service](const httplib::Request& req,
                                                                     httplib::Response& res) {
        const auto j = body_json(req);
        if (!j.contains("sample_id") || !j.contains("displayed_choice")) {
            throw StudyError(400, "bad_request", "sample_id and displayed_choice are required");
        }
        std::optional<Medium> medium;
        if (j.contains("medium") && !j.at("medium").is_null()) {
            medium = parse_medium(j.at("medium").get<std::string>());
        }
        send_json(res, 200,
                  service.submit(req.matches[1], j.at("sample_id").get<std::string>(),
                                 parse_displayed_choice(j.at("displayed_choice").get<std::string>()),
                                 medium));
    }));

    server.Post(R"(/sessions/([^/]+)/ack-break)", guarded([&service](const httplib::Request& req,
                                                                     httplib::Response& res) {
        send_json(res, 200,
                  {{"schema_version", kApiSchemaVersion},
                   {"session", service.acknowledge_break(req.matches[1]).public_json()}});
    }));

    server.Get(R"(/media/([^/]+)/(\d+)/(first|second)/(L|R)\.png)",
               guarded([&service](const httplib::Request& req, httplib::Response& res) {
        const auto ref = service.media(req.matches[1], std::stoul(req.matches[2]),
                                       parse_displayed_choice(req.matches[3].str()),
                                       req.matches[4].str()[0]);
        std::ifstream in(ref.file, std::ios::binary);
        if (!in) {
            throw StudyError(404, "missing_media", "image file is missing");
        }
        std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        res.status = 200;
        res.set_content(std::move(bytes), "image/png");
    }));
}

void serve(StudyService& service, const std::string& host, int port) {
    httplib::Server server;
    register_routes(server, service);
    require(server.listen(host, port), ErrorKind::io,
            "cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace sqoe
