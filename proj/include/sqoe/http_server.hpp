// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

namespace httplib {
class Server;
}

namespace sqoe {

class StudyService;

/// Installs the study API on `server`:
///   POST /sessions, GET /sessions/{id}, GET /sessions/{id}/next,
///   POST /sessions/{id}/judgments, POST /sessions/{id}/ack-break,
///   GET /health, GET /media/{id}/{index}/{first|second}/{L|R}.png
void register_routes(httplib::Server& server, StudyService& service);

/// Blocks serving on host:port until the process is stopped.
void serve(StudyService& service, const std::string& host, int port);

}  // namespace sqoe
