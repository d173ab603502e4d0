#pragma once

#include <memory>
#include <string>

#include "ielts/service/platform.hpp"

namespace ielts::service {

// HTTP status for an error code carried in the {code, message} payload.
int http_status(const std::string& code);

// JSON API over a Platform:
//   GET  /health
//   POST /sessions                      {name?, age?, section?, task_id?}
//   GET  /sessions/{id}
//   POST /sessions/{id}/dialogue        {message}
//   POST /sessions/{id}/submissions     {text}
//   GET  /sessions/{id}/submissions
//   GET  /sessions/{id}/progress
//   GET  /tasks, GET /tasks/{id}?section=
class HttpService {
public:
    explicit HttpService(Platform& platform, std::size_t max_body_bytes = 4 << 20);
    ~HttpService();
    HttpService(const HttpService&) = delete;
    HttpService& operator=(const HttpService&) = delete;

    // Binds; port 0 picks a free port. Returns the bound port.
    int bind(const std::string& host, int port);
    // Serves until stop(); call after bind().
    void listen();
    // bind() + listen() on a background thread.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace ielts::service
