#include "ielts/service/http.hpp"

#include <thread>

#include <httplib.h>

#include "ielts/common/error.hpp"

namespace ielts::service {

using nlohmann::json;

int http_status(const std::string& code) {
    if (code == "not_found") return 404;
    if (code == "attempt_limit" || code == "onboarding_incomplete") return 409;
    if (code == "payload_too_large") return 413;
    if (code == "backend_unavailable") return 503;
    if (code == "io_error" || code == "internal") return 500;
    return 400;
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const std::string& code, const std::string& message) {
    send_json(res, http_status(code), {{"code", code}, {"message", message}});
}

json body_of(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    json j;
    try {
        j = json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw InvalidInput("bad_request", std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw InvalidInput("bad_request", "request body must be a JSON object");
    return j;
}

template <class T>
std::optional<T> optional_field(const json& j, const char* key) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    try {
        return j[key].get<T>();
    } catch (const json::exception&) {
        throw InvalidInput("bad_request", std::string("field '") + key + "' has the wrong type");
    }
}

template <class Fn>
httplib::Server::Handler guarded(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
            fn(req, res);
        } catch (const Error& e) {
            send_error(res, e.code(), e.what());
        } catch (const std::exception& e) {
            send_error(res, "internal", e.what());
        }
    };
}

}  // namespace

struct HttpService::Impl {
    Platform& platform;
    httplib::Server server;
    std::thread thread;

    explicit Impl(Platform& p) : platform(p) {}
};

HttpService::HttpService(Platform& platform, std::size_t max_body_bytes) : impl_(std::make_unique<Impl>(platform)) {
    auto& srv = impl_->server;
    Platform& p = platform;
    srv.set_payload_max_length(max_body_bytes);
    srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                             {"Access-Control-Allow-Headers", "Content-Type"},
                             {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    srv.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    srv.Get("/health", guarded([&p](const httplib::Request&, httplib::Response& res) {
                send_json(res, 200,
                          {{"status", "ok"}, {"model_digest", p.scorer().model_digest()}, {"tasks", p.tasks().size()}});
            }));

    srv.Post("/sessions", guarded([&p](const httplib::Request& req, httplib::Response& res) {
                 const auto body = body_of(req);
                 NewSession n;
                 n.name = optional_field<std::string>(body, "name");
                 n.age = optional_field<int>(body, "age");
                 if (auto sec = optional_field<std::string>(body, "section")) n.section = section_from_string(*sec);
                 n.task_id = optional_field<std::string>(body, "task_id");
                 const auto s = p.create_session(n);
                 send_json(res, 201, session_to_json(s, p.transcript(s.id), p.required_words(s)));
             }));

    srv.Get(R"(/sessions/([^/]+))", guarded([&p](const httplib::Request& req, httplib::Response& res) {
                const auto s = p.session(req.matches[1]);
                send_json(res, 200, session_to_json(s, p.transcript(s.id), p.required_words(s)));
            }));

    srv.Post(R"(/sessions/([^/]+)/dialogue)", guarded([&p](const httplib::Request& req, httplib::Response& res) {
                 const auto body = body_of(req);
                 const auto message = optional_field<std::string>(body, "message");
                 if (!message) throw InvalidInput("bad_request", "field 'message' is required");
                 const auto turn = p.dialogue(req.matches[1], *message);
                 send_json(res, 200,
                           {{"reply", turn.reply},
                            {"dialogue_state", to_string(turn.session.stage)},
                            {"session",
                             session_to_json(turn.session, p.transcript(turn.session.id),
                                             p.required_words(turn.session))}});
             }));

    srv.Post(R"(/sessions/([^/]+)/submissions)", guarded([&p](const httplib::Request& req, httplib::Response& res) {
                 const auto body = body_of(req);
                 const auto text = optional_field<std::string>(body, "text");
                 if (!text) throw InvalidInput("bad_request", "field 'text' is required");
                 const auto result = p.submit(req.matches[1], *text);
                 auto out = result.record.to_json();
                 out["attempts_remaining"] = result.attempts_remaining;
                 send_json(res, 201, out);
             }));

    srv.Get(R"(/sessions/([^/]+)/submissions)", guarded([&p](const httplib::Request& req, httplib::Response& res) {
                json out = json::array();
                for (const auto& r : p.submissions(req.matches[1])) out.push_back(r.to_json());
                send_json(res, 200, out);
            }));

    srv.Get(R"(/sessions/([^/]+)/progress)", guarded([&p](const httplib::Request& req, httplib::Response& res) {
                const std::string id = req.matches[1];
                send_json(res, 200, {{"session_id", id}, {"submissions", progress_to_json(p.progress(id))}});
            }));

    srv.Get("/tasks", guarded([&p](const httplib::Request&, httplib::Response& res) {
                json out = json::array();
                for (const auto& t : p.tasks()) out.push_back(t.to_json());
                send_json(res, 200, out);
            }));

    srv.Get(R"(/tasks/([^/]+))", guarded([&p](const httplib::Request& req, httplib::Response& res) {
                const auto& t = p.task(req.matches[1]);
                const auto sec = req.has_param("section") ? section_from_string(req.get_param_value("section"))
                                                          : Section::full;
                send_json(res, 200, t.to_json(sec));
            }));

    srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (!res.body.empty()) return;
        if (res.status == 404) {
            send_error(res, "not_found", "no such route");
        } else if (res.status == 413) {
            send_error(res, "payload_too_large", "request body too large");
        } else {
            const int status = res.status;
            send_json(res, status, {{"code", "http_" + std::to_string(status)}, {"message", httplib::status_message(status)}});
        }
    });
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
    auto& srv = impl_->server;
    if (port == 0) {
        const int bound = srv.bind_to_any_port(host);
        if (bound < 0) throw IoError("cannot bind " + host);
        return bound;
    }
    if (!srv.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void HttpService::listen() { impl_->server.listen_after_bind(); }

int HttpService::start(const std::string& host, int port) {
    const int bound = bind(host, port);
    impl_->thread = std::thread([this] { listen(); });
    impl_->server.wait_until_ready();
    return bound;
}

void HttpService::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace ielts::service
