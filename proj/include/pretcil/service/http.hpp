#pragma once
//
// HTTP service: a registry of live sessions with per-session command
// serialization, file-per-session logs with crash recovery, JSON views, and
// the endpoint/event-stream wiring on top of cpp-httplib.
//
// Endpoints
//   POST /sessions                      create (201) | 400 with field errors
//   GET  /sessions                      list
//   GET  /sessions/{id}                 board view
//   POST /sessions/{id}/actions         {"action": "..."}: user move + agent reply
//   POST /sessions/{id}/quit            end the game
//   POST /sessions/{id}/truncate        drop older observations from recognition
//   GET  /sessions/{id}/debug           debug snapshot
//   GET  /sessions/{id}/log             raw session log
//   GET  /sessions/{id}/events?since=N  server-sent events, resumable by turn index
//

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "pretcil/io/blockwords.hpp"
#include "pretcil/session/session.hpp"

namespace pretcil::service {

using json = nlohmann::json;

// ---- views ----

struct ApiSessionView {
    std::string id;
    std::vector<std::vector<std::string>> stacks;  // bottom-to-top
    std::map<std::string, std::string> held;       // actor -> block, holders only
    std::string turn_owner;
    std::vector<std::string> legal_actions;
    std::vector<std::string> words;
    std::vector<std::string> satisfied;
    std::uint64_t turn = 0;
    bool terminal = false;

    bool operator==(const ApiSessionView&) const = default;
};

inline ApiSessionView make_view(const std::string& id, const session::Session& s) {
    ApiSessionView v;
    v.id = id;
    const auto board = io::board_of(s.world_model(), s.world());
    v.stacks = board.stacks;
    for (const auto& [actor, block] : board.held) v.held[actor] = block;
    v.turn_owner = s.turn_owner();
    for (auto a : s.legal_actions()) v.legal_actions.push_back(s.world_model().actions[a].str());
    for (const auto& h : s.models().hypotheses) v.words.push_back(h.name);
    v.satisfied = s.satisfied_goals();
    v.turn = s.turn();
    v.terminal = s.terminal();
    return v;
}

inline json to_json(const ApiSessionView& v) {
    return json{{"id", v.id},
                {"stacks", v.stacks},
                {"held", v.held},
                {"turnOwner", v.turn_owner},
                {"legalActions", v.legal_actions},
                {"words", v.words},
                {"satisfied", v.satisfied},
                {"turn", v.turn},
                {"terminal", v.terminal}};
}

inline ApiSessionView view_from_json(const json& j) {
    ApiSessionView v;
    try {
        j.at("id").get_to(v.id);
        j.at("stacks").get_to(v.stacks);
        j.at("held").get_to(v.held);
        j.at("turnOwner").get_to(v.turn_owner);
        j.at("legalActions").get_to(v.legal_actions);
        j.at("words").get_to(v.words);
        j.at("satisfied").get_to(v.satisfied);
        j.at("turn").get_to(v.turn);
        j.at("terminal").get_to(v.terminal);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed session view: ") + e.what());
    }
    return v;
}

inline std::string_view to_string(session::Rejection::Reason r) {
    switch (r) {
        case session::Rejection::Reason::OutOfTurn: return "out-of-turn";
        case session::Rejection::Reason::Inapplicable: return "inapplicable";
        case session::Rejection::Reason::Terminal: return "terminal";
        case session::Rejection::Reason::UnknownAction: return "unknown-action";
    }
    return "?";
}

struct TurnResult {
    session::Verdict verdict = session::Verdict::NoPrediction;
    std::optional<std::string> expected;  // predicted user action
    std::string user_action;
    std::optional<std::string> agent_action;  // none when the user's move ended the game
    std::string decision;
    ApiSessionView view;
    json debug;  // null unless the session has debug enabled
};

inline json to_json(const TurnResult& r) {
    json j;
    j["verdict"] = {{"kind", std::string(session::to_string(r.verdict))},
                    {"expected", r.expected ? json(*r.expected) : json(nullptr)},
                    {"observed", r.user_action}};
    j["userAction"] = r.user_action;
    j["agentAction"] = r.agent_action ? json(*r.agent_action) : json(nullptr);
    j["decision"] = r.decision;
    j["view"] = to_json(r.view);
    j["debug"] = r.debug;
    return j;
}

// ---- session registry ----

class UnknownSession : public std::out_of_range {
public:
    explicit UnknownSession(const std::string& id) : std::out_of_range("unknown session '" + id + "'") {}
};

struct ManagerOptions {
    std::optional<std::filesystem::path> log_dir;  // none: memory only
    std::size_t workers = 1;                       // upper bound on per-session recognition workers
    bool thinking_events = false;                  // announce agent planning on the event stream
};

// What a subscriber sees after waiting: committed turn events after its
// cursor, plus the session's current status when it changed.
struct EventBatch {
    std::vector<json> events;
    std::optional<std::string> status;
    std::uint64_t status_generation = 0;
    bool closed = false;  // manager shutting down
};

class SessionManager {
public:
    explicit SessionManager(ManagerOptions options = {}) : options_(std::move(options)) {
        if (options_.log_dir) std::filesystem::create_directories(*options_.log_dir);
    }

    ~SessionManager() { shutdown(); }

    // Wakes every waiting subscriber; later waits return immediately.
    void shutdown() {
        closed_ = true;
        std::lock_guard lock(registry_);
        for (auto& [id, e] : entries_) {
            std::lock_guard l(e->events_mutex);
            e->events_cv.notify_all();
        }
    }

    std::pair<std::string, ApiSessionView> create(const json& config_json) {
        auto config = session::config_from_json(config_json);
        config.workers = std::min(config.workers, std::max<std::size_t>(1, options_.workers));
        auto entry = std::make_shared<Entry>();
        entry->session = std::make_unique<session::Session>(config);
        std::string id;
        {
            std::lock_guard lock(registry_);
            id = next_id();
        }
        entry->id = id;
        if (options_.log_dir) {
            entry->log_path = *options_.log_dir / (id + ".jsonl");
            std::ofstream out(entry->log_path, std::ios::trunc);
            out << io::encode_header(*entry->session->log().header) << "\n";
        }
        auto view = make_view(id, *entry->session);
        {
            std::lock_guard lock(registry_);
            entries_[id] = entry;
        }
        return {id, std::move(view)};
    }

    std::vector<json> list() const {
        std::vector<std::shared_ptr<Entry>> all;
        {
            std::lock_guard lock(registry_);
            for (const auto& [id, e] : entries_) all.push_back(e);
        }
        std::vector<json> out;
        for (const auto& e : all) {
            std::lock_guard command(e->command);
            const auto& s = *e->session;
            out.push_back({{"id", e->id},
                           {"turn", s.turn()},
                           {"turnOwner", s.turn_owner()},
                           {"terminal", s.terminal()},
                           {"satisfied", s.satisfied_goals()}});
        }
        return out;
    }

    bool contains(const std::string& id) const {
        std::lock_guard lock(registry_);
        return entries_.count(id) > 0;
    }

    ApiSessionView view(const std::string& id) const {
        auto e = find(id);
        std::lock_guard command(e->command);
        return make_view(id, *e->session);
    }

    json debug(const std::string& id) const {
        auto e = find(id);
        std::lock_guard command(e->command);
        return e->session->debug_snapshot();
    }

    std::string log_text(const std::string& id) const {
        auto e = find(id);
        std::lock_guard command(e->command);
        return io::write_log(e->session->log());
    }

    session::SessionConfig config(const std::string& id) const {
        auto e = find(id);
        std::lock_guard command(e->command);
        return e->session->config();
    }

    // The user's move followed by the agent's reply, committed together.
    // Concurrent calls on one session queue behind each other.
    TurnResult act(const std::string& id, std::string_view action_text) {
        auto e = find(id);
        std::lock_guard command(e->command);
        auto& s = *e->session;
        const auto action = s.resolve_action(action_text);
        TurnResult r;
        const auto v = s.submit_user_action(action);
        r.verdict = v.kind;
        if (v.expected) r.expected = s.world_model().actions[*v.expected].str();
        r.user_action = s.world_model().actions[action].str();
        if (!s.terminal() && s.turn_owner() == s.config().agent) {
            if (options_.thinking_events) set_status(*e, "thinking");
            const auto t = s.agent_step();
            r.agent_action = s.world_model().actions[t.action].str();
            r.decision = t.decision;
        }
        commit(*e);
        if (options_.thinking_events) set_status(*e, "idle");
        r.view = make_view(id, s);
        if (s.config().debug) r.debug = s.debug_snapshot();
        return r;
    }

    ApiSessionView quit(const std::string& id) {
        auto e = find(id);
        std::lock_guard command(e->command);
        e->session->quit();
        commit(*e);
        return make_view(id, *e->session);
    }

    ApiSessionView truncate(const std::string& id) {
        auto e = find(id);
        std::lock_guard command(e->command);
        if (e->session->terminal()) {
            throw session::Rejection(session::Rejection::Reason::Terminal, "session is finished");
        }
        e->session->truncate_observations();
        commit(*e);
        return make_view(id, *e->session);
    }

    // Committed events with turn index > since, in order.
    std::vector<json> events_since(const std::string& id, std::uint64_t since) const {
        auto e = find(id);
        std::lock_guard lock(e->events_mutex);
        return collect(*e, since);
    }

    // Blocks until there are events after `since`, the status moved past
    // `seen_generation`, the timeout elapses or the manager shuts down.
    EventBatch wait_events(const std::string& id, std::uint64_t since, std::uint64_t seen_generation,
                           std::chrono::milliseconds timeout) const {
        auto e = find(id);
        std::unique_lock lock(e->events_mutex);
        e->events_cv.wait_for(lock, timeout, [&] {
            return closed_ || last_index(*e) > since || e->status_generation > seen_generation;
        });
        EventBatch b;
        b.events = collect(*e, since);
        b.status_generation = e->status_generation;
        if (e->status_generation > seen_generation) b.status = e->status;
        b.closed = closed_;
        return b;
    }

    // Rebuilds every session found in the log directory by replaying its log.
    // A torn final line (crash during a write) is dropped. Returns the ids.
    std::vector<std::string> recover() {
        std::vector<std::string> restored;
        if (!options_.log_dir) return restored;
        std::vector<std::filesystem::path> files;
        for (const auto& f : std::filesystem::directory_iterator(*options_.log_dir)) {
            if (f.is_regular_file() && f.path().extension() == ".jsonl") files.push_back(f.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& path : files) {
            const std::string id = path.stem().string();
            if (contains(id)) continue;
            std::ifstream in(path, std::ios::binary);
            std::stringstream buf;
            buf << in.rdbuf();
            std::string text = buf.str();
            if (!text.empty() && text.back() != '\n') {
                const auto cut = text.find_last_of('\n');
                text.erase(cut == std::string::npos ? 0 : cut + 1);
                std::ofstream(path, std::ios::trunc) << text;
            }
            auto entry = std::make_shared<Entry>();
            entry->id = id;
            entry->log_path = path;
            entry->session = std::make_unique<session::Session>(session::replay(text));
            entry->persisted = entry->session->records().size();
            for (const auto& r : entry->session->records()) entry->events.push_back(turn_event(r, nullptr));
            {
                std::lock_guard lock(registry_);
                entries_[id] = entry;
                bump_counter(id);
            }
            restored.push_back(id);
        }
        return restored;
    }

private:
    struct Entry {
        std::string id;
        mutable std::mutex command;
        std::unique_ptr<session::Session> session;
        std::filesystem::path log_path;
        std::size_t persisted = 0;  // records already written and published

        mutable std::mutex events_mutex;
        mutable std::condition_variable events_cv;
        std::vector<json> events;
        std::string status = "idle";
        std::uint64_t status_generation = 0;
    };

    std::shared_ptr<Entry> find(const std::string& id) const {
        std::lock_guard lock(registry_);
        auto it = entries_.find(id);
        if (it == entries_.end()) throw UnknownSession(id);
        return it->second;
    }

    std::string next_id() {
        char buf[32];
        std::snprintf(buf, sizeof buf, "s%06llu", static_cast<unsigned long long>(++counter_));
        return buf;
    }

    void bump_counter(const std::string& id) {
        if (id.size() > 1 && id[0] == 's') {
            try {
                counter_ = std::max<std::uint64_t>(counter_, std::stoull(id.substr(1)));
            } catch (const std::exception&) {
            }
        }
    }

    static json turn_event(const io::LogRecord& r, const json& snapshot) {
        json j{{"index", r.turn}, {"type", "turn"}, {"record", io::to_json(r)}};
        if (!snapshot.is_null()) j["snapshot"] = snapshot;
        return j;
    }

    static std::uint64_t last_index(const Entry& e) {
        return e.events.empty() ? 0 : e.events.back()["index"].get<std::uint64_t>();
    }

    static std::vector<json> collect(const Entry& e, std::uint64_t since) {
        std::vector<json> out;
        for (const auto& ev : e.events) {
            if (ev["index"].get<std::uint64_t>() > since) out.push_back(ev);
        }
        return out;
    }

    // Appends new records to the log file, then publishes them.
    void commit(Entry& e) {
        const auto& records = e.session->records();
        if (e.persisted == records.size()) return;
        if (!e.log_path.empty()) {
            std::ofstream out(e.log_path, std::ios::app);
            for (std::size_t i = e.persisted; i < records.size(); ++i) out << io::encode_record(records[i]) << "\n";
            out.flush();
        }
        const json snapshot = e.session->config().debug ? e.session->debug_snapshot() : json(nullptr);
        std::lock_guard lock(e.events_mutex);
        for (std::size_t i = e.persisted; i < records.size(); ++i) {
            e.events.push_back(turn_event(records[i], i + 1 == records.size() ? snapshot : json(nullptr)));
        }
        e.persisted = records.size();
        e.events_cv.notify_all();
    }

    void set_status(Entry& e, std::string status) {
        std::lock_guard lock(e.events_mutex);
        e.status = std::move(status);
        ++e.status_generation;
        e.events_cv.notify_all();
    }

    ManagerOptions options_;
    mutable std::mutex registry_;
    std::map<std::string, std::shared_ptr<Entry>> entries_;
    std::uint64_t counter_ = 0;
    std::atomic<bool> closed_{false};
};

// ---- HTTP ----

struct ServerOptions {
    std::chrono::milliseconds heartbeat{15000};
};

inline json field_errors_json(const session::ConfigError& e) {
    json fields = json::array();
    for (const auto& f : e.errors()) fields.push_back({{"field", f.field}, {"message", f.message}});
    return json{{"error", "invalid session config"}, {"fields", fields}};
}

inline std::string sse_frame(std::string_view event, const json& data, std::optional<std::uint64_t> id = std::nullopt) {
    std::string out;
    if (id) out += "id: " + std::to_string(*id) + "\n";
    out += "event: " + std::string(event) + "\n";
    out += "data: " + data.dump() + "\n\n";
    return out;
}

class ApiServer {
public:
    ApiServer(SessionManager& manager, ServerOptions options = {}) : manager_(manager), options_(options) { routes(); }

    ~ApiServer() { stop(); }

    // Binds to host:port (port 0 picks a free one) and returns the bound port, or -1.
    int bind(const std::string& host, int port) {
        if (port == 0) return port_ = server_.bind_to_any_port(host);
        return port_ = server_.bind_to_port(host, port) ? port : -1;
    }

    // Serves until stop(); call after bind().
    bool run() { return server_.listen_after_bind(); }

    void start_background() {
        thread_ = std::thread([this] { run(); });
        server_.wait_until_ready();
    }

    void stop() {
        stopping_ = true;
        manager_.shutdown();
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    int port() const { return port_; }

private:
    static void send_json(httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    template <class F>
    void guarded(httplib::Response& res, F&& f) {
        try {
            f();
        } catch (const UnknownSession& e) {
            send_json(res, 404, {{"error", e.what()}});
        } catch (const session::ConfigError& e) {
            send_json(res, 400, field_errors_json(e));
        } catch (const session::Rejection& e) {
            send_json(res, 409, {{"error", e.what()}, {"reason", std::string(to_string(e.reason()))}});
        } catch (const json::exception& e) {
            send_json(res, 400, {{"error", std::string("malformed request: ") + e.what()}});
        } catch (const std::exception& e) {
            send_json(res, 500, {{"error", e.what()}});
        }
    }

    void routes() {
        server_.Get("/health", [](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, {{"status", "ok"}});
        });

        server_.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const json body = req.body.empty() ? json::object() : json::parse(req.body);
                auto [id, view] = manager_.create(body);
                send_json(res, 201,
                          {{"id", id}, {"view", to_json(view)}, {"config", session::config_to_json(manager_.config(id))}});
            });
        });

        server_.Get("/sessions", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&] { send_json(res, 200, {{"sessions", manager_.list()}}); });
        });

        server_.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { send_json(res, 200, to_json(manager_.view(req.matches[1]))); });
        });

        server_.Post(R"(/sessions/([^/]+)/actions)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const std::string id = req.matches[1];
                if (!manager_.contains(id)) throw UnknownSession(id);
                const json body = json::parse(req.body);
                if (!body.is_object() || !body.contains("action") || !body["action"].is_string()) {
                    send_json(res, 400, {{"error", "expected {\"action\": \"<action name>\"}"}});
                    return;
                }
                send_json(res, 200, to_json(manager_.act(id, body["action"].get<std::string>())));
            });
        });

        server_.Post(R"(/sessions/([^/]+)/quit)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { send_json(res, 200, to_json(manager_.quit(req.matches[1]))); });
        });

        server_.Post(R"(/sessions/([^/]+)/truncate)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { send_json(res, 200, to_json(manager_.truncate(req.matches[1]))); });
        });

        server_.Get(R"(/sessions/([^/]+)/debug)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { send_json(res, 200, manager_.debug(req.matches[1])); });
        });

        server_.Get(R"(/sessions/([^/]+)/log)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { res.set_content(manager_.log_text(req.matches[1]), "application/x-ndjson"); });
        });

        server_.Get(R"(/sessions/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
            const std::string id = req.matches[1];
            if (!manager_.contains(id)) {
                res.status = 404;
                res.set_content(sse_frame("error", {{"error", "unknown session '" + id + "'"}}), "text/event-stream");
                return;
            }
            std::uint64_t since = 0;
            auto heartbeat = options_.heartbeat;
            try {
                if (req.has_param("since")) since = std::stoull(req.get_param_value("since"));
                if (req.has_param("heartbeatMs")) heartbeat = std::chrono::milliseconds(std::stoul(req.get_param_value("heartbeatMs")));
            } catch (const std::exception&) {
                send_json(res, 400, {{"error", "since and heartbeatMs must be non-negative integers"}});
                return;
            }
            if (heartbeat.count() <= 0) heartbeat = std::chrono::milliseconds(1);
            auto cursor = std::make_shared<std::uint64_t>(since);
            auto generation = std::make_shared<std::uint64_t>(0);
            res.set_header("Cache-Control", "no-cache");
            res.set_chunked_content_provider(
                "text/event-stream", [this, id, cursor, generation, heartbeat](std::size_t, httplib::DataSink& sink) {
                    if (stopping_) {
                        sink.done();
                        return true;
                    }
                    EventBatch b;
                    try {
                        b = manager_.wait_events(id, *cursor, *generation, heartbeat);
                    } catch (const UnknownSession&) {
                        const auto frame = sse_frame("error", {{"error", "unknown session '" + id + "'"}});
                        sink.write(frame.data(), frame.size());
                        sink.done();
                        return true;
                    }
                    if (b.closed || stopping_) {
                        sink.done();
                        return true;
                    }
                    std::string out;
                    for (const auto& ev : b.events) {
                        const auto index = ev["index"].get<std::uint64_t>();
                        out += sse_frame("turn", ev, index);
                        *cursor = index;
                    }
                    if (b.status) {
                        out += sse_frame("status", {{"status", *b.status}, {"index", *cursor}});
                        *generation = b.status_generation;
                    }
                    if (out.empty()) out = sse_frame("heartbeat", {{"index", *cursor}});
                    return sink.write(out.data(), out.size());
                });
        });
    }

    SessionManager& manager_;
    ServerOptions options_;
    httplib::Server server_;
    std::thread thread_;
    std::atomic<bool> stopping_{false};
    int port_ = -1;
};

}  // namespace pretcil::service
