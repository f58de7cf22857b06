#pragma once
//
// Session logs: one JSON object per line. An optional header line names the
// schema, its version, the record field list and the session configuration;
// every following line is one turn record.
//

#include <cstdint>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace pretcil::io {

using json = nlohmann::json;

inline constexpr std::string_view kLogSchema = "pretcil-session-log";
inline constexpr int kLogVersion = 1;

class LogError : public std::runtime_error {
public:
    LogError(const std::string& what, std::size_t line)
        : std::runtime_error("log line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

struct LogRecord {
    std::uint64_t turn = 0;
    std::string actor;
    std::string action;
    std::string digest;           // post-state digest
    json posterior;               // null when not recomputed this turn
    json intermediate_goal;       // null when not recomputed this turn
    std::string verdict;          // monitor verdict for user turns, empty otherwise
    std::string decision;         // how the agent chose its action, empty for user turns
    std::string timestamp;

    bool operator==(const LogRecord&) const = default;
};

inline const std::vector<std::string>& log_fields() {
    static const std::vector<std::string> fields{"turn",    "actor",    "action",   "digest",   "posterior",
                                                 "intermediateGoal", "verdict", "decision", "timestamp"};
    return fields;
}

struct LogHeader {
    std::string schema{kLogSchema};
    int version = kLogVersion;
    json config;
    bool operator==(const LogHeader&) const = default;
};

struct SessionLog {
    std::optional<LogHeader> header;
    std::vector<LogRecord> records;
    bool operator==(const SessionLog&) const = default;
};

inline json to_json(const LogRecord& r) {
    return json{{"turn", r.turn},           {"actor", r.actor},
                {"action", r.action},       {"digest", r.digest},
                {"posterior", r.posterior}, {"intermediateGoal", r.intermediate_goal},
                {"verdict", r.verdict},     {"decision", r.decision},
                {"timestamp", r.timestamp}};
}

inline std::string encode_record(const LogRecord& r) { return to_json(r).dump(); }

inline std::string encode_header(const LogHeader& h) {
    return json{{"schema", h.schema}, {"version", h.version}, {"fields", log_fields()}, {"config", h.config}}.dump();
}

namespace detail {

template <class T>
T field(const json& j, const char* name, std::size_t line) {
    auto it = j.find(name);
    if (it == j.end()) throw LogError(std::string("missing field '") + name + "'", line);
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw LogError(std::string("field '") + name + "' has the wrong type", line);
    }
}

inline json any_field(const json& j, const char* name, std::size_t line) {
    auto it = j.find(name);
    if (it == j.end()) throw LogError(std::string("missing field '") + name + "'", line);
    return *it;
}

}  // namespace detail

inline LogRecord decode_record(std::string_view text, std::size_t line = 1) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw LogError(std::string("malformed record: ") + e.what(), line);
    }
    if (!j.is_object()) throw LogError("record is not an object", line);
    LogRecord r;
    r.turn = detail::field<std::uint64_t>(j, "turn", line);
    r.actor = detail::field<std::string>(j, "actor", line);
    r.action = detail::field<std::string>(j, "action", line);
    r.digest = detail::field<std::string>(j, "digest", line);
    r.posterior = detail::any_field(j, "posterior", line);
    r.intermediate_goal = detail::any_field(j, "intermediateGoal", line);
    r.verdict = detail::field<std::string>(j, "verdict", line);
    r.decision = detail::field<std::string>(j, "decision", line);
    r.timestamp = detail::field<std::string>(j, "timestamp", line);
    return r;
}

// Empty record list and no header give an empty file.
inline std::string write_log(const SessionLog& log) {
    std::string out;
    if (log.header) out += encode_header(*log.header) + "\n";
    for (const auto& r : log.records) out += encode_record(r) + "\n";
    return out;
}

inline std::string write_log(const std::vector<LogRecord>& records) { return write_log(SessionLog{std::nullopt, records}); }

inline SessionLog read_log(std::string_view text) {
    SessionLog log;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    std::optional<std::uint64_t> last_turn;
    while (pos < text.size()) {
        auto end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (line_no == 1 && line.find("\"schema\"") != std::string_view::npos) {
            json j;
            try {
                j = json::parse(line);
            } catch (const json::parse_error& e) {
                throw LogError(std::string("malformed header: ") + e.what(), line_no);
            }
            LogHeader h;
            h.schema = detail::field<std::string>(j, "schema", line_no);
            h.version = detail::field<int>(j, "version", line_no);
            if (h.schema != kLogSchema) throw LogError("unknown schema '" + h.schema + "'", line_no);
            if (h.version != kLogVersion) throw LogError("unsupported version " + std::to_string(h.version), line_no);
            h.config = j.value("config", json());
            log.header = std::move(h);
            continue;
        }
        auto r = decode_record(line, line_no);
        if (last_turn && r.turn <= *last_turn) throw LogError("turn indices must strictly increase", line_no);
        last_turn = r.turn;
        log.records.push_back(std::move(r));
    }
    return log;
}

}  // namespace pretcil::io
