// Command-line front end: serve the HTTP API, play in the terminal through
// that API, run simulations and sweeps, verify session logs.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pretcil/service/http.hpp"
#include "pretcil/service/simulation.hpp"

using namespace pretcil;
using json = nlohmann::json;

namespace {

struct SessionFlags {
    double tau = 0.5;
    std::size_t head_start = 0;
    double beta = 1.0;
    std::string fallback = "default-goal";
    std::string mode = "optimal";
    std::size_t budget_nodes = session::kDefaultSessionNodes;
    long long budget_ms = 60000;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::string domain_file;
    std::string problem_file;
    bool no_debug = false;

    void add_to(CLI::App& app) {
        app.add_option("--tau", tau, "necessities threshold in [0,1]")->capture_default_str();
        app.add_option("--head-start", head_start, "user actions before the agent responds")->capture_default_str();
        app.add_option("--beta", beta, "likelihood sharpness")->capture_default_str();
        app.add_option("--fallback", fallback, "noop | default-goal")->capture_default_str();
        app.add_option("--mode", mode, "optimal | satisficing")->capture_default_str();
        app.add_option("--budget-nodes", budget_nodes, "expansions per planner call")->capture_default_str();
        app.add_option("--budget-ms", budget_ms, "wall time per planner call")->capture_default_str();
        app.add_option("--seed", seed, "tie-break seed")->capture_default_str();
        app.add_option("--workers", workers, "parallel planner calls per recognition")->capture_default_str();
        app.add_option("--domain-file", domain_file, "custom domain text (with --problem-file)");
        app.add_option("--problem-file", problem_file, "custom problem text");
        app.add_flag("--no-debug", no_debug, "omit debug snapshots from turn results");
    }

    json to_json() const {
        json j{{"tau", tau},         {"headStart", head_start}, {"beta", beta},     {"fallback", fallback},
               {"mode", mode},       {"budgetNodes", budget_nodes}, {"budgetMs", budget_ms}, {"seed", seed},
               {"workers", workers}, {"debug", !no_debug}};
        if (!domain_file.empty() || !problem_file.empty()) {
            j["domain"] = "custom";
            j["domainText"] = slurp(domain_file);
            j["problemText"] = slurp(problem_file);
        } else {
            j["domain"] = "blockwords-demo";
        }
        return j;
    }

    session::SessionConfig config() const { return session::config_from_json(to_json()); }

    static std::string slurp(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot read '" + path + "'");
        std::stringstream s;
        s << in.rdbuf();
        return s.str();
    }
};

int port_from_env(int fallback) {
    if (const char* p = std::getenv("PRETCIL_PORT")) {
        try {
            return std::stoi(p);
        } catch (const std::exception&) {
            std::cerr << "ignoring malformed PRETCIL_PORT '" << p << "'\n";
        }
    }
    return fallback;
}

void print_view(const json& v) {
    std::cout << "\nturn " << v["turn"] << ", " << v["turnOwner"].get<std::string>() << " to move\n";
    for (const auto& stack : v["stacks"]) {
        std::cout << "  ";
        for (const auto& b : stack) std::cout << b.get<std::string>() << ' ';
        std::cout << '\n';
    }
    for (const auto& [actor, block] : v["held"].items()) std::cout << "  " << actor << " holds " << block.get<std::string>() << '\n';
    std::cout << "  words:";
    for (const auto& w : v["words"]) std::cout << ' ' << w.get<std::string>();
    std::cout << "\n  satisfied:";
    for (const auto& w : v["satisfied"]) std::cout << ' ' << w.get<std::string>();
    std::cout << '\n';
}

int play(const SessionFlags& flags) {
    service::SessionManager manager;
    service::ApiServer server(manager);
    const int port = server.bind("127.0.0.1", 0);
    if (port < 0) throw std::runtime_error("cannot bind a loopback port");
    server.start_background();
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(600, 0);

    auto res = client.Post("/sessions", flags.to_json().dump(), "application/json");
    if (!res || res->status != 201) {
        std::cerr << "cannot create session: " << (res ? res->body : "no response") << '\n';
        return 1;
    }
    const auto created = json::parse(res->body);
    const std::string id = created["id"];
    json view = created["view"];
    std::cout << "session " << id << " (type a number or an action name; 'debug', 'quit')\n";
    while (!view["terminal"].get<bool>()) {
        print_view(view);
        const auto& legal = view["legalActions"];
        for (std::size_t i = 0; i < legal.size(); ++i) std::cout << "  [" << i << "] " << legal[i].get<std::string>() << '\n';
        std::cout << "> " << std::flush;
        std::string line;
        if (!std::getline(std::cin, line) || line == "quit") {
            client.Post("/sessions/" + id + "/quit", "", "application/json");
            break;
        }
        if (line == "debug") {
            if (auto d = client.Get("/sessions/" + id + "/debug")) std::cout << json::parse(d->body).dump(2) << '\n';
            continue;
        }
        std::string action = line;
        if (!line.empty() && std::all_of(line.begin(), line.end(), ::isdigit)) {
            const auto i = std::stoul(line);
            if (i >= legal.size()) {
                std::cout << "no such choice\n";
                continue;
            }
            action = legal[i];
        }
        auto r = client.Post("/sessions/" + id + "/actions", json{{"action", action}}.dump(), "application/json");
        if (!r) {
            std::cerr << "service did not answer\n";
            return 1;
        }
        const auto body = json::parse(r->body);
        if (r->status != 200) {
            std::cout << "rejected: " << body.value("error", r->body) << '\n';
            continue;
        }
        std::cout << "monitor: " << body["verdict"]["kind"].get<std::string>();
        if (!body["agentAction"].is_null()) {
            std::cout << "; agent: " << body["agentAction"].get<std::string>() << " (" << body["decision"].get<std::string>()
                      << ")";
        }
        std::cout << '\n';
        view = body["view"];
    }
    print_view(view);
    server.stop();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pretcil: responsive assistive agent for turn-taking Block Words"};
    app.require_subcommand(1);

    SessionFlags flags;

    auto* serve = app.add_subcommand("serve", "start the HTTP service");
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string log_dir = "sessions";
    long long heartbeat_ms = 15000;
    bool thinking = false;
    std::size_t global_workers = 1;
    serve->add_option("--host", host)->capture_default_str();
    serve->add_option("--port", port, "listen port (PRETCIL_PORT overrides the default)");
    serve->add_option("--log-dir", log_dir, "directory of per-session logs")->capture_default_str();
    serve->add_option("--heartbeat-ms", heartbeat_ms)->capture_default_str();
    serve->add_option("--workers", global_workers, "max planner workers per recognition")->capture_default_str();
    serve->add_flag("--thinking", thinking, "emit status events while the agent plans");

    auto* play_cmd = app.add_subcommand("play", "play in the terminal through a loopback service");
    flags.add_to(*play_cmd);

    auto* simulate = app.add_subcommand("simulate", "run one simulated-user session");
    flags.add_to(*simulate);
    std::string goal = "father";
    std::string user_policy = "optimal";
    double epsilon = 0.0;
    std::uint64_t user_seed = 0;
    std::size_t max_turns = 60;
    std::string transcript_path;
    simulate->add_option("--goal", goal, "true goal of the simulated user")->capture_default_str();
    simulate->add_option("--user-policy", user_policy, "optimal | noisy | confuser")->capture_default_str();
    simulate->add_option("--epsilon", epsilon, "noise rate of the noisy policy")->capture_default_str();
    simulate->add_option("--user-seed", user_seed)->capture_default_str();
    simulate->add_option("--max-turns", max_turns)->capture_default_str();
    simulate->add_option("--transcript", transcript_path, "write the session log here");

    auto* sweep = app.add_subcommand("sweep", "grid of simulations, CSV to stdout or --out");
    flags.add_to(*sweep);
    std::vector<double> taus{0.5};
    std::vector<std::size_t> head_starts{2};
    std::vector<double> betas{1.0};
    std::vector<std::string> policies{"default-goal"};
    std::vector<std::string> goals;
    std::size_t repetitions = 1;
    std::string out_path;
    sweep->add_option("--taus", taus)->delimiter(',');
    sweep->add_option("--head-starts", head_starts)->delimiter(',');
    sweep->add_option("--betas", betas)->delimiter(',');
    sweep->add_option("--policies", policies, "fallback policies")->delimiter(',');
    sweep->add_option("--goals", goals, "default: every hypothesis")->delimiter(',');
    sweep->add_option("--repetitions", repetitions)->capture_default_str();
    sweep->add_option("--user-policy", user_policy)->capture_default_str();
    sweep->add_option("--epsilon", epsilon)->capture_default_str();
    sweep->add_option("--user-seed", user_seed, "repetition r uses user seed + r")->capture_default_str();
    sweep->add_option("--max-turns", max_turns)->capture_default_str();
    sweep->add_option("--out", out_path);

    auto* replay_cmd = app.add_subcommand("replay", "verify a session log by replaying it");
    std::string log_path;
    replay_cmd->add_option("log", log_path, "session log file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve) {
            if (serve->count("--port") == 0) port = port_from_env(port);
            service::SessionManager manager({std::filesystem::path(log_dir), global_workers, thinking});
            const auto restored = manager.recover();
            if (!restored.empty()) std::cerr << "restored " << restored.size() << " session(s) from " << log_dir << '\n';
            service::ApiServer server(manager, {std::chrono::milliseconds(heartbeat_ms)});
            const int bound = server.bind(host, port);
            if (bound < 0) {
                std::cerr << "cannot bind " << host << ':' << port << '\n';
                return 1;
            }
            std::cerr << "listening on http://" << host << ':' << bound << '\n';
            return server.run() ? 0 : 1;
        }
        if (*play_cmd) return play(flags);
        if (*simulate) {
            const auto r = service::run_simulation(
                flags.config(), {goal, service::user_policy_from_string(user_policy), epsilon, user_seed}, max_turns);
            const auto& m = r.metrics;
            std::cout << json{{"goal", goal},
                              {"reached", m.reached},
                              {"turns", m.turns},
                              {"userActions", m.user_actions},
                              {"agentActions", m.agent_actions},
                              {"mismatches", m.mismatches},
                              {"conflictFallbacks", m.conflict_fallbacks},
                              {"recognitionCalls", m.recognition_calls},
                              {"agentHoldingNeededBlock", m.agent_holding_needed_block}}
                             .dump(2)
                      << '\n';
            if (!transcript_path.empty()) std::ofstream(transcript_path, std::ios::binary) << io::write_log(r.transcript);
            return 0;
        }
        if (*sweep) {
            service::SweepGrid grid;
            grid.taus = taus;
            grid.head_starts = head_starts;
            grid.betas = betas;
            grid.policies.clear();
            for (const auto& p : policies) grid.policies.push_back(responder::fallback_policy_from_string(p));
            grid.goals = goals;
            grid.repetitions = repetitions;
            grid.user = service::user_policy_from_string(user_policy);
            grid.epsilon = epsilon;
            grid.seed = user_seed;
            grid.max_turns = max_turns;
            const auto csv = service::run_sweep(flags.config(), grid);
            if (out_path.empty()) std::cout << csv;
            else std::ofstream(out_path, std::ios::binary) << csv;
            return 0;
        }
        if (*replay_cmd) {
            const auto s = session::replay(SessionFlags::slurp(log_path));
            std::cout << "ok: " << s.records().size() << " records reproduced, final digest "
                      << state_digest(s.world_model(), s.world()) << '\n';
            return 0;
        }
    } catch (const session::ConfigError& e) {
        for (const auto& f : e.errors()) std::cerr << f.field << ": " << f.message << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
