#pragma once
//
// The closed loop: observe the user, recognize, respond, predict, monitor.
// A Session is a serialized command processor; callers must not invoke it
// from two threads at once.
//

#include <chrono>
#include <ctime>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pretcil/io/session_log.hpp"
#include "pretcil/recognition/recognize.hpp"
#include "pretcil/responder/responder.hpp"
#include "pretcil/session/config.hpp"

namespace pretcil::session {

enum class Verdict { Match, Mismatch, NoPrediction };

inline std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::Match: return "match";
        case Verdict::Mismatch: return "mismatch";
        case Verdict::NoPrediction: return "no-prediction";
    }
    return "?";
}

struct MonitorVerdict {
    Verdict kind = Verdict::NoPrediction;
    std::optional<std::size_t> expected;
    std::size_t observed = 0;
};

// Why a command was refused; the session is left untouched.
class Rejection : public std::runtime_error {
public:
    enum class Reason { OutOfTurn, Inapplicable, Terminal, UnknownAction };
    Rejection(Reason reason, const std::string& what) : std::runtime_error(what), reason_(reason) {}
    Reason reason() const { return reason_; }

private:
    Reason reason_;
};

class ReplayError : public std::runtime_error {
public:
    ReplayError(const std::string& what, std::uint64_t turn)
        : std::runtime_error("replay diverged at turn " + std::to_string(turn) + ": " + what), turn_(turn) {}
    std::uint64_t turn() const { return turn_; }

private:
    std::uint64_t turn_;
};

struct Counters {
    std::size_t recognition_calls = 0;
    std::size_t matches = 0;
    std::size_t mismatches = 0;
    std::size_t plan_reuses = 0;
    std::size_t fallbacks = 0;
    std::size_t conflict_fallbacks = 0;
    std::size_t agent_holding_needed_block = 0;
};

struct MonitorEntry {
    std::uint64_t turn = 0;
    MonitorVerdict verdict;
};

struct AgentTurn {
    std::size_t action = 0;
    std::string decision;
    json snapshot;
};

using Clock = std::function<std::string()>;

inline std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[96];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                  tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
    return buf;
}

// ---- JSON views of engine values ----

inline json cost_json(Cost c) { return is_infinite(c) ? json(nullptr) : json(cost_to_units(c)); }

inline json posterior_json(const Models& m, const recognition::GoalPosterior& post) {
    json goals = json::array();
    for (std::size_t i = 0; i < m.hypotheses.size(); ++i) {
        json g{{"name", m.hypotheses[i].name}, {"prior", m.hypotheses[i].prior}, {"p", post.probability[i]}};
        if (i < post.diagnostics.size()) {
            const auto& d = post.diagnostics[i];
            g["cComply"] = cost_json(d.c_comply);
            g["cAvoid"] = cost_json(d.c_avoid);
            g["delta"] = std::isnan(d.delta) ? json(nullptr) : json(d.delta);
            g["likelihood"] = d.likelihood;
            g["feasible"] = d.feasible;
            g["budgetDegraded"] = d.budget_degraded;
        }
        goals.push_back(std::move(g));
    }
    return json{{"goals", goals}, {"noHypothesis", post.no_hypothesis}, {"budgetDegraded", post.budget_degraded}};
}

inline json weights_json(std::span<const responder::WeightedAtom> ws) {
    json out = json::array();
    for (const auto& w : ws) out.push_back(json{{"atom", w.atom.str()}, {"weight", w.weight}});
    return out;
}

inline json intermediate_goal_json(const responder::IntermediateGoal& ig, double tau) {
    json conflicts = json::array();
    for (const auto& [a, b] : ig.conflicts) conflicts.push_back(json::array({a.str(), b.str()}));
    return json{{"tau", tau},
                {"atoms", weights_json(ig.atoms)},
                {"verdict", ig.ok() ? "ok" : "conflicts"},
                {"conflicts", conflicts},
                {"satisfiedAlready", ig.satisfied_already}};
}

inline json joint_plan_json(const Problem& world, const responder::JointPlan& jp) {
    json steps = json::array();
    for (const auto& s : jp.steps) steps.push_back(json{{"actor", s.actor}, {"action", world.actions[s.action].str()}});
    return json{{"goal", jp.goal.str()}, {"cost", cost_json(jp.cost)}, {"steps", steps}};
}

class Session {
public:
    Session(SessionConfig config, Clock clock = utc_now)
        : config_((validate(config), std::move(config))), clock_(std::move(clock)) {
        models_ = build_models(config_);
        world_ = models_->world.init;
        world_ = responder::with_turn(models_->world, world_, config_.user);
        turn_owner_ = config_.user;
        origin_ = world_;
        posterior_.probability.clear();
        for (const auto& h : models_->hypotheses) posterior_.probability.push_back(h.prior);
        refresh_terminal();
    }

    void set_clock(Clock clock) { clock_ = std::move(clock); }
    // Optional memo shared with other sessions over the same world.
    void set_cost_cache(std::shared_ptr<recognition::CostCache> cache) { cache_ = std::move(cache); }

    const SessionConfig& config() const { return config_; }
    const Models& models() const { return *models_; }
    const Problem& world_model() const { return models_->world; }
    const State& world() const { return world_; }
    const std::string& turn_owner() const { return turn_owner_; }
    std::uint64_t turn() const { return turn_; }
    bool terminal() const { return terminal_; }
    bool quit_requested() const { return quit_; }
    const Counters& counters() const { return counters_; }
    const std::vector<std::size_t>& observations() const { return observations_; }
    const recognition::GoalPosterior& posterior() const { return posterior_; }
    const std::optional<responder::JointPlan>& active_plan() const { return plan_; }
    std::optional<std::size_t> predicted_user_action() const {
        if (!plan_ || !predicted_step_) return std::nullopt;
        return plan_->steps[*predicted_step_].action;
    }
    // Whether the active plan still has an agent step after the cursor.
    bool plan_has_agent_step() const {
        return plan_ && responder::next_actions(*plan_, config_.agent, cursor_).agent_step.has_value();
    }
    const std::vector<io::LogRecord>& records() const { return records_; }
    const std::vector<MonitorEntry>& monitor_history() const { return monitor_; }
    std::size_t user_actions_observed() const { return user_actions_; }

    // Words whose goals hold in the current world.
    std::vector<std::string> satisfied_goals() const {
        std::vector<std::string> out;
        for (const auto& h : models_->hypotheses) {
            if (satisfies(models_->world, world_, h.goal)) out.push_back(h.name);
        }
        return out;
    }

    // Applicable actions of the actor to move, in index order.
    std::vector<std::size_t> legal_actions() const {
        std::vector<std::size_t> out;
        if (terminal_) return out;
        for (std::size_t i = 0; i < models_->world.actions.size(); ++i) {
            const auto& a = models_->world.actions[i];
            if (a.actor() == turn_owner_ && world_.contains_all(a.pre)) out.push_back(i);
        }
        return out;
    }

    std::size_t resolve_action(std::string_view text) const {
        if (auto i = models_->world.find_action(text)) return *i;
        throw Rejection(Rejection::Reason::UnknownAction, "unknown action '" + std::string(text) + "'");
    }

    MonitorVerdict submit_user_action(std::string_view text) { return submit_user_action(resolve_action(text)); }

    MonitorVerdict submit_user_action(std::size_t action) {
        const auto& world = models_->world;
        if (terminal_) throw Rejection(Rejection::Reason::Terminal, "session is finished");
        if (action >= world.actions.size()) {
            throw Rejection(Rejection::Reason::UnknownAction, "unknown action index " + std::to_string(action));
        }
        const auto& a = world.actions[action];
        if (turn_owner_ != config_.user || a.actor() != config_.user) {
            throw Rejection(Rejection::Reason::OutOfTurn,
                            "it is " + turn_owner_ + "'s turn; " + a.str() + " is not a user move now");
        }
        if (auto missing = missing_preconditions(world, world_, action); !missing.empty()) {
            throw Rejection(Rejection::Reason::Inapplicable, PreconditionViolation::describe(a.str(), missing));
        }

        MonitorVerdict v;
        v.observed = action;
        v.expected = predicted_user_action();
        if (!v.expected) {
            v.kind = Verdict::NoPrediction;
        } else if (*v.expected == action) {
            v.kind = Verdict::Match;
            ++counters_.matches;
        } else {
            v.kind = Verdict::Mismatch;
            ++counters_.mismatches;
        }
        if (v.kind == Verdict::Match) {
            cursor_ = *predicted_step_ + 1;
        } else {
            plan_.reset();
        }
        predicted_step_.reset();
        last_verdict_ = v.kind;
        last_user_passive_ = a.passive;

        execute(action);
        if (!a.passive) ++user_actions_;
        monitor_.push_back({turn_, v});
        record(config_.user, action, std::string(to_string(v.kind)), "", nullptr, nullptr);
        return v;
    }

    AgentTurn agent_step() {
        if (terminal_) throw Rejection(Rejection::Reason::Terminal, "session is finished");
        if (turn_owner_ != config_.agent) throw Rejection(Rejection::Reason::OutOfTurn, "it is the user's turn");
        const auto& world = models_->world;
        const planner::PlanOptions opts{config_.mode, config_.budget, config_.seed, std::nullopt};
        responder::ResponderConfig rc{config_.tau, config_.fallback, config_.agent};

        std::size_t action = responder::noop_of(world, config_.agent);
        std::string decision;
        json post_json = nullptr;
        json ig_json = nullptr;
        fallback_plan_.reset();

        auto fallback = [&](const std::string& reason) {
            ++counters_.fallbacks;
            plan_.reset();
            predicted_step_.reset();
            auto fb = responder::fallback_action(world, world_, rc, opts);
            action = fb.action;
            fallback_plan_ = std::move(fb.plan);
            decision = "fallback:" + reason;
        };

        if (user_actions_ < config_.head_start) {
            decision = "head-start";
            plan_.reset();
            predicted_step_.reset();
        } else if (plan_ && last_verdict_ == Verdict::Match &&
                   responder::next_actions(*plan_, config_.agent, cursor_).agent_step) {
            const auto n = responder::next_actions(*plan_, config_.agent, cursor_);
            action = plan_->steps[*n.agent_step].action;
            predicted_step_ = n.predicted_step;
            cursor_ = *n.agent_step + 1;
            ++counters_.plan_reuses;
            decision = "plan";
        } else {
            plan_.reset();
            predicted_step_.reset();
            recognize_now();
            post_json = posterior_json(*models_, posterior_);
            weights_ = responder::feature_weights(models_->hypotheses, posterior_.probability);
            intermediate_ = responder::intermediate_goal(world, world_, models_->hypotheses, posterior_.probability,
                                                         config_.tau);
            ig_json = intermediate_goal_json(*intermediate_, config_.tau);
            if (posterior_.no_hypothesis) {
                fallback("no-hypothesis");
            } else if (intermediate_->empty()) {
                fallback("empty-goal");
            } else if (!intermediate_->ok()) {
                ++counters_.conflict_fallbacks;
                fallback("conflict");
            } else if (intermediate_->satisfied_already) {
                fallback("satisfied");
            } else if (stalled()) {
                // Both sides passed while waiting on each other; replanning
                // from the unchanged world would only pass again.
                fallback("stalled");
            } else {
                auto out = responder::joint_plan(world, world_, *intermediate_, config_.agent, opts);
                if (auto* jp = std::get_if<responder::JointPlan>(&out)) {
                    const auto n = responder::next_actions(*jp, config_.agent);
                    if (n.agent_step) {
                        action = jp->steps[*n.agent_step].action;
                        predicted_step_ = n.predicted_step;
                        cursor_ = *n.agent_step + 1;
                        plan_ = std::move(*jp);
                        decision = "planned";
                    } else {
                        fallback("empty-plan");
                    }
                } else if (std::holds_alternative<planner::BudgetExhausted>(out)) {
                    fallback("budget");
                } else {
                    fallback("unsolvable");
                }
            }
        }
        last_decision_ = decision;
        last_agent_passive_ = world.actions[action].passive;
        execute(action);
        update_holding_flag(decision);
        record(config_.agent, action, "", decision, std::move(post_json), std::move(ig_json));
        return {action, decision, debug_snapshot()};
    }

    // User ends the game; terminal with whatever is satisfied now.
    void quit() {
        if (quit_) return;
        quit_ = true;
        terminal_ = true;
        record(config_.user, 0, "", "quit", nullptr, nullptr, "quit");
    }

    // Recognition from here on only sees observations made after this call,
    // starting from the current world state.
    void truncate_observations() {
        origin_ = world_;
        origin_index_ = observations_.size();
        recognized_.reset();
        record("system", 0, "", "truncate", nullptr, nullptr, "truncate-observations");
    }

    std::vector<std::size_t> recent_observations() const {
        return {observations_.begin() + static_cast<std::ptrdiff_t>(origin_index_), observations_.end()};
    }

    json debug_snapshot() const {
        const auto& world = models_->world;
        json j;
        j["turn"] = turn_;
        j["turnOwner"] = turn_owner_;
        j["terminal"] = terminal_;
        j["satisfied"] = satisfied_goals();
        json obs = json::array();
        for (auto o : observations_) obs.push_back(world.actions[o].str());
        j["observations"] = obs;
        j["observationOrigin"] = origin_index_;
        j["posterior"] = posterior_json(*models_, posterior_);
        j["weights"] = weights_json(weights_);
        j["intermediateGoal"] = intermediate_ ? intermediate_goal_json(*intermediate_, config_.tau) : json(nullptr);
        j["jointPlan"] = plan_ ? joint_plan_json(world, *plan_) : json(nullptr);
        j["fallbackPlan"] = fallback_plan_ ? joint_plan_json(world, *fallback_plan_) : json(nullptr);
        const auto predicted = predicted_user_action();
        j["predictedUserAction"] = predicted ? json(world.actions[*predicted].str()) : json(nullptr);
        j["lastDecision"] = last_decision_;
        json mon = json::array();
        for (const auto& m : monitor_) {
            mon.push_back(json{{"turn", m.turn},
                               {"verdict", to_string(m.verdict.kind)},
                               {"expected", m.verdict.expected ? json(world.actions[*m.verdict.expected].str()) : json(nullptr)},
                               {"observed", world.actions[m.verdict.observed].str()}});
        }
        j["monitor"] = mon;
        j["counters"] = json{{"recognitionCalls", counters_.recognition_calls},
                             {"matches", counters_.matches},
                             {"mismatches", counters_.mismatches},
                             {"planReuses", counters_.plan_reuses},
                             {"fallbacks", counters_.fallbacks},
                             {"conflictFallbacks", counters_.conflict_fallbacks},
                             {"agentHoldingNeededBlock", counters_.agent_holding_needed_block}};
        return j;
    }

    io::SessionLog log() const { return {io::LogHeader{std::string(io::kLogSchema), io::kLogVersion, config_to_json(config_)}, records_}; }

private:
    void execute(std::size_t action) {
        world_ = successor(models_->world.actions[action], world_);
        observations_.push_back(action);
        ++turn_;
        turn_owner_ = next_owner();
        refresh_terminal();
    }

    std::string next_owner() const {
        // The world's turn atoms hand over on every action; read the owner back.
        const auto& w = models_->world;
        if (w.turn_predicate) {
            for (const auto& actor : w.actors) {
                if (auto id = w.atoms.find(Atom{*w.turn_predicate, {actor}}); id && world_.contains(*id)) return actor;
            }
        }
        return turn_owner_ == config_.user ? config_.agent : config_.user;
    }

    void refresh_terminal() {
        if (quit_) {
            terminal_ = true;
            return;
        }
        if (!config_.stop_on_goal) return;
        if (config_.true_goal) {
            const auto& h = models_->hypotheses[*models_->hypothesis_index(*config_.true_goal)];
            terminal_ = satisfies(models_->world, world_, h.goal);
        } else {
            terminal_ = !satisfied_goals().empty();
        }
    }

    bool stalled() const {
        return last_decision_ == "planned" && last_agent_passive_ && last_user_passive_ &&
               last_verdict_ == Verdict::Mismatch;
    }

    void recognize_now() {
        ++counters_.recognition_calls;
        std::vector<std::size_t> obs;
        for (auto o : recent_observations()) {
            if (!models_->world.actions[o].passive) obs.push_back(models_->to_recog[o]);
        }
        // Passes carry no evidence: unchanged evidence gives the same posterior.
        if (recognized_ && *recognized_ == obs) return;
        recognized_ = obs;
        recognition::RecognitionConfig rc{config_.beta, config_.mode, config_.budget, config_.workers, config_.seed, cache_};
        posterior_ = recognition::recognize(models_->recog, models_->recog_state(origin_), models_->hypotheses, obs, rc);
    }

    // Set when the agent, having just fallen back, holds a block mentioned by
    // an unsatisfied atom of the user's true goal.
    void update_holding_flag(const std::string& decision) {
        if (!config_.true_goal || decision.rfind("fallback", 0) != 0) return;
        const auto& w = models_->world;
        const auto& goal = models_->hypotheses[*models_->hypothesis_index(*config_.true_goal)].goal;
        for (const auto& atom : goal.atoms) {
            if (auto id = w.atoms.find(atom); id && world_.contains(*id)) continue;
            for (const auto& block : atom.args) {
                if (auto h = w.atoms.find(Atom{"holding", {config_.agent, block}}); h && world_.contains(*h)) {
                    ++counters_.agent_holding_needed_block;
                    return;
                }
            }
        }
    }

    void record(const std::string& actor, std::size_t action, std::string verdict, std::string decision, json post,
                json ig, std::optional<std::string> action_text = std::nullopt) {
        io::LogRecord r;
        r.turn = records_.empty() ? 1 : records_.back().turn + 1;
        r.actor = actor;
        r.action = action_text ? *action_text : models_->world.actions[action].str();
        r.digest = state_digest(models_->world, world_);
        r.posterior = std::move(post);
        r.intermediate_goal = std::move(ig);
        r.verdict = std::move(verdict);
        r.decision = std::move(decision);
        r.timestamp = clock_();
        records_.push_back(std::move(r));
    }

    SessionConfig config_;
    Clock clock_;
    std::shared_ptr<recognition::CostCache> cache_;
    std::shared_ptr<const Models> models_;
    State world_;
    State origin_;
    std::size_t origin_index_ = 0;
    std::string turn_owner_;
    std::uint64_t turn_ = 0;
    bool terminal_ = false;
    bool quit_ = false;
    std::vector<std::size_t> observations_;
    std::size_t user_actions_ = 0;
    recognition::GoalPosterior posterior_;
    std::vector<responder::WeightedAtom> weights_;
    std::optional<responder::IntermediateGoal> intermediate_;
    std::optional<responder::JointPlan> plan_;
    std::optional<responder::JointPlan> fallback_plan_;
    std::size_t cursor_ = 0;
    std::optional<std::size_t> predicted_step_;
    Verdict last_verdict_ = Verdict::NoPrediction;
    std::string last_decision_;
    bool last_agent_passive_ = false;
    bool last_user_passive_ = false;
    std::optional<std::vector<std::size_t>> recognized_;
    Counters counters_;
    std::vector<MonitorEntry> monitor_;
    std::vector<io::LogRecord> records_;
};

// Records compare equal on everything but the wall-clock timestamp.
inline bool same_outcome(io::LogRecord a, io::LogRecord b) {
    a.timestamp.clear();
    b.timestamp.clear();
    return a == b;
}

// Re-executes a log against a fresh session built from its header, checking
// every record. Timestamps are carried over so the rebuilt log is identical.
inline Session replay(const io::SessionLog& log) {
    if (!log.header) throw ReplayError("log has no header with the session config", 0);
    std::size_t next = 0;
    Clock clock = [&log, &next]() { return next < log.records.size() ? log.records[next].timestamp : std::string(); };
    Session s(config_from_json(log.header->config), clock);
    for (; next < log.records.size(); ++next) {
        const auto& r = log.records[next];
        try {
            if (r.actor == "system" && r.action == "truncate-observations") {
                s.truncate_observations();
            } else if (r.action == "quit") {
                s.quit();
            } else if (r.actor == s.config().user) {
                s.submit_user_action(r.action);
            } else if (r.actor == s.config().agent) {
                s.agent_step();
            } else {
                throw ReplayError("unknown actor '" + r.actor + "'", r.turn);
            }
        } catch (const Rejection& e) {
            throw ReplayError(e.what(), r.turn);
        }
        const auto& got = s.records().back();
        if (got.digest != r.digest) {
            throw ReplayError("digest mismatch (log " + r.digest + ", replay " + got.digest + ")", r.turn);
        }
        if (!same_outcome(got, r)) {
            throw ReplayError("record differs: expected " + io::encode_record(r) + ", got " + io::encode_record(got),
                              r.turn);
        }
    }
    s.set_clock(utc_now);
    return s;
}

inline Session replay(std::string_view text) { return replay(io::read_log(text)); }

}  // namespace pretcil::session
