#pragma once
//
// Session configuration, its JSON form (shared by the service API and the log
// header) and the models a session plans over.
//

#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pretcil/io/blockwords.hpp"
#include "pretcil/io/domain.hpp"
#include "pretcil/planner/search.hpp"
#include "pretcil/recognition/recognize.hpp"
#include "pretcil/responder/responder.hpp"

namespace pretcil::session {

using json = nlohmann::json;

struct FieldError {
    std::string field;
    std::string message;
};

class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(std::vector<FieldError> errors)
        : std::invalid_argument(describe(errors)), errors_(std::move(errors)) {}
    const std::vector<FieldError>& errors() const { return errors_; }

private:
    static std::string describe(const std::vector<FieldError>& errors) {
        std::string out = "invalid session config";
        for (const auto& e : errors) out += "; " + e.field + ": " + e.message;
        return out;
    }
    std::vector<FieldError> errors_;
};

// Where the world comes from: the built-in demo layout, a custom Block Words
// layout, or arbitrary domain/problem text in the s-expression dialect.
struct WorldSource {
    std::string kind = "blockwords-demo";  // blockwords-demo | blockwords | custom
    io::BlockWordsSpec blocks = io::demo_spec();
    std::string domain_text;
    std::string problem_text;
};

inline constexpr std::size_t kDefaultSessionNodes = 250;

struct SessionConfig {
    WorldSource world;
    std::string user = "user";
    std::string agent = "agent";
    double tau = 0.5;
    double beta = 1.0;
    std::vector<double> priors;  // empty: uniform
    std::size_t head_start = 0;
    responder::FallbackPolicy fallback = responder::FallbackPolicy::DefaultGoal;
    planner::PlanMode mode = planner::PlanMode::Optimal;
    // Per planner call. Node counts keep sessions deterministic; a small
    // default keeps recognition interactive (exhausted calls count as
    // infinite cost and are flagged).
    planner::SearchBudget budget{kDefaultSessionNodes, std::chrono::milliseconds(60000)};
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::optional<std::string> true_goal;  // simulations only
    bool stop_on_goal = true;
    bool debug = true;  // include the debug snapshot in turn results
};

struct Models {
    io::Domain domain;
    io::ProblemSpec spec;
    Problem world;  // two actors taking turns
    Problem recog;  // same actors, turns removed
    std::vector<std::size_t> to_recog;  // world action index -> recog action index
    std::vector<recognition::Hypothesis> hypotheses;

    State recog_state(const State& world_state) const {
        std::vector<Atom> atoms;
        for (auto& a : world.atoms_of(world_state)) {
            if (world.turn_predicate && a.predicate == *world.turn_predicate) continue;
            atoms.push_back(std::move(a));
        }
        return recog.make_state(atoms);
    }

    std::optional<std::size_t> hypothesis_index(const std::string& name) const {
        for (std::size_t i = 0; i < hypotheses.size(); ++i) {
            if (hypotheses[i].name == name) return i;
        }
        return std::nullopt;
    }
};

inline std::pair<io::Domain, io::ProblemSpec> world_definition(const WorldSource& w) {
    if (w.kind == "blockwords-demo" || w.kind == "blockwords") {
        const auto spec = w.kind == "blockwords-demo" ? io::demo_spec() : w.blocks;
        io::validate(spec);
        return {io::parse_domain(io::kBlockWordsDomain), io::blockwords_problem_spec(spec)};
    }
    if (w.kind == "custom") return {io::parse_domain(w.domain_text), io::parse_problem(w.problem_text)};
    throw std::invalid_argument("unknown world kind '" + w.kind + "'");
}

// Checks every field and reports all problems at once.
inline void validate(const SessionConfig& c) {
    std::vector<FieldError> errors;
    if (!(c.tau >= 0.0 && c.tau <= 1.0)) errors.push_back({"tau", "must lie in [0, 1]"});
    if (!(c.beta > 0.0) || !std::isfinite(c.beta)) errors.push_back({"beta", "must be a positive number"});
    if (c.budget.max_expansions == 0) errors.push_back({"budgetNodes", "must be positive"});
    if (c.budget.max_time.count() <= 0) errors.push_back({"budgetMs", "must be positive"});
    if (c.workers == 0) errors.push_back({"workers", "must be positive"});
    if (c.user == c.agent) errors.push_back({"agent", "user and agent must be different actors"});
    std::optional<io::ProblemSpec> spec;
    try {
        spec = world_definition(c.world).second;
    } catch (const std::exception& e) {
        errors.push_back({"domain", e.what()});
    }
    if (spec) {
        const auto& actors = spec->actors;
        if (std::find(actors.begin(), actors.end(), c.user) == actors.end()) {
            errors.push_back({"user", "'" + c.user + "' is not an actor of the problem"});
        }
        if (std::find(actors.begin(), actors.end(), c.agent) == actors.end()) {
            errors.push_back({"agent", "'" + c.agent + "' is not an actor of the problem"});
        }
        if (spec->hypotheses.empty()) errors.push_back({"domain", "the problem declares no goal hypotheses"});
        if (!c.priors.empty()) {
            if (c.priors.size() != spec->hypotheses.size()) {
                errors.push_back({"priors", "expected " + std::to_string(spec->hypotheses.size()) + " values"});
            } else {
                double sum = 0.0;
                bool range = true;
                for (double p : c.priors) {
                    range = range && p > 0.0 && p <= 1.0;
                    sum += p;
                }
                if (!range) errors.push_back({"priors", "every prior must lie in (0, 1]"});
                else if (std::abs(sum - 1.0) > 1e-9) errors.push_back({"priors", "priors must sum to 1"});
            }
        }
        if (c.true_goal) {
            bool found = false;
            for (const auto& h : spec->hypotheses) found = found || h.label == *c.true_goal;
            if (!found) errors.push_back({"trueGoal", "'" + *c.true_goal + "' is not a goal hypothesis"});
        }
    }
    if (!errors.empty()) throw ConfigError(std::move(errors));
}

inline std::shared_ptr<const Models> build_models(const SessionConfig& c) {
    auto m = std::make_shared<Models>();
    std::tie(m->domain, m->spec) = world_definition(c.world);
    m->world = io::ground(m->domain, m->spec, {.turn_taking = true});
    m->recog = io::ground(m->domain, m->spec, {.turn_taking = false});
    for (const auto& a : m->world.actions) m->to_recog.push_back(m->recog.action_index(a.str()));
    for (std::size_t i = 0; i < m->spec.hypotheses.size(); ++i) {
        const auto& h = m->spec.hypotheses[i];
        const double prior = c.priors.empty() ? 1.0 / static_cast<double>(m->spec.hypotheses.size()) : c.priors[i];
        m->hypotheses.push_back({h.label, h.goal, prior});
    }
    return m;
}

// ---- JSON ----

inline json config_to_json(const SessionConfig& c) {
    json j;
    j["domain"] = c.world.kind;
    if (c.world.kind == "blockwords") {
        j["stacks"] = c.world.blocks.stacks;
        j["words"] = c.world.blocks.words;
        j["actors"] = c.world.blocks.actors;
    } else if (c.world.kind == "custom") {
        j["domainText"] = c.world.domain_text;
        j["problemText"] = c.world.problem_text;
    }
    j["user"] = c.user;
    j["agent"] = c.agent;
    j["tau"] = c.tau;
    j["beta"] = c.beta;
    j["priors"] = c.priors;
    j["headStart"] = c.head_start;
    j["fallback"] = std::string(responder::to_string(c.fallback));
    j["mode"] = std::string(planner::to_string(c.mode));
    j["budgetNodes"] = c.budget.max_expansions;
    j["budgetMs"] = c.budget.max_time.count();
    j["seed"] = c.seed;
    j["workers"] = c.workers;
    j["trueGoal"] = c.true_goal ? json(*c.true_goal) : json(nullptr);
    j["stopOnGoal"] = c.stop_on_goal;
    j["debug"] = c.debug;
    return j;
}

// Missing optional fields take their defaults. Every malformed field is
// reported; semantic checks run afterwards via validate().
inline SessionConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError(std::vector<FieldError>{{"", "config must be a JSON object"}});
    SessionConfig c;
    std::vector<FieldError> errors;
    auto get = [&](const char* name, auto& out) {
        auto it = j.find(name);
        if (it == j.end() || it->is_null()) return;
        try {
            it->get_to(out);
        } catch (const json::exception&) {
            errors.push_back({name, "has the wrong type"});
        }
    };
    auto number = [&](const char* name, double& out) {
        auto it = j.find(name);
        if (it == j.end() || it->is_null()) return;
        if (!it->is_number()) errors.push_back({name, "must be a number"});
        else out = it->get<double>();
    };
    auto count = [&](const char* name, auto& out) {
        auto it = j.find(name);
        if (it == j.end() || it->is_null()) return;
        if (!it->is_number_integer() || it->get<long long>() < 0) errors.push_back({name, "must be a non-negative integer"});
        else out = static_cast<std::remove_reference_t<decltype(out)>>(it->get<long long>());
    };

    get("domain", c.world.kind);
    if (c.world.kind == "blockwords") {
        c.world.blocks = io::BlockWordsSpec{};
        get("stacks", c.world.blocks.stacks);
        get("words", c.world.blocks.words);
        get("actors", c.world.blocks.actors);
    } else if (c.world.kind == "custom") {
        get("domainText", c.world.domain_text);
        get("problemText", c.world.problem_text);
    } else if (c.world.kind != "blockwords-demo") {
        errors.push_back({"domain", "expected blockwords-demo, blockwords or custom"});
    }
    get("user", c.user);
    get("agent", c.agent);
    number("tau", c.tau);
    number("beta", c.beta);
    get("priors", c.priors);
    count("headStart", c.head_start);
    if (auto it = j.find("fallback"); it != j.end() && !it->is_null()) {
        try {
            c.fallback = responder::fallback_policy_from_string(it->get<std::string>());
        } catch (const std::exception&) {
            errors.push_back({"fallback", "expected noop or default-goal"});
        }
    }
    if (auto it = j.find("mode"); it != j.end() && !it->is_null()) {
        try {
            c.mode = planner::plan_mode_from_string(it->get<std::string>());
        } catch (const std::exception&) {
            errors.push_back({"mode", "expected optimal or satisficing"});
        }
    }
    count("budgetNodes", c.budget.max_expansions);
    long long ms = c.budget.max_time.count();
    count("budgetMs", ms);
    c.budget.max_time = std::chrono::milliseconds(ms);
    count("seed", c.seed);
    count("workers", c.workers);
    std::string goal;
    get("trueGoal", goal);
    if (!goal.empty()) c.true_goal = goal;
    get("stopOnGoal", c.stop_on_goal);
    get("debug", c.debug);
    // Semantic checks still run so one response lists every bad field.
    try {
        validate(c);
    } catch (const ConfigError& e) {
        for (const auto& f : e.errors()) {
            const bool seen = std::any_of(errors.begin(), errors.end(), [&](const FieldError& x) { return x.field == f.field; });
            if (!seen) errors.push_back(f);
        }
    }
    if (!errors.empty()) throw ConfigError(std::move(errors));
    return c;
}

}  // namespace pretcil::session
