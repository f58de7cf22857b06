#pragma once
//
// Responsive planning: turn a goal posterior into an intermediate goal of
// "necessities" (atoms carrying at least tau of the posterior mass), plan a
// turn-taking joint plan toward it, and fall back when that is impossible.
//

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "pretcil/core/strips.hpp"
#include "pretcil/planner/search.hpp"
#include "pretcil/recognition/recognize.hpp"

namespace pretcil::responder {

enum class FallbackPolicy { Noop, DefaultGoal };

inline std::string_view to_string(FallbackPolicy p) { return p == FallbackPolicy::Noop ? "noop" : "default-goal"; }

inline FallbackPolicy fallback_policy_from_string(std::string_view s) {
    if (s == "noop") return FallbackPolicy::Noop;
    if (s == "default-goal") return FallbackPolicy::DefaultGoal;
    throw std::invalid_argument("unknown fallback policy '" + std::string(s) + "' (expected noop or default-goal)");
}

struct ResponderConfig {
    double tau = 0.5;
    FallbackPolicy fallback = FallbackPolicy::DefaultGoal;
    std::string agent = "agent";

    void validate() const {
        if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in [0, 1]");
        if (agent.empty()) throw std::invalid_argument("agent name must not be empty");
    }
};

// Posterior values are compared on a fixed grid of 1e-12 so that boundary
// cases (weight exactly tau) do not depend on summation order.
inline constexpr double kWeightGrid = 1e12;

inline std::int64_t weight_ticks(double p) { return static_cast<std::int64_t>(std::llround(p * kWeightGrid)); }

struct WeightedAtom {
    Atom atom;
    double weight = 0.0;
    std::int64_t ticks = 0;
};

// weight(f) = sum of posterior(G) over goals G containing f. Atoms appear in
// order of first mention across the hypotheses.
inline std::vector<WeightedAtom> feature_weights(std::span<const recognition::Hypothesis> hyps,
                                                 std::span<const double> posterior) {
    if (hyps.size() != posterior.size()) throw std::invalid_argument("posterior size does not match hypotheses");
    std::vector<WeightedAtom> out;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
        const auto t = weight_ticks(posterior[i]);
        std::vector<Atom> seen;
        for (const auto& a : hyps[i].goal.atoms) {
            if (std::find(seen.begin(), seen.end(), a) != seen.end()) continue;
            seen.push_back(a);
            auto it = std::find_if(out.begin(), out.end(), [&](const WeightedAtom& w) { return w.atom == a; });
            if (it == out.end()) {
                out.push_back({a, 0.0, 0});
                it = std::prev(out.end());
            }
            it->ticks += t;
        }
    }
    for (auto& w : out) w.weight = static_cast<double>(w.ticks) / kWeightGrid;
    return out;
}

struct IntermediateGoal {
    std::vector<WeightedAtom> atoms;
    std::vector<AtomPair> conflicts;
    bool satisfied_already = false;

    bool ok() const { return conflicts.empty(); }
    bool empty() const { return atoms.empty(); }

    GoalCondition goal() const {
        GoalCondition g;
        for (const auto& w : atoms) g.atoms.push_back(w.atom);
        return g;
    }
};

inline IntermediateGoal intermediate_goal(const Problem& problem, const State& state,
                                          std::span<const recognition::Hypothesis> hyps,
                                          std::span<const double> posterior, double tau) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in [0, 1]");
    IntermediateGoal ig;
    const auto threshold = weight_ticks(tau);
    for (auto& w : feature_weights(hyps, posterior)) {
        if (w.ticks >= threshold && w.ticks > 0) ig.atoms.push_back(std::move(w));
    }
    const auto g = ig.goal();
    ig.conflicts = goal_conflicts(problem, g);
    ig.satisfied_already = satisfies(problem, state, g);
    return ig;
}

struct JointStep {
    std::size_t action = 0;
    std::string actor;
};

struct JointPlan {
    std::vector<JointStep> steps;
    Cost cost = 0;
    GoalCondition goal;
};

using JointOutcome = std::variant<JointPlan, planner::Unsolvable, planner::BudgetExhausted>;

// Puts `owner` in charge of the next move: clears every turn atom, then sets
// turn(owner). States of problems without a turn predicate pass through.
inline State with_turn(const Problem& problem, State state, const std::string& owner) {
    if (!problem.turn_predicate) return state;
    for (const auto& actor : problem.actors) {
        if (auto id = problem.atoms.find(Atom{*problem.turn_predicate, {actor}})) state.erase(*id);
    }
    if (auto id = problem.atoms.find(Atom{*problem.turn_predicate, {owner}})) state.insert(*id);
    return state;
}

// Optimal plan in the turn-alternating model; each step is tagged with the
// actor whose turn it is. No-ops cost nothing, so the user's share of the
// plan is simply the planner's cheapest completion.
inline JointOutcome joint_plan(const Problem& turn_model, const State& state, const GoalCondition& goal,
                               const std::string& turn_owner, const planner::PlanOptions& options) {
    const State start = with_turn(turn_model, state, turn_owner);
    auto outcome = planner::plan(turn_model, start, goal, options);
    if (auto* u = std::get_if<planner::Unsolvable>(&outcome)) return *u;
    if (auto* b = std::get_if<planner::BudgetExhausted>(&outcome)) return *b;
    const auto& p = std::get<planner::Plan>(outcome);
    JointPlan jp;
    jp.cost = p.cost;
    jp.goal = goal;
    for (auto s : p.steps) jp.steps.push_back({s, turn_model.actions[s].actor()});
    return jp;
}

inline JointOutcome joint_plan(const Problem& turn_model, const State& state, const IntermediateGoal& ig,
                               const std::string& turn_owner, const planner::PlanOptions& options) {
    if (!ig.ok()) return planner::Unsolvable{"intermediate goal has conflicting atoms"};
    if (ig.satisfied_already) {
        JointPlan jp;
        jp.goal = ig.goal();
        return jp;
    }
    return joint_plan(turn_model, state, ig.goal(), turn_owner, options);
}

struct NextActions {
    std::optional<std::size_t> agent_step;      // index into JointPlan::steps
    std::optional<std::size_t> predicted_step;  // first user step after it
};

inline NextActions next_actions(const JointPlan& plan, const std::string& agent, std::size_t from = 0) {
    NextActions n;
    for (std::size_t i = from; i < plan.steps.size(); ++i) {
        if (plan.steps[i].actor == agent) {
            n.agent_step = i;
            break;
        }
    }
    if (!n.agent_step) return n;
    for (std::size_t i = *n.agent_step + 1; i < plan.steps.size(); ++i) {
        if (plan.steps[i].actor != agent) {
            n.predicted_step = i;
            break;
        }
    }
    return n;
}

inline std::size_t noop_of(const Problem& problem, const std::string& actor) {
    for (std::size_t i = 0; i < problem.actions.size(); ++i) {
        const auto& a = problem.actions[i];
        if (a.passive && a.actor() == actor) return i;
    }
    throw ModelError("no pass action for actor '" + actor + "'");
}

inline GoalCondition default_goal(const std::string& agent) { return GoalCondition{{Atom{"handempty", {agent}}}}; }

struct FallbackDecision {
    std::size_t action = 0;
    std::optional<JointPlan> plan;  // set for the default-goal policy when the hand was not empty
};

// noop: pass. default-goal: work toward an empty hand (put down whatever the
// agent holds), passing once the hand is empty or no plan exists.
inline FallbackDecision fallback_action(const Problem& turn_model, const State& state, const ResponderConfig& config,
                                        const planner::PlanOptions& options) {
    FallbackDecision d{noop_of(turn_model, config.agent), std::nullopt};
    if (config.fallback == FallbackPolicy::Noop) return d;
    const auto goal = default_goal(config.agent);
    if (!turn_model.atoms.find(goal.atoms[0]) || satisfies(turn_model, state, goal)) return d;
    auto out = joint_plan(turn_model, state, goal, config.agent, options);
    if (auto* jp = std::get_if<JointPlan>(&out)) {
        const auto n = next_actions(*jp, config.agent);
        if (n.agent_step) d.action = jp->steps[*n.agent_step].action;
        d.plan = std::move(*jp);
    }
    return d;
}

}  // namespace pretcil::responder
