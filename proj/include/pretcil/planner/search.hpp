#pragma once
//
// Forward state-space search. Optimal mode runs A* with an admissible
// heuristic (LM-cut by default); satisficing mode runs greedy best-first
// search on hadd. Plan cost is compared as (cost, number of steps); remaining
// ties go to the lower heuristic value and then to the lexicographically
// smaller action sequence, where actions are ranked by printed name (or by a
// seeded permutation of that order).
//

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <numeric>
#include <optional>
#include <queue>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "pretcil/core/cost.hpp"
#include "pretcil/core/strips.hpp"
#include "pretcil/planner/heuristics.hpp"

namespace pretcil::planner {

enum class PlanMode { Optimal, Satisficing };

inline std::string_view to_string(PlanMode m) { return m == PlanMode::Optimal ? "optimal" : "satisficing"; }

inline PlanMode plan_mode_from_string(std::string_view s) {
    if (s == "optimal") return PlanMode::Optimal;
    if (s == "satisficing") return PlanMode::Satisficing;
    throw std::invalid_argument("unknown planner mode '" + std::string(s) + "'");
}

struct SearchBudget {
    std::size_t max_expansions = 200000;
    std::chrono::milliseconds max_time{60000};
};

struct Plan {
    std::vector<std::size_t> steps;
    Cost cost = 0;
    bool operator==(const Plan&) const = default;
};

struct Unsolvable {
    std::string reason;
};

struct BudgetExhausted {
    std::size_t expanded = 0;
    std::string reason;
};

using PlanOutcome = std::variant<Plan, Unsolvable, BudgetExhausted>;

inline const Plan* solution(const PlanOutcome& o) { return std::get_if<Plan>(&o); }
inline bool is_unsolvable(const PlanOutcome& o) { return std::holds_alternative<Unsolvable>(o); }
inline bool is_budget_exhausted(const PlanOutcome& o) { return std::holds_alternative<BudgetExhausted>(o); }
inline Cost outcome_cost(const PlanOutcome& o) {
    const auto* p = solution(o);
    return p ? p->cost : kInfiniteCost;
}

struct PlanOptions {
    PlanMode mode = PlanMode::Optimal;
    SearchBudget budget{};
    std::uint64_t tie_break_seed = 0;
    std::optional<HeuristicKind> heuristic;  // defaults: LM-cut (optimal), hadd (satisficing)
    bool stubborn_sets = true;               // partial-order reduction; keeps optimal costs
    // Children inherit max(0, h(parent) - cost) and are evaluated only when
    // popped. Costs stay optimal; ties among equal plans may resolve differently.
    bool lazy_evaluation = false;
    // Optimal mode: among equal f prefer fewer steps before lower h. Keeps
    // zero-cost passes out of plans; off when only the cost matters.
    bool prefer_fewer_steps = true;
};

struct SearchStats {
    std::size_t expanded = 0;
    std::size_t generated = 0;
    Cost initial_h = 0;
};

// Action ranks used for lexicographic tie-breaking: position in printed-name
// order, or a seeded permutation of it when the seed is non-zero. Passive
// actions (passes) rank after all others either way, so that among equally
// good plans the one that acts earlier wins.
inline std::vector<std::uint32_t> action_ranks(const Problem& problem, std::uint64_t seed) {
    std::vector<std::uint32_t> order(problem.actions.size());
    std::iota(order.begin(), order.end(), 0u);
    std::vector<std::string> names;
    names.reserve(order.size());
    for (const auto& a : problem.actions) names.push_back(a.str());
    std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) {
        const bool px = problem.actions[x].passive, py = problem.actions[y].passive;
        if (px != py) return py;
        return names[x] < names[y];
    });
    if (seed != 0) {
        std::mt19937_64 rng(seed);
        const auto active = static_cast<std::size_t>(
            std::count_if(problem.actions.begin(), problem.actions.end(), [](const auto& a) { return !a.passive; }));
        for (std::size_t i = active; i > 1; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            std::swap(order[i - 1], order[pick(rng)]);
        }
    }
    std::vector<std::uint32_t> rank(order.size());
    for (std::uint32_t r = 0; r < order.size(); ++r) rank[order[r]] = r;
    return rank;
}

// Reachability that tracks, for each value of every phase group, which atoms
// can hold together with it. False means the goal is provably unreachable.
inline bool phase_reachable(const Problem& problem, const State& start, std::span<const AtomId> goal) {
    const std::size_t atom_count = problem.atoms.size();
    for (const auto& group : problem.phase_groups) {
        std::unordered_map<AtomId, std::size_t> phase_of;
        for (std::size_t k = 0; k < group.size(); ++k) phase_of[group[k]] = k;
        std::optional<std::size_t> current;
        for (std::size_t k = 0; k < group.size(); ++k) {
            if (start.contains(group[k])) current = k;
        }
        if (!current) continue;

        std::vector<std::vector<char>> reach(group.size(), std::vector<char>(atom_count, 0));
        std::vector<char> active(group.size(), 0);
        for (auto a : start.atoms()) {
            if (a < atom_count) reach[*current][a] = 1;
        }
        active[*current] = 1;

        struct Info {
            std::optional<std::size_t> pre_phase, add_phase;
            bool usable = true;
        };
        std::vector<Info> info(problem.actions.size());
        for (std::size_t i = 0; i < problem.actions.size(); ++i) {
            const auto& a = problem.actions[i];
            for (auto p : a.pre) {
                if (auto it = phase_of.find(p); it != phase_of.end()) {
                    if (info[i].pre_phase) info[i].usable = false;
                    info[i].pre_phase = it->second;
                }
            }
            for (auto p : a.add) {
                if (auto it = phase_of.find(p); it != phase_of.end()) info[i].add_phase = it->second;
            }
        }

        bool changed = true;
        while (changed) {
            changed = false;
            for (std::size_t i = 0; i < problem.actions.size(); ++i) {
                if (!info[i].usable) continue;
                const auto& a = problem.actions[i];
                for (std::size_t v = 0; v < group.size(); ++v) {
                    if (!active[v]) continue;
                    if (info[i].pre_phase && *info[i].pre_phase != v) continue;
                    bool ok = true;
                    for (auto p : a.pre) ok = ok && reach[v][p];
                    if (!ok) continue;
                    const std::size_t target = info[i].add_phase.value_or(v);
                    auto& dst = reach[target];
                    if (target != v) {
                        if (!active[target]) {
                            active[target] = 1;
                            changed = true;
                        }
                        for (std::size_t x = 0; x < atom_count; ++x) {
                            if (reach[v][x] && !dst[x] &&
                                std::find(a.del.begin(), a.del.end(), static_cast<AtomId>(x)) == a.del.end()) {
                                dst[x] = 1;
                                changed = true;
                            }
                        }
                    }
                    for (auto e : a.add) {
                        if (!dst[e]) {
                            dst[e] = 1;
                            changed = true;
                        }
                    }
                }
            }
        }
        bool any = false;
        for (std::size_t v = 0; v < group.size() && !any; ++v) {
            if (!active[v]) continue;
            bool all = true;
            for (auto g : goal) all = all && g < atom_count && reach[v][g];
            any = all;
        }
        if (!any) return false;
    }
    return true;
}

// Strong stubborn sets: expand only the applicable actions of a set closed
// under "achieves a needed fact" and "interferes with". Interleavings of
// independent actions (two hands working on separate blocks) are then
// explored in one order only, which preserves optimal plan costs.
class StubbornSets {
public:
    explicit StubbornSets(const Problem& problem) : problem_(problem) {
        const std::size_t atoms = problem.atoms.size();
        achievers_.resize(atoms);
        users_.resize(atoms);
        deleters_.resize(atoms);
        for (std::uint32_t i = 0; i < problem.actions.size(); ++i) {
            const auto& a = problem.actions[i];
            for (auto p : a.pre) users_[p].push_back(i);
            for (auto p : a.add) achievers_[p].push_back(i);
            for (auto p : a.del) deleters_[p].push_back(i);
        }
        mark_.assign(problem.actions.size(), 0);
    }

    // Fills `keep` with the actions to expand in `state` (goal not yet reached).
    void compute(const State& state, std::span<const AtomId> goal, std::vector<std::uint32_t>& keep) {
        keep.clear();
        std::fill(mark_.begin(), mark_.end(), 0);
        queue_.clear();
        auto add = [&](const std::vector<std::uint32_t>& list) {
            for (auto b : list) {
                if (!mark_[b]) {
                    mark_[b] = 1;
                    queue_.push_back(b);
                }
            }
        };
        for (auto g : goal) {
            if (!state.contains(g)) {
                add(achievers_[g]);
                break;
            }
        }
        for (std::size_t q = 0; q < queue_.size(); ++q) {
            const auto& a = problem_.actions[queue_[q]];
            std::optional<AtomId> unmet;
            for (auto p : a.pre) {
                if (!state.contains(p)) {
                    unmet = p;
                    break;
                }
            }
            if (unmet) {
                add(achievers_[*unmet]);
                continue;
            }
            for (auto p : a.pre) add(deleters_[p]);
            for (auto p : a.del) {
                add(users_[p]);
                add(achievers_[p]);
            }
            for (auto p : a.add) add(deleters_[p]);
        }
        for (auto b : queue_) {
            if (state.contains_all(problem_.actions[b].pre)) keep.push_back(b);
        }
        std::sort(keep.begin(), keep.end());
    }

private:
    const Problem& problem_;
    std::vector<std::vector<std::uint32_t>> achievers_, users_, deleters_;
    std::vector<char> mark_;
    std::vector<std::uint32_t> queue_;
};

namespace detail {

struct Node {
    State state;
    Cost g = 0;
    std::uint32_t steps = 0;
    Cost h = 0;
    std::vector<std::uint32_t> path;  // action indices
    bool closed = false;
    bool evaluated = true;
};

}  // namespace detail

inline PlanOutcome plan(const Problem& problem, const State& start, const GoalCondition& goal,
                        const PlanOptions& options, SearchStats* stats = nullptr) {
    SearchStats local;
    SearchStats& st = stats ? *stats : local;
    st = {};

    std::vector<AtomId> goal_ids;
    for (const auto& a : goal.atoms) {
        auto id = problem.atoms.find(a);
        if (!id) return Unsolvable{"goal atom " + a.str() + " does not exist in the model"};
        goal_ids.push_back(*id);
    }
    if (auto conflicts = goal_conflicts(problem, goal); !conflicts.empty()) {
        return Unsolvable{"goal atoms " + conflicts.front().first.str() + " and " + conflicts.front().second.str() +
                          " are mutually exclusive"};
    }
    if (!phase_reachable(problem, start, goal_ids)) return Unsolvable{"goal unreachable in phase analysis"};

    const HeuristicKind kind = options.heuristic.value_or(
        options.mode == PlanMode::Optimal ? HeuristicKind::LmCut : HeuristicKind::HAdd);
    const RelaxedTask task(problem);
    const auto rank = action_ranks(problem, options.tie_break_seed);
    const bool optimal = options.mode == PlanMode::Optimal;
    std::optional<StubbornSets> stubborn;
    if (options.stubborn_sets) stubborn.emplace(problem);
    std::vector<std::uint32_t> candidates;

    std::vector<detail::Node> nodes;
    std::unordered_map<State, std::uint32_t, StateHash> best;
    std::unordered_map<State, char, StateHash> dead;

    auto path_less = [&](const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
        return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(),
                                            [&](auto x, auto y) { return rank[x] < rank[y]; });
    };
    struct Entry {
        Cost primary;
        Cost secondary;
        std::uint32_t steps;
        std::uint32_t node;
    };
    // Optimal: (f, steps, h, path). Satisficing: (h, g, steps, path).
    auto worse = [&](const Entry& x, const Entry& y) {
        if (x.primary != y.primary) return x.primary > y.primary;
        if (optimal && options.prefer_fewer_steps) {
            if (x.steps != y.steps) return x.steps > y.steps;
            if (x.secondary != y.secondary) return x.secondary > y.secondary;
        } else if (optimal) {
            if (x.secondary != y.secondary) return x.secondary > y.secondary;
            if (x.steps != y.steps) return x.steps > y.steps;
        } else {
            if (x.secondary != y.secondary) return x.secondary > y.secondary;
            if (x.steps != y.steps) return x.steps > y.steps;
        }
        return path_less(nodes[y.node].path, nodes[x.node].path);
    };
    std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> open(worse);

    auto push = [&](std::uint32_t id) {
        const auto& n = nodes[id];
        if (optimal) {
            open.push({add_costs(n.g, n.h), n.h, n.steps, id});
        } else {
            open.push({n.h, n.g, n.steps, id});
        }
    };

    const Cost h0 = task.evaluate(kind, start, goal_ids);
    st.initial_h = h0;
    if (is_infinite(h0)) return Unsolvable{"goal unreachable under delete relaxation"};
    nodes.push_back({start, 0, 0, h0, {}, false});
    best.emplace(start, 0);
    push(0);

    const auto started = std::chrono::steady_clock::now();
    while (!open.empty()) {
        const Entry e = open.top();
        open.pop();
        {
            auto it = best.find(nodes[e.node].state);
            if (it == best.end() || it->second != e.node || nodes[e.node].closed) continue;
        }
        if (!nodes[e.node].evaluated) {
            auto& n = nodes[e.node];
            n.evaluated = true;
            const Cost h = task.evaluate(kind, n.state, goal_ids);
            if (is_infinite(h)) {
                n.closed = true;
                continue;
            }
            if (h > n.h) {
                n.h = h;
                push(e.node);
                continue;
            }
        }
        if (nodes[e.node].state.contains_all(goal_ids)) {
            Plan p;
            for (auto a : nodes[e.node].path) p.steps.push_back(a);
            p.cost = nodes[e.node].g;
            return p;
        }
        nodes[e.node].closed = true;
        if (++st.expanded > options.budget.max_expansions) {
            return BudgetExhausted{st.expanded, "expansion limit reached"};
        }
        if ((st.expanded & 63u) == 0 && std::chrono::steady_clock::now() - started > options.budget.max_time) {
            return BudgetExhausted{st.expanded, "time limit reached"};
        }

        const State current = nodes[e.node].state;
        const Cost g = nodes[e.node].g;
        const std::uint32_t steps = nodes[e.node].steps;
        if (stubborn) {
            stubborn->compute(current, goal_ids, candidates);
        } else {
            candidates.clear();
            for (std::uint32_t ai = 0; ai < problem.actions.size(); ++ai) {
                if (current.contains_all(problem.actions[ai].pre)) candidates.push_back(ai);
            }
        }
        for (const std::uint32_t ai : candidates) {
            const auto& act = problem.actions[ai];
            State next = successor(act, current);
            ++st.generated;
            const Cost g2 = add_costs(g, act.cost);
            const std::uint32_t steps2 = steps + 1;
            std::vector<std::uint32_t> path2 = nodes[e.node].path;
            path2.push_back(ai);

            Cost h;
            bool evaluated = true;
            if (auto it = best.find(next); it != best.end()) {
                const auto& old = nodes[it->second];
                if (!optimal) continue;
                const bool better_cost = g2 < old.g || (g2 == old.g && steps2 < old.steps);
                const bool tie = g2 == old.g && steps2 == old.steps;
                if (!better_cost) {
                    if (!tie || old.closed || !path_less(path2, old.path)) continue;
                }
                h = old.h;
                evaluated = old.evaluated;
            } else if (options.lazy_evaluation) {
                h = std::max<Cost>(0, nodes[e.node].h - act.cost);
                evaluated = false;
            } else {
                if (dead.count(next)) continue;
                h = task.evaluate(kind, next, goal_ids);
                if (is_infinite(h)) {
                    dead.emplace(std::move(next), 1);
                    continue;
                }
            }
            const auto id = static_cast<std::uint32_t>(nodes.size());
            nodes.push_back({next, g2, steps2, h, std::move(path2), false, evaluated});
            best[nodes.back().state] = id;
            push(id);
        }
    }
    return Unsolvable{"search space exhausted"};
}

inline PlanOutcome plan(const Problem& problem, const PlanOptions& options, SearchStats* stats = nullptr) {
    return plan(problem, problem.init, problem.goal, options, stats);
}

struct PlanValidation {
    bool valid = false;
    std::size_t failed_step = 0;  // 1-based; 0 when valid or when only the goal test failed
    std::string reason;
    explicit operator bool() const { return valid; }
};

inline PlanValidation validate_plan(const Problem& problem, const State& start, const GoalCondition& goal,
                                    std::span<const std::size_t> steps) {
    State s = start;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (steps[i] >= problem.actions.size()) {
            return {false, i + 1, "step " + std::to_string(i + 1) + " is not an action of the problem"};
        }
        if (!applicable(problem, s, steps[i])) {
            std::string missing;
            for (const auto& a : missing_preconditions(problem, s, steps[i])) missing += (missing.empty() ? "" : ", ") + a.str();
            return {false, i + 1,
                    "step " + std::to_string(i + 1) + " " + problem.actions[steps[i]].str() + " lacks " + missing};
        }
        s = successor(problem.actions[steps[i]], s);
    }
    if (!satisfies(problem, s, goal)) return {false, 0, "final state does not satisfy the goal"};
    return {true, 0, {}};
}

inline PlanValidation validate_plan(const Problem& problem, const Plan& p) {
    return validate_plan(problem, problem.init, problem.goal, p.steps);
}

inline std::vector<std::string> plan_names(const Problem& problem, std::span<const std::size_t> steps) {
    std::vector<std::string> out;
    for (auto s : steps) out.push_back(problem.action(s).str());
    return out;
}

}  // namespace pretcil::planner
