#pragma once
//
// Delete-relaxation heuristics over a ground problem: hmax, hadd and LM-cut.
// hmax and LM-cut are admissible; hadd is not and only guides satisficing
// search.
//

#include <algorithm>
#include <cstdint>
#include <functional>
#include <queue>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "pretcil/core/cost.hpp"
#include "pretcil/core/strips.hpp"

namespace pretcil::planner {

enum class HeuristicKind { HMax, HAdd, LmCut };

inline std::string_view to_string(HeuristicKind k) {
    switch (k) {
        case HeuristicKind::HMax: return "hmax";
        case HeuristicKind::HAdd: return "hadd";
        case HeuristicKind::LmCut: return "lmcut";
    }
    return "?";
}

// Precomputed relaxed task. Atom index `atom_count` is an artificial TRUE fact
// that supports actions without preconditions; `atom_count + 1` is the
// artificial goal fact reached by the goal action (index `actions.size()`).
class RelaxedTask {
public:
    explicit RelaxedTask(const Problem& problem) : atom_count_(problem.atoms.size()) {
        const std::size_t n = problem.actions.size();
        pre_.resize(n + 1);
        add_.resize(n + 1);
        cost_.resize(n + 1, 0);
        precondition_of_.resize(atom_count_ + 2);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& a = problem.actions[i];
            pre_[i].assign(a.pre.begin(), a.pre.end());
            if (pre_[i].empty()) pre_[i].push_back(true_fact());
            add_[i].assign(a.add.begin(), a.add.end());
            cost_[i] = a.cost;
            for (auto p : pre_[i]) precondition_of_[p].push_back(static_cast<std::uint32_t>(i));
        }
        add_[n] = {goal_fact()};
        achievers_.resize(atom_count_ + 2);
        for (std::size_t i = 0; i <= n; ++i) {
            for (auto e : add_[i]) achievers_[e].push_back(static_cast<std::uint32_t>(i));
        }
    }

    std::size_t atom_count() const { return atom_count_; }
    std::size_t action_count() const { return pre_.size() - 1; }
    AtomId true_fact() const { return static_cast<AtomId>(atom_count_); }
    AtomId goal_fact() const { return static_cast<AtomId>(atom_count_ + 1); }

    Cost evaluate(HeuristicKind kind, const State& state, std::span<const AtomId> goal) const {
        if (goal.empty()) return 0;
        for (auto g : goal) {
            if (g >= atom_count_) return kInfiniteCost;
        }
        if (state.contains_all(goal)) return 0;
        switch (kind) {
            case HeuristicKind::HMax: return relaxed_cost(state, goal, /*additive=*/false);
            case HeuristicKind::HAdd: return relaxed_cost(state, goal, /*additive=*/true);
            case HeuristicKind::LmCut: return lmcut(state, goal);
        }
        return kInfiniteCost;
    }

    // Atoms reachable under delete relaxation from `state`.
    std::vector<bool> reachable(const State& state) const {
        std::vector<bool> reached(atom_count_ + 2, false);
        std::vector<std::uint32_t> unsatisfied(pre_.size());
        std::vector<AtomId> queue;
        for (std::size_t i = 0; i + 1 < pre_.size(); ++i) unsatisfied[i] = static_cast<std::uint32_t>(pre_[i].size());
        auto reach = [&](AtomId a) {
            if (!reached[a]) {
                reached[a] = true;
                queue.push_back(a);
            }
        };
        reach(true_fact());
        for (auto a : state.atoms()) {
            if (a < atom_count_) reach(a);
        }
        while (!queue.empty()) {
            const AtomId a = queue.back();
            queue.pop_back();
            for (auto op : precondition_of_[a]) {
                if (--unsatisfied[op] == 0) {
                    for (auto e : add_[op]) reach(e);
                }
            }
        }
        return reached;
    }

private:
    Cost relaxed_cost(const State& state, std::span<const AtomId> goal, bool additive) const {
        std::vector<Cost> value(atom_count_ + 2, kInfiniteCost);
        std::vector<std::uint32_t> unsatisfied(pre_.size());
        std::vector<Cost> op_cost(pre_.size(), 0);
        for (std::size_t i = 0; i + 1 < pre_.size(); ++i) unsatisfied[i] = static_cast<std::uint32_t>(pre_[i].size());
        using Entry = std::pair<Cost, AtomId>;
        std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
        auto improve = [&](AtomId a, Cost c) {
            if (c < value[a]) {
                value[a] = c;
                open.emplace(c, a);
            }
        };
        improve(true_fact(), 0);
        for (auto a : state.atoms()) {
            if (a < atom_count_) improve(a, 0);
        }
        while (!open.empty()) {
            auto [c, a] = open.top();
            open.pop();
            if (c > value[a]) continue;
            for (auto op : precondition_of_[a]) {
                op_cost[op] = additive ? add_costs(op_cost[op], c) : std::max(op_cost[op], c);
                if (--unsatisfied[op] == 0) {
                    const Cost through = add_costs(op_cost[op], cost_[op]);
                    for (auto e : add_[op]) improve(e, through);
                }
            }
        }
        Cost total = 0;
        for (auto g : goal) {
            if (is_infinite(value[g])) return kInfiniteCost;
            total = additive ? add_costs(total, value[g]) : std::max(total, value[g]);
        }
        return total;
    }

    // Landmark-cut: repeatedly cut the justification graph between the state
    // and the goal, charge the cheapest action in the cut and discount it.
    // After each cut hmax values are repaired incrementally.
    Cost lmcut(const State& state, std::span<const AtomId> goal) const {
        const std::size_t ops = pre_.size();  // last index is the goal action
        const std::size_t goal_op = ops - 1;
        const std::size_t facts = atom_count_ + 2;
        std::vector<Cost> cost(cost_);
        std::vector<char> is_goal(facts, 0);
        for (auto g : goal) is_goal[g] = 1;
        auto pre_of = [&](std::size_t op) -> std::span<const AtomId> {
            return op == goal_op ? goal : std::span<const AtomId>(pre_[op]);
        };

        std::vector<Cost> value(facts, kInfiniteCost);
        std::vector<AtomId> supporter(ops, 0);
        std::vector<Cost> supporter_cost(ops, kInfiniteCost);
        std::vector<std::uint32_t> unsatisfied(ops);
        for (std::size_t i = 0; i < ops; ++i) unsatisfied[i] = static_cast<std::uint32_t>(pre_of(i).size());
        std::vector<AtomId> init_facts{true_fact()};
        for (auto a : state.atoms()) {
            if (a < atom_count_) init_facts.push_back(a);
        }
        using Entry = std::pair<Cost, AtomId>;
        std::vector<Entry> heap;
        auto enqueue = [&](AtomId f, Cost c) {
            if (c < value[f]) {
                value[f] = c;
                heap.emplace_back(c, f);
                std::push_heap(heap.begin(), heap.end(), std::greater<>());
            }
        };
        auto pop = [&]() {
            std::pop_heap(heap.begin(), heap.end(), std::greater<>());
            auto top = heap.back();
            heap.pop_back();
            return top;
        };
        auto triggered = [&](AtomId f, auto&& fn) {
            for (auto op : precondition_of_[f]) fn(static_cast<std::size_t>(op));
            if (is_goal[f]) fn(goal_op);
        };
        auto refresh_supporter = [&](std::size_t op) {
            Cost best = -1;
            for (auto p : pre_of(op)) {
                if (value[p] > best) {
                    best = value[p];
                    supporter[op] = p;
                }
            }
            supporter_cost[op] = best;
        };

        // Full hmax exploration.
        for (auto a : init_facts) enqueue(a, 0);
        while (!heap.empty()) {
            auto [c, f] = pop();
            if (c > value[f]) continue;
            triggered(f, [&](std::size_t op) {
                if (--unsatisfied[op] == 0) {
                    supporter[op] = f;
                    supporter_cost[op] = c;
                    const Cost through = add_costs(c, cost[op]);
                    for (auto e : add_[op]) enqueue(e, through);
                }
            });
        }
        if (is_infinite(value[goal_fact()])) return kInfiniteCost;

        Cost total = 0;
        std::vector<char> in_goal_zone(facts), in_before(facts), in_cut(ops);
        std::vector<AtomId> stack;
        std::vector<std::uint32_t> cut;
        while (value[goal_fact()] != 0) {
            // Goal zone: facts that reach the goal through zero-cost supporters.
            std::fill(in_goal_zone.begin(), in_goal_zone.end(), 0);
            stack.assign(1, goal_fact());
            in_goal_zone[goal_fact()] = 1;
            while (!stack.empty()) {
                const AtomId f = stack.back();
                stack.pop_back();
                for (auto op : achievers_[f]) {
                    if (unsatisfied[op] != 0 || cost[op] != 0) continue;
                    const AtomId s = supporter[op];
                    if (!in_goal_zone[s]) {
                        in_goal_zone[s] = 1;
                        stack.push_back(s);
                    }
                }
            }

            // Facts reachable from the state without entering the goal zone;
            // operators crossing into it form the cut.
            std::fill(in_before.begin(), in_before.end(), 0);
            std::fill(in_cut.begin(), in_cut.end(), 0);
            cut.clear();
            for (auto a : init_facts) {
                if (!in_before[a]) {
                    in_before[a] = 1;
                    stack.push_back(a);
                }
            }
            while (!stack.empty()) {
                const AtomId f = stack.back();
                stack.pop_back();
                triggered(f, [&](std::size_t op) {
                    if (unsatisfied[op] != 0 || supporter[op] != f) return;
                    for (auto e : add_[op]) {
                        if (in_goal_zone[e]) {
                            if (!in_cut[op]) {
                                in_cut[op] = 1;
                                cut.push_back(static_cast<std::uint32_t>(op));
                            }
                        } else if (!in_before[e]) {
                            in_before[e] = 1;
                            stack.push_back(e);
                        }
                    }
                });
            }
            if (cut.empty()) return total;
            Cost m = kInfiniteCost;
            for (auto op : cut) m = std::min(m, cost[op]);
            total = add_costs(total, m);
            for (auto op : cut) cost[op] -= m;

            // Incremental hmax repair: only cut operators became cheaper.
            for (auto op : cut) {
                const Cost through = add_costs(supporter_cost[op], cost[op]);
                for (auto e : add_[op]) enqueue(e, through);
            }
            while (!heap.empty()) {
                auto [c, f] = pop();
                if (c > value[f]) continue;
                triggered(f, [&](std::size_t op) {
                    if (unsatisfied[op] != 0 || supporter[op] != f || supporter_cost[op] <= c) return;
                    const Cost old = supporter_cost[op];
                    refresh_supporter(op);
                    if (supporter_cost[op] != old) {
                        const Cost through = add_costs(supporter_cost[op], cost[op]);
                        for (auto e : add_[op]) enqueue(e, through);
                    }
                });
            }
        }
        return total;
    }

    std::size_t atom_count_;
    std::vector<std::vector<AtomId>> pre_;
    std::vector<std::vector<AtomId>> add_;
    std::vector<Cost> cost_;
    std::vector<std::vector<std::uint32_t>> precondition_of_;
    std::vector<std::vector<std::uint32_t>> achievers_;
};

// One-shot evaluation. Goal atoms unknown to the problem yield the infinite
// marker, as do atoms unreachable under delete relaxation.
inline Cost heuristic(const Problem& problem, const State& state, const GoalCondition& goal, HeuristicKind kind) {
    std::vector<AtomId> ids;
    for (const auto& a : goal.atoms) {
        auto id = problem.atoms.find(a);
        if (!id) return kInfiniteCost;
        ids.push_back(*id);
    }
    return RelaxedTask(problem).evaluate(kind, state, ids);
}

}  // namespace pretcil::planner
