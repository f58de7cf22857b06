#pragma once

#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "pretcil/planner/search.hpp"

namespace pretcil::planner {

struct WcdResult {
    std::size_t length = 0;
    std::vector<std::size_t> prefix;  // one witness of maximal length
};

using WcdOutcome = std::variant<WcdResult, Unsolvable, BudgetExhausted>;

// Worst-case distinctiveness: the longest action sequence that starts some
// optimal plan for `a` and some optimal plan for `b` from the initial state.
// Enumerates the shared optimal-prefix graph depth-first; a prefix survives
// while g + h*(s) stays equal to the optimal cost for both goals. Exponential
// in the worst case; the budget caps total search expansions.
inline WcdOutcome wcd(const Problem& problem, const GoalCondition& a, const GoalCondition& b,
                      const SearchBudget& budget, std::uint64_t tie_break_seed = 0) {
    std::size_t spent = 0;
    bool exhausted = false;
    PlanOptions opts{PlanMode::Optimal, budget, tie_break_seed, HeuristicKind::LmCut};

    struct Memo {
        std::unordered_map<State, Cost, StateHash> remaining;
    };
    Memo memo_a, memo_b;
    auto remaining = [&](Memo& memo, const GoalCondition& goal, const State& s) -> Cost {
        if (auto it = memo.remaining.find(s); it != memo.remaining.end()) return it->second;
        SearchStats st;
        opts.budget.max_expansions = budget.max_expansions > spent ? budget.max_expansions - spent : 0;
        auto outcome = plan(problem, s, goal, opts, &st);
        spent += st.expanded;
        if (is_budget_exhausted(outcome)) {
            exhausted = true;
            return kInfiniteCost;
        }
        const Cost c = outcome_cost(outcome);
        memo.remaining.emplace(s, c);
        return c;
    };

    const Cost best_a = remaining(memo_a, a, problem.init);
    const Cost best_b = remaining(memo_b, b, problem.init);
    if (exhausted) return BudgetExhausted{spent, "optimal-plan enumeration exceeded budget"};
    if (is_infinite(best_a) || is_infinite(best_b)) return Unsolvable{"one of the goals has no plan"};

    const RelaxedTask task(problem);
    const auto goal_a = problem.resolve(a);
    const auto goal_b = problem.resolve(b);
    const auto rank = action_ranks(problem, tie_break_seed);
    std::vector<std::uint32_t> order(problem.actions.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[rank[i]] = i;

    WcdResult result;
    std::vector<std::size_t> prefix;
    std::unordered_set<State, StateHash> on_path;
    std::unordered_map<State, std::size_t, StateHash> explored;  // state -> best depth seen

    auto dfs = [&](auto& self, const State& s, Cost g) -> void {
        if (exhausted) return;
        if (prefix.size() > result.length) {
            result.length = prefix.size();
            result.prefix = prefix;
        }
        for (auto ai : order) {
            const auto& act = problem.actions[ai];
            if (!s.contains_all(act.pre)) continue;
            State next = successor(act, s);
            if (next == s || on_path.count(next)) continue;
            const Cost g2 = add_costs(g, act.cost);
            if (g2 > best_a || g2 > best_b) continue;
            if (add_costs(g2, task.evaluate(HeuristicKind::LmCut, next, goal_a)) > best_a) continue;
            if (add_costs(g2, task.evaluate(HeuristicKind::LmCut, next, goal_b)) > best_b) continue;
            if (add_costs(g2, remaining(memo_a, a, next)) != best_a) continue;
            if (add_costs(g2, remaining(memo_b, b, next)) != best_b) continue;
            if (auto it = explored.find(next); it != explored.end() && it->second >= prefix.size() + 1) continue;
            explored[next] = prefix.size() + 1;
            prefix.push_back(ai);
            on_path.insert(next);
            self(self, next, g2);
            on_path.erase(next);
            prefix.pop_back();
            if (exhausted) return;
        }
    };
    on_path.insert(problem.init);
    dfs(dfs, problem.init, 0);
    if (exhausted) return BudgetExhausted{spent, "optimal-plan enumeration exceeded budget"};
    return result;
}

}  // namespace pretcil::planner
