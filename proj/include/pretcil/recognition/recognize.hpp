#pragma once
//
// Probabilistic goal recognition as planning. For each hypothesis G the
// optimal costs of complying with and of avoiding the observations give
// Delta = c_comply - c_avoid and likelihood 1 / (1 + exp(beta * Delta));
// the posterior is likelihood times prior, normalized.
//

#include <cmath>
#include <future>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pretcil/core/strips.hpp"
#include "pretcil/planner/search.hpp"
#include "pretcil/recognition/compile.hpp"

namespace pretcil::recognition {

struct Hypothesis {
    std::string name;
    GoalCondition goal;
    double prior = 0.0;
};

inline std::vector<Hypothesis> with_uniform_prior(std::vector<std::pair<std::string, GoalCondition>> goals) {
    std::vector<Hypothesis> out;
    const double p = goals.empty() ? 0.0 : 1.0 / static_cast<double>(goals.size());
    for (auto& [name, g] : goals) out.push_back({std::move(name), std::move(g), p});
    return out;
}

inline void validate_priors(std::span<const Hypothesis> hyps) {
    if (hyps.empty()) throw std::invalid_argument("at least one goal hypothesis is required");
    double sum = 0.0;
    for (const auto& h : hyps) {
        if (!(h.prior > 0.0 && h.prior <= 1.0)) {
            throw std::invalid_argument("prior of '" + h.name + "' must lie in (0, 1]");
        }
        sum += h.prior;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("priors must sum to 1");
}

// Memo of compiled-problem outcomes, shared by callers that recognize over
// the same world model many times (sweeps, batches of simulations). Only
// outcomes that do not depend on wall time are stored, so a hit returns
// exactly what the planner would have. One cache per world model.
class CostCache {
public:
    std::optional<planner::PlanOutcome> find(const std::string& key) const {
        std::lock_guard lock(mutex_);
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        ++hits_;
        return it->second;
    }

    void store(const std::string& key, const planner::PlanOutcome& outcome) {
        if (const auto* b = std::get_if<planner::BudgetExhausted>(&outcome); b && b->reason != "expansion limit reached") {
            return;
        }
        std::lock_guard lock(mutex_);
        entries_.emplace(key, outcome);
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return entries_.size();
    }
    std::size_t hits() const {
        std::lock_guard lock(mutex_);
        return hits_;
    }

private:
    mutable std::mutex mutex_;
    std::map<std::string, planner::PlanOutcome> entries_;
    mutable std::size_t hits_ = 0;
};

struct RecognitionConfig {
    double beta = 1.0;
    planner::PlanMode mode = planner::PlanMode::Optimal;
    planner::SearchBudget budget{};
    std::size_t workers = 1;
    std::uint64_t tie_break_seed = 0;
    std::shared_ptr<CostCache> cache;  // optional
};

struct GoalDiagnostics {
    Cost c_comply = kInfiniteCost;
    Cost c_avoid = kInfiniteCost;
    double delta = std::numeric_limits<double>::quiet_NaN();  // in cost units; NaN when undefined
    double likelihood = 0.0;
    bool feasible = false;
    bool budget_degraded = false;
};

struct GoalPosterior {
    std::vector<double> probability;
    std::vector<GoalDiagnostics> diagnostics;  // empty when the prior was returned directly
    bool no_hypothesis = false;
    bool budget_degraded = false;
};

// 1 / (1 + exp(beta * (c_comply - c_avoid))); nullopt when both are infinite.
inline std::optional<double> goal_likelihood(Cost c_comply, Cost c_avoid, double beta) {
    const bool comply_inf = is_infinite(c_comply);
    const bool avoid_inf = is_infinite(c_avoid);
    if (comply_inf && avoid_inf) return std::nullopt;
    if (avoid_inf) return 1.0;
    if (comply_inf) return 0.0;
    const double delta = cost_to_units(c_comply) - cost_to_units(c_avoid);
    return 1.0 / (1.0 + std::exp(beta * delta));
}

// Observed actions that change the world; passive actions (no-ops) are
// dropped because a plan can trivially avoid them.
inline std::vector<std::size_t> informative_observations(const Problem& model, std::span<const std::size_t> observed) {
    std::vector<std::size_t> out;
    for (auto o : observed) {
        if (!model.action(o).passive) out.push_back(o);
    }
    return out;
}

inline GoalPosterior recognize(const Problem& model, const State& start, std::span<const Hypothesis> hyps,
                               std::span<const std::size_t> observed, const RecognitionConfig& config) {
    validate_priors(hyps);
    if (!(config.beta > 0.0)) throw std::invalid_argument("beta must be positive");

    GoalPosterior post;
    for (const auto& h : hyps) post.probability.push_back(h.prior);
    const auto obs = informative_observations(model, observed);
    if (obs.empty()) return post;

    Problem base = model;
    base.init = start;
    planner::PlanOptions opts{config.mode, config.budget, config.tie_break_seed, std::nullopt};
    opts.prefer_fewer_steps = false;  // only costs are used

    struct Task {
        Problem problem;
        planner::PlanOutcome outcome;
        std::string key;
    };
    std::vector<Task> tasks;
    tasks.reserve(hyps.size() * 2);
    std::string shared_key;
    if (config.cache) {
        shared_key = std::string(planner::to_string(config.mode)) + "|" + std::to_string(config.budget.max_expansions) +
                     "|" + std::to_string(config.tie_break_seed) + "|" + state_text(model, start) + "|";
        for (auto o : obs) shared_key += std::to_string(o) + ",";
    }
    for (const auto& h : hyps) {
        std::string goal_key;
        if (config.cache) goal_key = shared_key + "|" + h.goal.str();
        tasks.push_back({compile_comply(base, h.goal, obs), planner::Unsolvable{}, config.cache ? goal_key + "|comply" : ""});
        tasks.push_back({compile_avoid(base, h.goal, obs), planner::Unsolvable{}, config.cache ? goal_key + "|avoid" : ""});
    }
    std::vector<std::size_t> pending;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
        if (config.cache) {
            if (auto hit = config.cache->find(tasks[t].key)) {
                tasks[t].outcome = std::move(*hit);
                continue;
            }
        }
        pending.push_back(t);
    }
    const std::size_t workers = std::max<std::size_t>(1, config.workers);
    for (std::size_t begin = 0; begin < pending.size(); begin += workers) {
        const std::size_t end = std::min(pending.size(), begin + workers);
        if (workers == 1) {
            tasks[pending[begin]].outcome = planner::plan(tasks[pending[begin]].problem, opts);
            continue;
        }
        std::vector<std::future<planner::PlanOutcome>> running;
        for (std::size_t k = begin; k < end; ++k) {
            const auto t = pending[k];
            running.push_back(std::async(std::launch::async, [&, t] { return planner::plan(tasks[t].problem, opts); }));
        }
        for (std::size_t k = begin; k < end; ++k) tasks[pending[k]].outcome = running[k - begin].get();
    }
    if (config.cache) {
        for (auto t : pending) config.cache->store(tasks[t].key, tasks[t].outcome);
    }

    double z = 0.0;
    std::vector<double> weight(hyps.size(), 0.0);
    for (std::size_t i = 0; i < hyps.size(); ++i) {
        GoalDiagnostics d;
        const auto& comply = tasks[2 * i].outcome;
        const auto& avoid = tasks[2 * i + 1].outcome;
        d.c_comply = planner::outcome_cost(comply);
        d.c_avoid = planner::outcome_cost(avoid);
        d.budget_degraded = planner::is_budget_exhausted(comply) || planner::is_budget_exhausted(avoid);
        if (!is_infinite(d.c_comply) && !is_infinite(d.c_avoid)) {
            d.delta = cost_to_units(d.c_comply) - cost_to_units(d.c_avoid);
        }
        const auto l = goal_likelihood(d.c_comply, d.c_avoid, config.beta);
        d.feasible = l.has_value();
        d.likelihood = l.value_or(0.0);
        weight[i] = d.likelihood * hyps[i].prior;
        z += weight[i];
        post.budget_degraded = post.budget_degraded || d.budget_degraded;
        post.diagnostics.push_back(d);
    }
    if (!(z > 0.0)) {
        post.no_hypothesis = true;
        return post;
    }
    for (std::size_t i = 0; i < hyps.size(); ++i) post.probability[i] = weight[i] / z;
    return post;
}

inline GoalPosterior recognize(const Problem& model, std::span<const Hypothesis> hyps, std::span<const std::size_t> observed,
                               const RecognitionConfig& config) {
    return recognize(model, model.init, hyps, observed, config);
}

}  // namespace pretcil::recognition
