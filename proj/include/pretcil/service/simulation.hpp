#pragma once
//
// Simulated users, closed-loop simulation runs and parameter sweeps.
//

#include <cstdint>
#include <cstdio>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pretcil/session/session.hpp"

namespace pretcil::service {

enum class UserPolicy { Optimal, Noisy, Confuser };

inline std::string_view to_string(UserPolicy p) {
    switch (p) {
        case UserPolicy::Optimal: return "optimal";
        case UserPolicy::Noisy: return "noisy";
        case UserPolicy::Confuser: return "confuser";
    }
    return "?";
}

inline UserPolicy user_policy_from_string(std::string_view s) {
    if (s == "optimal") return UserPolicy::Optimal;
    if (s == "noisy") return UserPolicy::Noisy;
    if (s == "confuser" || s == "adversarial-confuser") return UserPolicy::Confuser;
    throw std::invalid_argument("unknown user policy '" + std::string(s) + "'");
}

struct SimulatedUserSpec {
    std::string goal;
    UserPolicy policy = UserPolicy::Optimal;
    double epsilon = 0.0;  // noisy policy only
    std::uint64_t seed = 0;
};

// Plays the user's side. Plans alone in a model holding only the user's
// actions (the agent's hand contents are part of the world and respected),
// re-planning whenever the world drifts from the expected trajectory. When the
// agent holds something the user cannot do without, the user instead takes its
// share of a cooperative two-actor plan, which usually means making progress
// and trusting the agent to place its block. Passes when even that fails.
class SimulatedUser {
public:
    SimulatedUser(const session::Models& models, const session::SessionConfig& config, SimulatedUserSpec spec)
        : models_(models), config_(config), spec_(std::move(spec)), rng_(spec_.seed) {
        if (!(spec_.epsilon >= 0.0 && spec_.epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1]");
        const auto idx = models.hypothesis_index(spec_.goal);
        if (!idx) throw std::invalid_argument("unknown goal '" + spec_.goal + "'");
        goal_ = models.hypotheses[*idx].goal;

        solo_ = models.recog;
        solo_.actions.clear();
        for (std::size_t i = 0; i < models.recog.actions.size(); ++i) {
            if (models.recog.actions[i].actor() == config.user) {
                solo_.actions.push_back(models.recog.actions[i]);
                solo_to_recog_.push_back(i);
            }
        }
        recog_to_world_.assign(models.recog.actions.size(), 0);
        for (std::size_t w = 0; w < models.to_recog.size(); ++w) recog_to_world_[models.to_recog[w]] = w;

        if (spec_.policy == UserPolicy::Confuser) {
            std::vector<std::size_t> others;
            for (std::size_t i = 0; i < models.hypotheses.size(); ++i) {
                if (i != *idx) others.push_back(i);
            }
            if (!others.empty()) {
                decoy_ = models.hypotheses[others[std::uniform_int_distribution<std::size_t>(0, others.size() - 1)(rng_)]].goal;
                decoy_actions_ = std::uniform_int_distribution<std::size_t>(1, 4)(rng_);
            }
        }
    }

    const GoalCondition& goal() const { return goal_; }

    // Chooses the next user action (a world action index).
    std::size_t choose(const session::Session& s) {
        const State here = models_.recog_state(s.world());
        if (spec_.policy == UserPolicy::Noisy) {
            const double roll = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);
            if (roll < spec_.epsilon) {
                const auto legal = s.legal_actions();
                return legal[std::uniform_int_distribution<std::size_t>(0, legal.size() - 1)(rng_)];
            }
        }
        const bool decoying = decoy_ && decoy_done_ < decoy_actions_ && !satisfies(solo_, here, *decoy_);
        const GoalCondition& target = decoying ? *decoy_ : goal_;
        if (decoying != following_decoy_) {
            plan_.clear();
            following_decoy_ = decoying;
        }
        std::optional<std::size_t> step = next_step(here, target);
        std::size_t action = responder::noop_of(models_.world, config_.user);
        if (step) {
            action = recog_to_world_[solo_to_recog_[*step]];
        } else if (!satisfies(solo_, here, target)) {
            if (auto shared = cooperative_step(s.world(), target)) action = *shared;
        }
        if (decoying && !models_.world.actions[action].passive) ++decoy_done_;
        return action;
    }

private:
    std::optional<std::size_t> next_step(const State& here, const GoalCondition& target) {
        if (pos_ < trajectory_.size() && trajectory_[pos_] == here && pos_ < plan_.size()) return plan_[pos_++];
        plan_.clear();
        trajectory_.clear();
        pos_ = 0;
        if (satisfies(solo_, here, target)) return std::nullopt;
        const planner::PlanOptions opts{planner::PlanMode::Optimal, {}, 0, std::nullopt};
        auto out = planner::plan(solo_, here, target, opts);
        const auto* p = planner::solution(out);
        if (!p || p->steps.empty()) return std::nullopt;
        plan_ = p->steps;
        State s = here;
        for (auto a : plan_) {
            trajectory_.push_back(s);
            s = successor(solo_.actions[a], s);
        }
        return plan_[pos_++];
    }

    std::optional<std::size_t> cooperative_step(const State& world, const GoalCondition& target) const {
        const planner::PlanOptions opts{planner::PlanMode::Optimal, {}, 0, std::nullopt};
        auto out = responder::joint_plan(models_.world, world, target, config_.user, opts);
        const auto* jp = std::get_if<responder::JointPlan>(&out);
        if (!jp || jp->steps.empty()) return std::nullopt;
        return jp->steps.front().action;
    }

    const session::Models& models_;
    const session::SessionConfig& config_;
    SimulatedUserSpec spec_;
    std::mt19937_64 rng_;
    GoalCondition goal_;
    Problem solo_;
    std::vector<std::size_t> solo_to_recog_;
    std::vector<std::size_t> recog_to_world_;
    std::optional<GoalCondition> decoy_;
    std::size_t decoy_actions_ = 0;
    std::size_t decoy_done_ = 0;
    bool following_decoy_ = false;
    std::vector<std::size_t> plan_;
    std::vector<State> trajectory_;
    std::size_t pos_ = 0;
};

struct SimulationMetrics {
    bool reached = false;
    std::size_t turns = 0;          // all actions, passes included
    std::size_t user_actions = 0;   // world-changing user actions
    std::size_t agent_actions = 0;  // world-changing agent actions
    std::size_t mismatches = 0;
    std::size_t conflict_fallbacks = 0;
    std::size_t recognition_calls = 0;
    std::size_t agent_holding_needed_block = 0;
};

struct SimulationResult {
    SimulationMetrics metrics;
    io::SessionLog transcript;
};

// Timestamps advance one second per record from a fixed epoch so that
// transcripts are reproducible byte for byte.
inline session::Clock logical_clock() {
    auto tick = std::make_shared<std::uint64_t>(0);
    return [tick]() {
        const auto t = (*tick)++;
        char buf[40];
        std::snprintf(buf, sizeof buf, "1970-01-01T%02llu:%02llu:%02llu.000Z", static_cast<unsigned long long>(t / 3600 % 24),
                      static_cast<unsigned long long>(t / 60 % 60), static_cast<unsigned long long>(t % 60));
        return std::string(buf);
    };
}

inline SimulationResult run_simulation(session::SessionConfig config, const SimulatedUserSpec& user,
                                       std::size_t max_turns,
                                       std::shared_ptr<recognition::CostCache> cache = nullptr) {
    if (max_turns == 0) throw std::invalid_argument("maxTurns must be positive");
    config.true_goal = user.goal;
    session::Session s(config, logical_clock());
    s.set_cost_cache(std::move(cache));
    SimulatedUser sim(s.models(), s.config(), user);
    SimulationResult r;
    while (!s.terminal() && r.metrics.turns < max_turns) {
        if (s.turn_owner() == s.config().user) {
            const auto a = sim.choose(s);
            s.submit_user_action(a);
            if (!s.world_model().actions[a].passive) ++r.metrics.user_actions;
        } else {
            const auto t = s.agent_step();
            if (!s.world_model().actions[t.action].passive) ++r.metrics.agent_actions;
        }
        ++r.metrics.turns;
    }
    r.metrics.reached = satisfies(s.world_model(), s.world(), sim.goal());
    r.metrics.mismatches = s.counters().mismatches;
    r.metrics.conflict_fallbacks = s.counters().conflict_fallbacks;
    r.metrics.recognition_calls = s.counters().recognition_calls;
    r.metrics.agent_holding_needed_block = s.counters().agent_holding_needed_block;
    r.transcript = s.log();
    return r;
}

struct SweepGrid {
    std::vector<double> taus{0.5};
    std::vector<std::size_t> head_starts{2};
    std::vector<double> betas{1.0};
    std::vector<responder::FallbackPolicy> policies{responder::FallbackPolicy::DefaultGoal};
    std::vector<std::string> goals;  // empty: every hypothesis
    std::size_t repetitions = 1;
    UserPolicy user = UserPolicy::Optimal;
    double epsilon = 0.0;
    std::uint64_t seed = 0;  // repetition r uses seed + r
    std::size_t max_turns = 60;
};

inline constexpr std::string_view kSweepHeader =
    "tau,headStart,beta,policy,goal,seed,reached,userActions,agentActions,mismatches,conflictFallbacks,recognitionCalls";

inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// Rows are produced in grid order: tau, head start, beta, policy, goal, repetition.
inline std::string run_sweep(const session::SessionConfig& base, const SweepGrid& grid) {
    if (grid.taus.empty() || grid.head_starts.empty() || grid.betas.empty() || grid.policies.empty() ||
        grid.repetitions == 0) {
        throw std::invalid_argument("sweep grid must be nonempty");
    }
    std::vector<std::string> goals = grid.goals;
    if (goals.empty()) {
        const auto models = session::build_models(base);
        for (const auto& h : models->hypotheses) goals.push_back(h.name);
    }
    auto cache = std::make_shared<recognition::CostCache>();
    std::ostringstream out;
    out << kSweepHeader << "\n";
    for (double tau : grid.taus) {
        for (auto k : grid.head_starts) {
            for (double beta : grid.betas) {
                for (auto policy : grid.policies) {
                    for (const auto& goal : goals) {
                        for (std::size_t rep = 0; rep < grid.repetitions; ++rep) {
                            auto c = base;
                            c.tau = tau;
                            c.head_start = k;
                            c.beta = beta;
                            c.fallback = policy;
                            c.seed = base.seed;
                            const std::uint64_t seed = grid.seed + rep;
                            auto r = run_simulation(c, {goal, grid.user, grid.epsilon, seed}, grid.max_turns, cache);
                            const auto& m = r.metrics;
                            out << format_number(tau) << ',' << k << ',' << format_number(beta) << ','
                                << responder::to_string(policy) << ',' << goal << ',' << seed << ','
                                << (m.reached ? 1 : 0) << ',' << m.user_actions << ',' << m.agent_actions << ','
                                << m.mismatches << ',' << m.conflict_fallbacks << ',' << m.recognition_calls << "\n";
                        }
                    }
                }
            }
        }
    }
    return out.str();
}

}  // namespace pretcil::service
