#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <queue>
#include <random>

#include "fixtures.hpp"
#include "oracle/bridge.hpp"
#include "oracle/ground_search.hpp"
#include "pretcil/io/domain.hpp"
#include "pretcil/planner/heuristics.hpp"
#include "pretcil/planner/search.hpp"
#include "pretcil/planner/wcd.hpp"

using namespace pretcil;
using planner::HeuristicKind;

namespace {

const Problem& solo() { return fixtures::solo().problem; }

oracle::Instance solo_oracle() {
    return oracle::Instance::from_stacks(io::demo_spec().stacks, {"user"});
}

planner::Plan solve(const Problem& p, const State& s, const GoalCondition& g, planner::PlanOptions o = {}) {
    auto out = planner::plan(p, s, g, o);
    if (!std::holds_alternative<planner::Plan>(out)) throw std::runtime_error("no plan");
    return std::get<planner::Plan>(out);
}

std::vector<std::size_t> steps_of(const Problem& p, std::initializer_list<const char*> names) {
    std::vector<std::size_t> out;
    for (auto n : names) out.push_back(p.action_index(n));
    return out;
}


}  // namespace

TEST(Plan, OptimalDemoCostsMatchOracle) {
    const std::map<std::string, int> expected{{"father", 6}, {"mother", 6}, {"master", 10},
                                              {"faster", 10}, {"later", 8}, {"water", 8}};
    auto in = solo_oracle();
    for (const auto& word : fixtures::words()) {
        in.set_word(word);
        const auto oracle_cost = oracle::ida_cost(in, in.init);
        ASSERT_TRUE(oracle_cost) << word;
        EXPECT_EQ(*oracle_cost, expected.at(word)) << word;

        const auto p = solve(solo(), solo().init, fixtures::goal_of(fixtures::solo(), word));
        EXPECT_EQ(p.cost, *oracle_cost * kCostScale) << word;
        EXPECT_TRUE(planner::validate_plan(solo(), solo().init, fixtures::goal_of(fixtures::solo(), word), p.steps)) << word;
    }
}

TEST(Plan, ExhibitedFatherPlanIsValid) {
    const auto steps = steps_of(solo(), {"pickup(user,t)", "stack(user,t,h)", "pickup(user,a)", "stack(user,a,t)",
                                         "pickup(user,f)", "stack(user,f,a)"});
    EXPECT_TRUE(planner::validate_plan(solo(), solo().init, fixtures::goal_of(fixtures::solo(), "father"), steps));
}

TEST(Plan, SatisfiedGoalGivesEmptyPlan) {
    const auto p = solve(solo(), solo().init, fixtures::goal({"on(h,e)"}));
    EXPECT_TRUE(p.steps.empty());
    EXPECT_EQ(p.cost, 0);
}

TEST(Plan, MutexConflictIsUnsolvable) {
    const auto out = planner::plan(solo(), solo().init, fixtures::goal({"on(a,t)", "on(o,t)"}), {});
    EXPECT_TRUE(planner::is_unsolvable(out));
}

TEST(Plan, EveryConflictingPairIsUnsolvable) {
    std::mt19937_64 rng(3);
    const std::string blocks = "trehlsmofwba";
    int checked = 0;
    while (checked < 40) {
        const char x = blocks[rng() % blocks.size()], y = blocks[rng() % blocks.size()], z = blocks[rng() % blocks.size()];
        if (x == y || y == z || x == z) continue;
        // x on y and z on y, or x on y and x on z
        const auto g1 = fixtures::goal({("on(" + std::string(1, x) + "," + y + ")").c_str(),
                                        ("on(" + std::string(1, z) + "," + y + ")").c_str()});
        const auto g2 = fixtures::goal({("on(" + std::string(1, x) + "," + y + ")").c_str(),
                                        ("on(" + std::string(1, x) + "," + z + ")").c_str()});
        for (const auto& g : {g1, g2}) {
            ASSERT_FALSE(goal_conflicts(solo(), g).empty());
            EXPECT_TRUE(planner::is_unsolvable(planner::plan(solo(), solo().init, g, {}))) << g.str();
        }
        ++checked;
    }
}

TEST(Plan, BudgetExhaustionIsNotUnsolvable) {
    planner::PlanOptions o;
    o.budget.max_expansions = 1;
    const auto out = planner::plan(solo(), solo().init, fixtures::goal_of(fixtures::solo(), "master"), o);
    EXPECT_TRUE(planner::is_budget_exhausted(out));
    EXPECT_FALSE(planner::is_unsolvable(out));
}

TEST(Plan, SatisficingReturnsValidPlans) {
    planner::PlanOptions o;
    o.mode = planner::PlanMode::Satisficing;
    for (const auto& g : fixtures::solo().goals) {
        const auto p = solve(solo(), solo().init, g.goal, o);
        EXPECT_TRUE(planner::validate_plan(solo(), solo().init, g.goal, p.steps)) << g.label;
        EXPECT_GE(p.cost, solve(solo(), solo().init, g.goal).cost);
    }
}

TEST(Plan, DeterministicForFixedSeed) {
    for (std::uint64_t seed : {0u, 1u, 17u}) {
        planner::PlanOptions o;
        o.tie_break_seed = seed;
        const auto& g = fixtures::goal_of(fixtures::solo(), "later");
        const auto a = solve(solo(), solo().init, g, o);
        const auto b = solve(solo(), solo().init, g, o);
        EXPECT_EQ(planner::plan_names(solo(), a.steps), planner::plan_names(solo(), b.steps));
        EXPECT_EQ(a.cost, 8 * kCostScale);
    }
}

TEST(Plan, TurnTakingPlansAlternateActors) {
    const auto& p = fixtures::duo().problem;
    const auto plan = solve(p, p.init, fixtures::goal_of(fixtures::duo(), "father"));
    EXPECT_EQ(plan.cost, 6 * kCostScale);  // passes are free
    for (std::size_t i = 0; i < plan.steps.size(); ++i) {
        EXPECT_EQ(p.actions[plan.steps[i]].actor(), i % 2 == 0 ? "user" : "agent");
    }
    EXPECT_TRUE(planner::validate_plan(p, p.init, fixtures::goal_of(fixtures::duo(), "father"), plan.steps));
}

// Optimal costs equal breadth-first search on every small instance tried.
TEST(Plan, SmallInstancesMatchExhaustiveSearch) {
    std::mt19937_64 rng(11);
    int instances = 0;
    for (int round = 0; round < 120; ++round) {
        const std::size_t n = 3 + rng() % 4;  // 3..6 blocks
        const std::size_t hands = 1 + rng() % 2;
        const auto stacks = oracle::random_stacks(n, rng);
        const auto word = oracle::random_word(n, 2 + rng() % (n - 1), rng);
        std::vector<std::string> actors{"user"};
        if (hands == 2) actors.push_back("agent");
        auto in = oracle::Instance::from_stacks(stacks, actors);
        in.set_word(word);
        const auto expected = oracle::bfs_cost(in, in.init);
        ASSERT_TRUE(expected);

        const auto inst = io::make_blockwords({stacks, {word}, actors}, {.turn_taking = false});
        const auto p = solve(inst.problem, inst.problem.init, inst.goals[0].goal);
        EXPECT_EQ(p.cost, *expected * kCostScale) << "stacks " << ::testing::PrintToString(stacks) << " word " << word;
        ++instances;
    }
    EXPECT_EQ(instances, 120);
}

TEST(Plan, CorpusProblemsMatchUniformCostSearch) {
    namespace fs = std::filesystem;
    int solved = 0;
    for (const auto& e : fs::directory_iterator(std::string(PRETCIL_DATA_DIR) + "/problems")) {
        const auto spec = io::parse_problem(fixtures::slurp(e.path().string()));
        if (spec.domain == "blockwords") continue;  // covered above
        SCOPED_TRACE(e.path().string());
        const auto d = io::parse_domain(
            fixtures::slurp(std::string(PRETCIL_DATA_DIR) + "/domains/" + spec.domain + ".domain"));
        const auto p = io::ground(d, spec);
        const auto expected = oracle::uniform_cost(p, p.init, p.goal);
        ASSERT_FALSE(is_infinite(expected));
        const auto out = planner::plan(p, {});
        ASSERT_TRUE(std::holds_alternative<planner::Plan>(out));
        EXPECT_EQ(std::get<planner::Plan>(out).cost, expected);
        EXPECT_TRUE(planner::validate_plan(p, std::get<planner::Plan>(out)));
        ++solved;
    }
    EXPECT_GE(solved, 9);
}

TEST(ValidatePlan, SwappedFinalStepsFailAtStepFive) {
    auto steps = steps_of(solo(), {"pickup(user,t)", "stack(user,t,h)", "pickup(user,a)", "stack(user,a,t)",
                                   "pickup(user,f)", "stack(user,f,a)"});
    std::swap(steps[4], steps[5]);
    const auto v = planner::validate_plan(solo(), solo().init, fixtures::goal_of(fixtures::solo(), "father"), steps);
    EXPECT_FALSE(v.valid);
    EXPECT_EQ(v.failed_step, 5u);
}

TEST(ValidatePlan, EmptyPlanOnSatisfiedGoal) {
    EXPECT_TRUE(planner::validate_plan(solo(), solo().init, fixtures::goal({"on(e,r)"}), {}));
    EXPECT_FALSE(planner::validate_plan(solo(), solo().init, fixtures::goal({"on(t,h)"}), {}));
}

TEST(Heuristic, ZeroOnSatisfiedGoal) {
    for (auto k : {HeuristicKind::HMax, HeuristicKind::HAdd, HeuristicKind::LmCut}) {
        EXPECT_EQ(planner::heuristic(solo(), solo().init, fixtures::goal({"on(h,e)", "on(e,r)"}), k), 0);
        EXPECT_GT(planner::heuristic(solo(), solo().init, fixtures::goal_of(fixtures::solo(), "father"), k), 0);
    }
}

TEST(Heuristic, HmaxBelowFatherCost) {
    const auto h = planner::heuristic(solo(), solo().init, fixtures::goal_of(fixtures::solo(), "father"), HeuristicKind::HMax);
    EXPECT_LE(h, 6 * kCostScale);
    EXPECT_GT(h, 0);
}

TEST(Heuristic, UnreachableAtomIsInfinite) {
    for (auto k : {HeuristicKind::HMax, HeuristicKind::HAdd, HeuristicKind::LmCut}) {
        EXPECT_TRUE(is_infinite(planner::heuristic(solo(), solo().init, fixtures::goal({"on(z,z)"}), k)));
    }
    // declared but with no achiever: a block cannot sit on itself
    const auto inst = io::make_blockwords({{"a", "b"}, {"ab"}, {"user"}});
    const auto& p = inst.problem;
    if (p.atoms.find(fixtures::atom("on(a,a)"))) {
        EXPECT_TRUE(is_infinite(planner::heuristic(p, p.init, fixtures::goal({"on(a,a)"}), HeuristicKind::HMax)));
    }
}

// hmax and LM-cut never exceed the exact distance on small instances.
TEST(Heuristic, AdmissibleOnSmallStateSpaces) {
    std::mt19937_64 rng(5);
    std::size_t checked = 0;
    for (int round = 0; round < 4; ++round) {
        const auto stacks = oracle::random_stacks(5, rng);
        const auto word = oracle::random_word(5, 3, rng);
        const std::vector<std::string> actors{"user"};
        auto in = oracle::Instance::from_stacks(stacks, actors);
        in.set_word(word);
        const auto dist = oracle::goal_distances(in);
        const auto inst = io::make_blockwords({stacks, {word}, actors});
        const auto& g = inst.goals[0].goal;
        std::size_t k = 0;
        for (const auto& [w, d] : dist) {
            if (k++ % 7) continue;
            const auto s = oracle::to_state(inst.problem, in, w);
            const auto hmax = planner::heuristic(inst.problem, s, g, HeuristicKind::HMax);
            const auto lmcut = planner::heuristic(inst.problem, s, g, HeuristicKind::LmCut);
            EXPECT_LE(hmax, d * kCostScale);
            EXPECT_LE(lmcut, d * kCostScale);
            EXPECT_EQ(hmax == 0, d == 0);
            ++checked;
        }
    }
    EXPECT_GT(checked, 100u);
}

TEST(Wcd, DemoPairsMatchOracle) {
    auto in = solo_oracle();
    struct Case {
        const char* a;
        const char* b;
        std::size_t expected;
    };
    for (const Case& c : {Case{"father", "mother", 2}, Case{"later", "water", 6}, Case{"father", "father", 6}}) {
        auto ib = in;
        ib.set_word(c.b);
        in.set_word(c.a);
        const auto ref = oracle::wcd(in, ib.goal);
        ASSERT_TRUE(ref);
        EXPECT_EQ(static_cast<std::size_t>(*ref), c.expected) << c.a << "/" << c.b;

        const auto out = planner::wcd(solo(), fixtures::goal_of(fixtures::solo(), c.a),
                                      fixtures::goal_of(fixtures::solo(), c.b), planner::SearchBudget{});
        ASSERT_TRUE(std::holds_alternative<planner::WcdResult>(out)) << c.a << "/" << c.b;
        const auto& r = std::get<planner::WcdResult>(out);
        EXPECT_EQ(r.length, c.expected) << c.a << "/" << c.b;
        EXPECT_EQ(r.prefix.size(), r.length);
    }
}

TEST(Wcd, LaterWaterSharedPrefix) {
    const auto out = planner::wcd(solo(), fixtures::goal_of(fixtures::solo(), "later"),
                                  fixtures::goal_of(fixtures::solo(), "water"), planner::SearchBudget{});
    const auto& r = std::get<planner::WcdResult>(out);
    EXPECT_EQ(planner::plan_names(solo(), r.prefix),
              (std::vector<std::string>{"unstack(user,h,e)", "putdown(user,h)", "pickup(user,t)", "stack(user,t,e)",
                                        "pickup(user,a)", "stack(user,a,t)"}));
}

TEST(Wcd, BudgetExhaustion) {
    const auto out = planner::wcd(solo(), fixtures::goal_of(fixtures::solo(), "later"),
                                  fixtures::goal_of(fixtures::solo(), "water"), planner::SearchBudget{3, std::chrono::milliseconds(60000)});
    EXPECT_TRUE(std::holds_alternative<planner::BudgetExhausted>(out));
}

TEST(Wcd, SmallInstancesMatchOracle) {
    std::mt19937_64 rng(23);
    for (int round = 0; round < 25; ++round) {
        const auto stacks = oracle::random_stacks(5, rng);
        const auto wa = oracle::random_word(5, 3, rng);
        const auto wb = oracle::random_word(5, 3, rng);
        auto in = oracle::Instance::from_stacks(stacks, {"user"});
        auto ib = in;
        in.set_word(wa);
        ib.set_word(wb);
        const auto ref = oracle::wcd(in, ib.goal);
        ASSERT_TRUE(ref);
        const auto inst = io::make_blockwords({stacks, {wa, wb}, {"user"}});
        const auto out = planner::wcd(inst.problem, inst.goals[0].goal, inst.goals[1].goal, planner::SearchBudget{});
        ASSERT_TRUE(std::holds_alternative<planner::WcdResult>(out));
        EXPECT_EQ(std::get<planner::WcdResult>(out).length, static_cast<std::size_t>(*ref))
            << ::testing::PrintToString(stacks) << " " << wa << "/" << wb;
    }
}
