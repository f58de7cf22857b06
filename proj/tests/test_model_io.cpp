#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "fixtures.hpp"
#include "pretcil/io/domain.hpp"
#include "pretcil/io/session_log.hpp"
#include "pretcil/planner/search.hpp"
#include "pretcil/session/session.hpp"

using namespace pretcil;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::vector<fs::path> files_with(const std::string& dir, const std::string& ext) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(std::string(PRETCIL_DATA_DIR) + "/" + dir)) {
        if (e.path().extension() == ext) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string text_of(const fs::path& p) { return fixtures::slurp(p.string()); }

}  // namespace

TEST(ParseDomain, BlockWordsActionsPerActor) {
    const auto d = io::parse_domain(io::kBlockWordsDomain);
    std::vector<std::string> names;
    for (const auto& a : d.actions) names.push_back(a.name);
    EXPECT_EQ(names, (std::vector<std::string>{"pickup", "putdown", "stack", "unstack", "noop"}));
    EXPECT_EQ(d.mutexes.size(), 4u);
    const auto& p = fixtures::duo().problem;
    for (const char* actor : {"user", "agent"}) {
        EXPECT_TRUE(p.find_action(std::string("noop(") + actor + ")"));
        EXPECT_TRUE(p.find_action(std::string("pickup(") + actor + ",t)"));
        EXPECT_TRUE(p.find_action(std::string("unstack(") + actor + ",h,e)"));
    }
}

TEST(ParseDomain, UndeclaredPredicateIsNamed) {
    const char* text = R"((domain broken
  (predicates (on ?x ?y))
  (action lift (params ?x) (pre (floating ?x)) (add (on ?x ?x)))))";
    try {
        io::parse_domain(text);
        FAIL() << "expected a semantic error";
    } catch (const io::SemanticError& e) {
        EXPECT_NE(std::string(e.what()).find("floating"), std::string::npos) << e.what();
    }
}

TEST(ParseDomain, ArityMismatch) {
    const char* text = R"((domain broken
  (predicates (on ?x ?y))
  (action lift (params ?x) (pre (on ?x)))))";
    EXPECT_THROW(io::parse_domain(text), io::SemanticError);
}

TEST(ParseDomain, SyntaxErrorsCarryPosition) {
    try {
        io::parse_domain("(domain d\n  (predicates (p ?x)\n");
        FAIL() << "expected a syntax error";
    } catch (const io::SyntaxError& e) {
        EXPECT_GE(e.line(), 1u);
        EXPECT_GE(e.column(), 1u);
    }
    try {
        io::parse_domain("(domain d\n  (predicates (p ?x))\n  (bogus))");
        FAIL() << "expected a syntax error";
    } catch (const io::SyntaxError& e) {
        EXPECT_EQ(e.line(), 3u);
        EXPECT_EQ(e.column(), 3u);
    }
}

TEST(ParseDomain, CorpusRoundTrips) {
    const auto domains = files_with("domains", ".domain");
    ASSERT_GE(domains.size(), 10u);
    bool saw_blockwords = false;
    for (const auto& path : domains) {
        SCOPED_TRACE(path.string());
        const auto d1 = io::parse_domain(text_of(path));
        const auto printed = io::print_domain(d1);
        const auto d2 = io::parse_domain(printed);
        EXPECT_EQ(d1, d2);
        EXPECT_EQ(io::print_domain(d2), printed);
        saw_blockwords = saw_blockwords || d1.name == "blockwords";
    }
    EXPECT_TRUE(saw_blockwords);
}

TEST(ParseDomain, BuiltInTextMatchesCorpusFile) {
    EXPECT_EQ(io::parse_domain(io::kBlockWordsDomain),
              io::parse_domain(text_of(fs::path(PRETCIL_DATA_DIR) / "domains" / "blockwords.domain")));
}

TEST(ParseProblem, CorpusRoundTripsAndGrounds) {
    const auto problems = files_with("problems", ".problem");
    ASSERT_GE(problems.size(), 10u);
    for (const auto& path : problems) {
        SCOPED_TRACE(path.string());
        const auto p1 = io::parse_problem(text_of(path));
        const auto p2 = io::parse_problem(io::print_problem(p1));
        EXPECT_EQ(p1, p2);
        const auto d = io::parse_domain(text_of(fs::path(PRETCIL_DATA_DIR) / "domains" / (p1.domain + ".domain")));
        const auto ground = io::ground(d, p1);
        EXPECT_FALSE(ground.actions.empty());
        EXPECT_TRUE(violated_groups(ground, ground.init).empty());
    }
}

TEST(ParseProblem, DemoFileMatchesGenerator) {
    const auto spec = io::parse_problem(text_of(fs::path(PRETCIL_DATA_DIR) / "problems" / "demo.problem"));
    const auto from_file = io::ground(io::parse_domain(io::kBlockWordsDomain), spec);
    const auto& generated = fixtures::duo().problem;
    EXPECT_EQ(state_text(from_file, from_file.init), state_text(generated, generated.init));
    ASSERT_EQ(spec.hypotheses.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) {
        EXPECT_EQ(spec.hypotheses[i].label, fixtures::duo().goals[i].label);
        EXPECT_EQ(spec.hypotheses[i].goal, fixtures::duo().goals[i].goal);
    }
}

TEST(Ground, UnknownObjectInInitIsRejected) {
    auto spec = io::blockwords_problem_spec(io::demo_spec());
    spec.init.push_back(fixtures::atom("on-table(z)"));
    EXPECT_THROW(io::ground(io::parse_domain(io::kBlockWordsDomain), spec), ModelError);
}

TEST(Ground, InitialMutexViolationIsRejected) {
    auto spec = io::blockwords_problem_spec(io::demo_spec());
    // two blocks on h
    spec.init.push_back(fixtures::atom("on(t,h)"));
    spec.init.push_back(fixtures::atom("on(l,h)"));
    EXPECT_THROW(io::ground(io::parse_domain(io::kBlockWordsDomain), spec), io::SemanticError);
}

TEST(MakeBlockWords, FigureTwoAtoms) {
    const auto& p = fixtures::duo().problem;
    for (const char* a : {"on(h,e)", "on(e,r)", "on-table(r)", "on-table(t)", "clear(h)", "clear(t)", "handempty(user)",
                          "handempty(agent)", "turn(user)"}) {
        EXPECT_TRUE(fixtures::holds(p, p.init, a)) << a;
    }
    for (const char* a : {"clear(e)", "on-table(h)", "turn(agent)"}) EXPECT_FALSE(fixtures::holds(p, p.init, a)) << a;
    EXPECT_EQ(fixtures::duo().problem.actors, (std::vector<std::string>{"user", "agent"}));
}

TEST(MakeBlockWords, FatherChain) {
    EXPECT_EQ(fixtures::goal_of(fixtures::duo(), "father"),
              fixtures::goal({"on(f,a)", "on(a,t)", "on(t,h)", "on(h,e)", "on(e,r)"}));
}

TEST(MakeBlockWords, MinimalChain) {
    const auto inst = io::make_blockwords({{"a", "b"}, {"ab"}, {"user"}});
    ASSERT_EQ(inst.goals.size(), 1u);
    EXPECT_EQ(inst.goals[0].goal, fixtures::goal({"on(a,b)"}));
}

TEST(MakeBlockWords, SixGoalsWithChainSizes) {
    const auto& goals = fixtures::duo().goals;
    ASSERT_EQ(goals.size(), 6u);
    const std::map<std::string, std::size_t> sizes{{"father", 5}, {"mother", 5}, {"master", 5},
                                                   {"faster", 5}, {"later", 4},  {"water", 4}};
    for (const auto& g : goals) {
        EXPECT_EQ(g.goal.atoms.size(), sizes.at(g.label)) << g.label;
        EXPECT_TRUE(goal_conflicts(fixtures::duo().problem, g.goal).empty()) << g.label;
    }
}

TEST(MakeBlockWords, ValidationErrors) {
    EXPECT_THROW(io::make_blockwords({{"ab"}, {"abc"}, {"user"}}), ModelError);          // missing letter
    EXPECT_THROW(io::make_blockwords({{"ab", "a"}, {"ab"}, {"user"}}), ModelError);      // duplicate block
    EXPECT_THROW(io::make_blockwords({{"ab"}, {"ab"}, {}}), ModelError);                 // no actor
    EXPECT_THROW(io::make_blockwords({{"ab"}, {"a"}, {"user"}}), ModelError);            // one-letter word
}

// A consistent goal is witnessed by a reachable state (small instance, planner search).
TEST(MakeBlockWords, ConsistentGoalsAreReachable) {
    const auto inst = io::make_blockwords({{"ab", "c", "d"}, {"abc", "dab", "cd"}, {"user"}});
    for (const auto& g : inst.goals) {
        ASSERT_TRUE(goal_conflicts(inst.problem, g.goal).empty());
        const auto out = planner::plan(inst.problem, inst.problem.init, g.goal, {});
        EXPECT_TRUE(std::holds_alternative<planner::Plan>(out)) << g.label;
    }
}

namespace {

io::LogRecord record(std::uint64_t turn) {
    io::LogRecord r;
    r.turn = turn;
    r.actor = turn % 2 ? "user" : "agent";
    r.action = "noop(" + r.actor + ")";
    r.digest = "d" + std::to_string(turn);
    r.posterior = turn == 2 ? json{{"father", 0.5}, {"mother", 0.5}} : json(nullptr);
    r.intermediate_goal = nullptr;
    r.verdict = turn % 2 ? "no-prediction" : "";
    r.decision = turn % 2 ? "" : "head-start";
    r.timestamp = "1970-01-01T00:00:0" + std::to_string(turn) + ".000Z";
    return r;
}

}  // namespace

TEST(SessionLog, EmptySessionIsEmptyFile) {
    EXPECT_EQ(io::write_log(std::vector<io::LogRecord>{}), "");
    EXPECT_TRUE(io::read_log("").records.empty());
}

TEST(SessionLog, ThreeTurnsThreeLines) {
    const std::vector<io::LogRecord> records{record(1), record(2), record(3)};
    const auto text = io::write_log(records);
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
    const auto back = io::read_log(text);
    EXPECT_EQ(back.records, records);
    EXPECT_FALSE(back.header);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(back.records[i].turn, i + 1);
}

TEST(SessionLog, HeaderRoundTrip) {
    io::SessionLog log{io::LogHeader{std::string(io::kLogSchema), io::kLogVersion, json{{"tau", 0.5}}},
                       {record(1), record(2)}};
    const auto text = io::write_log(log);
    EXPECT_EQ(io::read_log(text), log);
    // line 1 names the fields
    const auto first = json::parse(text.substr(0, text.find('\n')));
    EXPECT_EQ(first["fields"].size(), io::log_fields().size());
}

TEST(SessionLog, MalformedLineReportsLineNumber) {
    auto text = io::write_log(std::vector<io::LogRecord>{record(1), record(2)});
    text += "{not json\n";
    try {
        io::read_log(text);
        FAIL() << "expected a log error";
    } catch (const io::LogError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    try {
        io::read_log(io::write_log(std::vector<io::LogRecord>{record(2), record(1)}));
        FAIL() << "expected a log error";
    } catch (const io::LogError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    try {
        io::read_log("{\"turn\":1}\n");
        FAIL() << "expected a log error";
    } catch (const io::LogError& e) {
        EXPECT_EQ(e.line(), 1u);
        EXPECT_NE(std::string(e.what()).find("actor"), std::string::npos);
    }
}

TEST(SessionLog, TamperedDigestFailsReplay) {
    session::SessionConfig c;
    c.head_start = 10;  // agent passes; keeps the test fast
    session::Session s(c);
    s.submit_user_action("pickup(user,t)");
    s.agent_step();
    s.submit_user_action("stack(user,t,h)");
    auto log = s.log();
    ASSERT_EQ(log.records.size(), 3u);
    EXPECT_NO_THROW(session::replay(io::write_log(log)));

    auto bad = log;
    bad.records[1].digest = "0000000000000000";
    try {
        session::replay(io::write_log(bad));
        FAIL() << "expected a digest mismatch";
    } catch (const session::ReplayError& e) {
        EXPECT_EQ(e.turn(), 2u);
        EXPECT_NE(std::string(e.what()).find("digest"), std::string::npos) << e.what();
    }
}
