#pragma once
//
// Block Words instances: lettered blocks on a table, one-handed actors that
// take turns, and candidate goal words spelled top-to-bottom by a stack.
//

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "pretcil/core/strips.hpp"
#include "pretcil/io/domain.hpp"

namespace pretcil::io {

inline constexpr std::string_view kBlockWordsDomain = R"((domain blockwords
  (types block actor)
  (predicates
    (on ?x - block ?y - block)
    (on-table ?x - block)
    (clear ?x - block)
    (holding ?a - actor ?x - block)
    (handempty ?a - actor)
    (turn ?a - actor))
  (actor-type actor)
  (turn-predicate turn)
  (action pickup
    (params ?a - actor ?x - block)
    (actor ?a)
    (pre (clear ?x) (on-table ?x) (handempty ?a))
    (add (holding ?a ?x))
    (del (clear ?x) (on-table ?x) (handempty ?a))
    (cost 1))
  (action putdown
    (params ?a - actor ?x - block)
    (actor ?a)
    (pre (holding ?a ?x))
    (add (on-table ?x) (clear ?x) (handempty ?a))
    (del (holding ?a ?x))
    (cost 1))
  (action stack
    (params ?a - actor ?x ?y - block)
    (actor ?a)
    (distinct ?x ?y)
    (pre (holding ?a ?x) (clear ?y))
    (add (on ?x ?y) (clear ?x) (handempty ?a))
    (del (holding ?a ?x) (clear ?y))
    (cost 1))
  (action unstack
    (params ?a - actor ?x ?y - block)
    (actor ?a)
    (distinct ?x ?y)
    (pre (on ?x ?y) (clear ?x) (handempty ?a))
    (add (holding ?a ?x) (clear ?y))
    (del (on ?x ?y) (clear ?x) (handempty ?a))
    (cost 1))
  (action noop
    (params ?a - actor)
    (actor ?a)
    (cost 0))
  ; at most one block directly on top of ?y
  (mutex (on ?x ?y) ?x)
  ; a block rests on at most one other block
  (mutex (on ?x ?y) ?y)
  ; one block per hand
  (mutex (holding ?a ?x) ?x)
  ; a block is held by at most one actor
  (mutex (holding ?a ?x) ?a))
)";

struct BlockWordsSpec {
    std::vector<std::string> stacks;  // each string lists letters bottom-to-top
    std::vector<std::string> words;
    std::vector<std::string> actors{"user", "agent"};
};

// Initial layout and candidate words of the demonstration game.
inline BlockWordsSpec demo_spec() {
    return BlockWordsSpec{{"t", "reh", "l", "s", "m", "o", "f", "w", "b", "a"},
                          {"father", "mother", "master", "faster", "later", "water"},
                          {"user", "agent"}};
}

struct BlockWordsInstance {
    Domain domain;
    ProblemSpec spec;
    Problem problem;
    std::vector<NamedGoal> goals;  // one per word, in word order
};

// Goal for a word read top-to-bottom: {on(w0,w1), ..., on(w[n-2],w[n-1])}.
inline GoalCondition word_goal(std::string_view word) {
    GoalCondition g;
    for (std::size_t i = 0; i + 1 < word.size(); ++i) {
        g.atoms.push_back(Atom{"on", {std::string(1, word[i]), std::string(1, word[i + 1])}});
    }
    return g;
}

inline void validate(const BlockWordsSpec& spec) {
    std::set<char> letters;
    for (const auto& s : spec.stacks) {
        for (char c : s) {
            if (!std::isalpha(static_cast<unsigned char>(c))) {
                throw ModelError(std::string("block letters must be alphabetic, got '") + c + "'");
            }
            if (!letters.insert(c).second) throw ModelError(std::string("duplicate block letter '") + c + "'");
        }
    }
    if (spec.actors.empty()) throw ModelError("at least one actor is required");
    std::set<std::string> seen;
    for (const auto& a : spec.actors) {
        if (a.size() <= 1 || !seen.insert(a).second) throw ModelError("actor names must be unique and longer than one character");
    }
    for (const auto& w : spec.words) {
        if (w.size() < 2) throw ModelError("word '" + w + "' is too short to form a stack");
        std::set<char> used;
        for (char c : w) {
            if (!letters.count(c)) throw ModelError("word '" + w + "' uses missing letter '" + std::string(1, c) + "'");
            if (!used.insert(c).second) throw ModelError("word '" + w + "' repeats letter '" + std::string(1, c) + "'");
        }
    }
}

inline ProblemSpec blockwords_problem_spec(const BlockWordsSpec& spec, std::string name = "blockwords") {
    validate(spec);
    ProblemSpec p;
    p.name = std::move(name);
    p.domain = "blockwords";
    for (const auto& s : spec.stacks) {
        for (char c : s) p.objects.push_back({std::string(1, c), "block"});
    }
    for (const auto& a : spec.actors) p.objects.push_back({a, "actor"});
    p.actors = spec.actors;
    for (const auto& s : spec.stacks) {
        if (s.empty()) continue;
        p.init.push_back(Atom{"on-table", {std::string(1, s.front())}});
        for (std::size_t i = 1; i < s.size(); ++i) {
            p.init.push_back(Atom{"on", {std::string(1, s[i]), std::string(1, s[i - 1])}});
        }
        p.init.push_back(Atom{"clear", {std::string(1, s.back())}});
    }
    for (const auto& a : spec.actors) p.init.push_back(Atom{"handempty", {a}});
    if (spec.actors.size() >= 2) p.init.push_back(Atom{"turn", {spec.actors.front()}});
    for (const auto& w : spec.words) p.hypotheses.push_back({w, word_goal(w)});
    if (!spec.words.empty()) p.goal = word_goal(spec.words.front());
    return p;
}

inline BlockWordsInstance make_blockwords(const BlockWordsSpec& spec, const GroundingOptions& options = {}) {
    BlockWordsInstance out;
    out.domain = parse_domain(kBlockWordsDomain);
    out.spec = blockwords_problem_spec(spec);
    out.problem = ground(out.domain, out.spec, options);
    out.goals = out.spec.hypotheses;
    return out;
}

// Board rendering helpers shared by the session view and the CLI.
struct Board {
    std::vector<std::vector<std::string>> stacks;           // bottom-to-top block names
    std::vector<std::pair<std::string, std::string>> held;  // actor -> block
};

inline Board board_of(const Problem& problem, const State& state) {
    Board b;
    std::vector<std::string> blocks;
    for (const auto& o : problem.objects) {
        if (o.type == "block") blocks.push_back(o.name);
    }
    auto holds = [&](const Atom& a) { return problem.atoms.find(a).has_value() && state.contains(problem.atoms.at(a)); };
    for (const auto& base : blocks) {
        if (!holds(Atom{"on-table", {base}})) continue;
        std::vector<std::string> column{base};
        std::string top = base;
        bool grew = true;
        while (grew) {
            grew = false;
            for (const auto& x : blocks) {
                if (holds(Atom{"on", {x, top}})) {
                    column.push_back(x);
                    top = x;
                    grew = true;
                    break;
                }
            }
        }
        b.stacks.push_back(column);
    }
    for (const auto& actor : problem.actors) {
        for (const auto& x : blocks) {
            if (holds(Atom{"holding", {actor, x}})) b.held.emplace_back(actor, x);
        }
    }
    return b;
}

}  // namespace pretcil::io
