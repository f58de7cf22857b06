#pragma once
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pretcil/core/strips.hpp"
#include "pretcil/io/blockwords.hpp"

namespace fixtures {

using namespace pretcil;

inline io::BlockWordsSpec solo_spec() {
    auto s = io::demo_spec();
    s.actors = {"user"};
    return s;
}

inline const io::BlockWordsInstance& solo() {
    static const auto inst = io::make_blockwords(solo_spec());
    return inst;
}

// User and agent taking turns, as in the game.
inline const io::BlockWordsInstance& duo() {
    static const auto inst = io::make_blockwords(io::demo_spec());
    return inst;
}

// Same two hands, no turn atoms.
inline const io::BlockWordsInstance& duo_free() {
    static const auto inst = io::make_blockwords(io::demo_spec(), {.turn_taking = false});
    return inst;
}

inline const GoalCondition& goal_of(const io::BlockWordsInstance& inst, const std::string& word) {
    for (const auto& g : inst.goals) {
        if (g.label == word) return g.goal;
    }
    throw std::out_of_range(word);
}

inline Atom atom(const std::string& text) { return parse_atom(text); }

inline GoalCondition goal(std::initializer_list<const char*> atoms) {
    GoalCondition g;
    for (auto a : atoms) g.atoms.push_back(parse_atom(a));
    return g;
}

inline bool holds(const Problem& p, const State& s, const std::string& a) {
    return s.contains(p.atoms.at(parse_atom(a)));
}

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline const std::vector<std::string>& words() {
    static const std::vector<std::string> w{"father", "mother", "master", "faster", "later", "water"};
    return w;
}

}  // namespace fixtures
