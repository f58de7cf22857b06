#pragma once
//
// Propositional STRIPS model: interned ground atoms, bitset states, ground
// actions, conjunctive goals and declared at-most-one (mutex) groups.
//

#include <algorithm>
#include <bit>
#include <cctype>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pretcil/core/cost.hpp"

namespace pretcil {

class ModelError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Atom {
    std::string predicate;
    std::vector<std::string> args;

    auto operator<=>(const Atom&) const = default;
    bool operator==(const Atom&) const = default;

    // "on(h,e)"; zero-arity atoms render as "handempty()".
    std::string str() const {
        std::string out = predicate + "(";
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (i) out += ',';
            out += args[i];
        }
        return out + ")";
    }
};

// Accepts "on(h,e)", "on(h, e)" and bare "handempty".
inline Atom parse_atom(std::string_view text) {
    auto trim = [](std::string_view s) {
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
        while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
        return s;
    };
    text = trim(text);
    Atom atom;
    const auto open = text.find('(');
    if (open == std::string_view::npos) {
        if (text.empty()) throw ModelError("empty atom");
        atom.predicate = std::string(text);
        return atom;
    }
    if (text.back() != ')') throw ModelError("malformed atom '" + std::string(text) + "'");
    atom.predicate = std::string(trim(text.substr(0, open)));
    std::string_view inner = text.substr(open + 1, text.size() - open - 2);
    while (!trim(inner).empty()) {
        const auto comma = inner.find(',');
        std::string_view arg = trim(inner.substr(0, comma));
        if (arg.empty()) throw ModelError("malformed atom '" + std::string(text) + "'");
        atom.args.emplace_back(arg);
        if (comma == std::string_view::npos) break;
        inner.remove_prefix(comma + 1);
    }
    if (atom.predicate.empty()) throw ModelError("malformed atom '" + std::string(text) + "'");
    return atom;
}

using AtomId = std::uint32_t;

class AtomTable {
public:
    AtomId intern(const Atom& atom) {
        auto key = atom.str();
        if (auto it = index_.find(key); it != index_.end()) return it->second;
        const auto id = static_cast<AtomId>(atoms_.size());
        atoms_.push_back(atom);
        index_.emplace(std::move(key), id);
        return id;
    }

    std::optional<AtomId> find(const Atom& atom) const {
        if (auto it = index_.find(atom.str()); it != index_.end()) return it->second;
        return std::nullopt;
    }

    AtomId at(const Atom& atom) const {
        if (auto id = find(atom)) return *id;
        throw ModelError("unknown atom " + atom.str());
    }

    const Atom& atom(AtomId id) const { return atoms_.at(id); }
    std::size_t size() const { return atoms_.size(); }

private:
    std::vector<Atom> atoms_;
    std::unordered_map<std::string, AtomId> index_;
};

// Set of true atoms, stored as a bitset over the owning problem's atom table.
// Bits past the stored width read as false, so states stay valid when a
// derived problem appends atoms.
class State {
public:
    State() = default;
    explicit State(std::size_t atom_count) : words_((atom_count + 63) / 64, 0) {}

    bool contains(AtomId id) const {
        const std::size_t w = id / 64;
        return w < words_.size() && ((words_[w] >> (id % 64)) & 1u);
    }
    void insert(AtomId id) {
        const std::size_t w = id / 64;
        if (w >= words_.size()) words_.resize(w + 1, 0);
        words_[w] |= (std::uint64_t{1} << (id % 64));
    }
    void erase(AtomId id) {
        const std::size_t w = id / 64;
        if (w < words_.size()) words_[w] &= ~(std::uint64_t{1} << (id % 64));
    }

    bool contains_all(std::span<const AtomId> ids) const {
        return std::all_of(ids.begin(), ids.end(), [&](AtomId a) { return contains(a); });
    }

    std::vector<AtomId> atoms() const {
        std::vector<AtomId> out;
        for (std::size_t w = 0; w < words_.size(); ++w) {
            std::uint64_t bits = words_[w];
            while (bits) {
                const int b = std::countr_zero(bits);
                out.push_back(static_cast<AtomId>(w * 64 + b));
                bits &= bits - 1;
            }
        }
        return out;
    }

    std::size_t count() const {
        std::size_t n = 0;
        for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
        return n;
    }

    bool operator==(const State& other) const {
        const std::size_t n = std::max(words_.size(), other.words_.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (word(i) != other.word(i)) return false;
        }
        return true;
    }

    std::size_t hash() const {
        std::uint64_t h = 1469598103934665603ull;
        std::size_t last = words_.size();
        while (last > 0 && words_[last - 1] == 0) --last;
        for (std::size_t i = 0; i < last; ++i) {
            h ^= words_[i];
            h *= 1099511628211ull;
            h ^= h >> 29;
        }
        return static_cast<std::size_t>(h);
    }

private:
    std::uint64_t word(std::size_t i) const { return i < words_.size() ? words_[i] : 0; }
    std::vector<std::uint64_t> words_;
};

struct StateHash {
    std::size_t operator()(const State& s) const { return s.hash(); }
};

struct GroundAction {
    std::string name;                 // schema name
    std::vector<std::string> params;  // all arguments in schema order, actor included
    std::size_t actor_param = 0;      // index of the actor inside params
    std::vector<AtomId> pre;
    std::vector<AtomId> add;
    std::vector<AtomId> del;
    Cost cost = kCostScale;
    bool passive = false;  // no world effects (turn bookkeeping aside)

    const std::string& actor() const {
        static const std::string none;
        return params.empty() ? none : params[actor_param];
    }

    // "stack(user,t,h)"
    std::string str() const {
        std::string out = name + "(";
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (i) out += ',';
            out += params[i];
        }
        return out + ")";
    }

    // Actor-erased form used to match observations: "stack(t,h)".
    std::string signature() const {
        std::string out = name + "(";
        bool first = true;
        for (std::size_t i = 0; i < params.size(); ++i) {
            if (i == actor_param) continue;
            if (!first) out += ',';
            out += params[i];
            first = false;
        }
        return out + ")";
    }

    bool same_as(const GroundAction& other) const {
        return name == other.name && params == other.params;
    }
};

struct GoalCondition {
    std::vector<Atom> atoms;

    bool empty() const { return atoms.empty(); }
    bool operator==(const GoalCondition&) const = default;

    std::string str() const {
        std::string out = "{";
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            if (i) out += ", ";
            out += atoms[i].str();
        }
        return out + "}";
    }
};

// At-most-one template: all instantiations of `pattern` that differ only in
// the argument at position `vary` form one group. Arguments starting with '?'
// are variables ranging over objects of the predicate's parameter type.
struct MutexGroup {
    Atom pattern;
    std::size_t vary = 0;
    bool operator==(const MutexGroup&) const = default;
};

struct ObjectDecl {
    std::string name;
    std::string type;
    bool operator==(const ObjectDecl&) const = default;
};

struct Problem {
    std::string name;
    AtomTable atoms;
    std::vector<ObjectDecl> objects;
    std::vector<std::string> actors;
    std::vector<GroundAction> actions;
    State init;
    GoalCondition goal;
    std::vector<MutexGroup> mutex_templates;
    std::vector<std::vector<AtomId>> mutex_groups;  // ground, each of size >= 2
    // Exactly-one marker groups whose values advance monotonically (observation
    // progress in compiled recognition problems). Used for reachability pruning.
    std::vector<std::vector<AtomId>> phase_groups;
    std::optional<std::string> turn_predicate;

    std::optional<std::size_t> find_action(std::string_view text) const {
        for (std::size_t i = 0; i < actions.size(); ++i) {
            if (actions[i].str() == text) return i;
        }
        return std::nullopt;
    }

    std::size_t action_index(std::string_view text) const {
        if (auto i = find_action(text)) return *i;
        throw ModelError("unknown action " + std::string(text));
    }

    const GroundAction& action(std::size_t index) const {
        if (index >= actions.size()) {
            throw ModelError("action index " + std::to_string(index) + " is not part of problem '" + name + "'");
        }
        return actions[index];
    }

    std::vector<AtomId> resolve(const GoalCondition& goal_condition) const {
        std::vector<AtomId> ids;
        ids.reserve(goal_condition.atoms.size());
        for (const auto& a : goal_condition.atoms) ids.push_back(atoms.at(a));
        return ids;
    }

    State make_state(std::span<const Atom> true_atoms) const {
        State s(atoms.size());
        for (const auto& a : true_atoms) s.insert(atoms.at(a));
        return s;
    }

    std::vector<Atom> atoms_of(const State& state) const {
        std::vector<Atom> out;
        for (auto id : state.atoms()) {
            if (id < atoms.size()) out.push_back(atoms.atom(id));
        }
        std::sort(out.begin(), out.end());
        return out;
    }
};

class PreconditionViolation : public ModelError {
public:
    PreconditionViolation(const std::string& action, std::vector<Atom> missing)
        : ModelError(describe(action, missing)), missing_(std::move(missing)) {}

    const std::vector<Atom>& missing() const { return missing_; }

    static std::string describe(const std::string& action, const std::vector<Atom>& missing) {
        std::string msg = "action " + action + " is not applicable; missing ";
        for (std::size_t i = 0; i < missing.size(); ++i) {
            if (i) msg += ", ";
            msg += missing[i].str();
        }
        return msg;
    }

private:
    std::vector<Atom> missing_;
};

inline bool applicable(const Problem& problem, const State& state, std::size_t action) {
    return state.contains_all(problem.action(action).pre);
}

inline std::vector<Atom> missing_preconditions(const Problem& problem, const State& state, std::size_t action) {
    std::vector<Atom> missing;
    for (auto p : problem.action(action).pre) {
        if (!state.contains(p)) missing.push_back(problem.atoms.atom(p));
    }
    return missing;
}

// Unchecked successor: (state \ del) U add.
inline State successor(const GroundAction& a, const State& state) {
    State next = state;
    for (auto d : a.del) next.erase(d);
    for (auto p : a.add) next.insert(p);
    return next;
}

inline State apply(const Problem& problem, const State& state, std::size_t action) {
    const auto& a = problem.action(action);
    if (!state.contains_all(a.pre)) {
        throw PreconditionViolation(a.str(), missing_preconditions(problem, state, action));
    }
    return successor(a, state);
}

inline bool satisfies(const Problem& problem, const State& state, const GoalCondition& goal) {
    for (const auto& atom : goal.atoms) {
        auto id = problem.atoms.find(atom);
        if (!id || !state.contains(*id)) return false;
    }
    return true;
}

using AtomPair = std::pair<Atom, Atom>;

// Pairs of goal atoms that share one ground mutex group. Pairs keep goal order.
inline std::vector<AtomPair> goal_conflicts(const GoalCondition& goal,
                                            std::span<const std::vector<AtomId>> groups,
                                            const AtomTable& table) {
    std::vector<std::optional<AtomId>> ids;
    for (const auto& a : goal.atoms) ids.push_back(table.find(a));
    std::vector<AtomPair> out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t j = i + 1; j < ids.size(); ++j) {
            if (!ids[i] || !ids[j] || *ids[i] == *ids[j]) continue;
            for (const auto& g : groups) {
                const bool has_i = std::find(g.begin(), g.end(), *ids[i]) != g.end();
                if (has_i && std::find(g.begin(), g.end(), *ids[j]) != g.end()) {
                    out.emplace_back(goal.atoms[i], goal.atoms[j]);
                    break;
                }
            }
        }
    }
    return out;
}

inline std::vector<AtomPair> goal_conflicts(const Problem& problem, const GoalCondition& goal) {
    return goal_conflicts(goal, problem.mutex_groups, problem.atoms);
}

// Groups in which more than one atom holds.
inline std::vector<std::size_t> violated_groups(const Problem& problem, const State& state) {
    std::vector<std::size_t> out;
    for (std::size_t g = 0; g < problem.mutex_groups.size(); ++g) {
        int n = 0;
        for (auto id : problem.mutex_groups[g]) n += state.contains(id) ? 1 : 0;
        if (n > 1) out.push_back(g);
    }
    return out;
}

// Canonical text of a state (sorted atom names), used for digests and logs.
inline std::string state_text(const Problem& problem, const State& state) {
    std::string out;
    for (const auto& a : problem.atoms_of(state)) {
        if (!out.empty()) out += ' ';
        out += a.str();
    }
    return out;
}

inline std::string state_digest(const Problem& problem, const State& state) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : state_text(problem, state)) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

}  // namespace pretcil
