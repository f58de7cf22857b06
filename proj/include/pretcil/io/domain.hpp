#pragma once
//
// The s-expression STRIPS dialect: domain and problem definitions, a
// canonical printer, and grounding into a pretcil::Problem.
//
//   (domain NAME
//     (types T ...)
//     (predicates (P ?x - T ...) ...)
//     (actor-type T)                     ; optional
//     (turn-predicate P)                 ; optional, unary over the actor type
//     (action NAME
//       (params ?a - T ...) (actor ?a) (distinct ?x ?y) ...
//       (pre ATOM ...) (add ATOM ...) (del ATOM ...) (cost NUMBER))
//     (mutex (P ?x ?y) ?x) ...)          ; at most one true as ?x varies
//
//   (problem NAME
//     (domain NAME)
//     (objects o1 o2 - T ...)
//     (actors a1 a2)                     ; turn order
//     (init ATOM ...)
//     (goal ATOM ...)
//     (hypotheses (LABEL ATOM ...) ...)) ; optional named goal candidates
//

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pretcil/core/cost.hpp"
#include "pretcil/core/strips.hpp"
#include "pretcil/io/sexpr.hpp"

namespace pretcil::io {

class SemanticError : public ModelError {
public:
    using ModelError::ModelError;
};

struct TypedParam {
    std::string name;
    std::string type;
    bool operator==(const TypedParam&) const = default;
};

struct PredicateDecl {
    std::string name;
    std::vector<TypedParam> params;
    bool operator==(const PredicateDecl&) const = default;
};

struct ActionSchema {
    std::string name;
    std::vector<TypedParam> params;
    std::string actor;  // parameter name
    std::vector<std::pair<std::string, std::string>> distinct;
    std::vector<Atom> pre;
    std::vector<Atom> add;
    std::vector<Atom> del;
    Cost cost = kCostScale;
    bool operator==(const ActionSchema&) const = default;
};

struct Domain {
    std::string name;
    std::vector<std::string> types;
    std::vector<PredicateDecl> predicates;
    std::optional<std::string> actor_type;
    std::optional<std::string> turn_predicate;
    std::vector<ActionSchema> actions;
    std::vector<MutexGroup> mutexes;
    bool operator==(const Domain&) const = default;

    const PredicateDecl* predicate(std::string_view n) const {
        for (const auto& p : predicates) {
            if (p.name == n) return &p;
        }
        return nullptr;
    }
};

struct NamedGoal {
    std::string label;
    GoalCondition goal;
    bool operator==(const NamedGoal&) const = default;
};

struct ProblemSpec {
    std::string name;
    std::string domain;
    std::vector<ObjectDecl> objects;
    std::vector<std::string> actors;
    std::vector<Atom> init;
    GoalCondition goal;
    std::vector<NamedGoal> hypotheses;
    bool operator==(const ProblemSpec&) const = default;
};

struct GroundingOptions {
    // Emit turn(actor) preconditions and the hand-over to the next actor.
    // Ignored for single-actor problems or domains without a turn predicate.
    bool turn_taking = true;
};

namespace detail {

[[noreturn]] inline void fail_at(const SExpr& where, const std::string& what) {
    throw SyntaxError(what, where.line, where.column);
}

inline const std::string& expect_token(const SExpr& e, std::string_view what) {
    if (!e.is_token()) fail_at(e, "expected " + std::string(what));
    return e.token;
}

inline void expect_list(const SExpr& e, std::string_view what) {
    if (!e.is_list) fail_at(e, "expected " + std::string(what));
}

// "?x - T ?y ?z - U" -> typed list; untyped names default to `fallback`.
inline std::vector<TypedParam> read_typed(const SExpr& list, std::size_t from, const std::string& fallback) {
    std::vector<TypedParam> out;
    std::size_t pending = 0;
    for (std::size_t i = from; i < list.items.size(); ++i) {
        const auto& tok = expect_token(list.items[i], "name or '-'");
        if (tok == "-") {
            if (i + 1 >= list.items.size()) fail_at(list.items[i], "type expected after '-'");
            const auto& type = expect_token(list.items[++i], "type name");
            for (std::size_t k = out.size() - pending; k < out.size(); ++k) out[k].type = type;
            pending = 0;
        } else {
            out.push_back({tok, fallback});
            ++pending;
        }
    }
    return out;
}

inline Atom read_atom(const SExpr& e) {
    expect_list(e, "atom");
    if (e.items.empty()) fail_at(e, "empty atom");
    Atom a;
    a.predicate = expect_token(e.items[0], "predicate name");
    for (std::size_t i = 1; i < e.items.size(); ++i) a.args.push_back(expect_token(e.items[i], "argument"));
    return a;
}

inline std::vector<Atom> read_atoms(const SExpr& list, std::size_t from) {
    std::vector<Atom> out;
    for (std::size_t i = from; i < list.items.size(); ++i) out.push_back(read_atom(list.items[i]));
    return out;
}

inline Cost read_cost(const SExpr& e) {
    const auto& tok = expect_token(e, "cost");
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) fail_at(e, "malformed cost '" + tok + "'");
        return cost_from_units(v);
    } catch (const std::invalid_argument&) {
        fail_at(e, "malformed cost '" + tok + "'");
    } catch (const std::out_of_range&) {
        fail_at(e, "cost out of range '" + tok + "'");
    }
}

inline std::string join_atom(const Atom& a) {
    std::string out = "(" + a.predicate;
    for (const auto& x : a.args) out += " " + x;
    return out + ")";
}

inline std::string join_typed(const std::vector<TypedParam>& params) {
    std::string out;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (i) out += ' ';
        out += params[i].name;
        const bool last_of_type = i + 1 == params.size() || params[i + 1].type != params[i].type;
        if (last_of_type) out += " - " + params[i].type;
    }
    return out;
}

inline void check_schema_atoms(const Domain& d, const ActionSchema& s, const std::vector<Atom>& atoms,
                               std::string_view section) {
    for (const auto& a : atoms) {
        const auto* decl = d.predicate(a.predicate);
        if (!decl) {
            throw SemanticError("action '" + s.name + "' " + std::string(section) + ": undeclared predicate '" +
                                a.predicate + "'");
        }
        if (decl->params.size() != a.args.size()) {
            throw SemanticError("action '" + s.name + "' " + std::string(section) + ": predicate '" + a.predicate +
                                "' expects " + std::to_string(decl->params.size()) + " arguments, got " +
                                std::to_string(a.args.size()));
        }
        for (std::size_t i = 0; i < a.args.size(); ++i) {
            const auto& arg = a.args[i];
            if (arg.empty() || arg[0] != '?') {
                throw SemanticError("action '" + s.name + "': constant '" + arg + "' in schema (use parameters)");
            }
            auto it = std::find_if(s.params.begin(), s.params.end(), [&](const TypedParam& p) { return p.name == arg; });
            if (it == s.params.end()) {
                throw SemanticError("action '" + s.name + "': unknown variable '" + arg + "'");
            }
            if (it->type != decl->params[i].type) {
                throw SemanticError("action '" + s.name + "': variable '" + arg + "' has type '" + it->type +
                                    "' but predicate '" + a.predicate + "' expects '" + decl->params[i].type + "'");
            }
        }
    }
}

}  // namespace detail

inline Domain parse_domain(std::string_view text) {
    using namespace detail;
    const auto top = read_sexprs(text);
    if (top.size() != 1) {
        if (top.empty()) throw SyntaxError("empty domain text", 1, 1);
        fail_at(top[1], "only one domain definition is allowed");
    }
    const auto& root = top.front();
    if (root.head() != "domain" || root.items.size() < 2) fail_at(root, "expected (domain NAME ...)");
    Domain d;
    d.name = expect_token(root.items[1], "domain name");

    for (std::size_t i = 2; i < root.items.size(); ++i) {
        const auto& sec = root.items[i];
        expect_list(sec, "domain section");
        const auto head = sec.head();
        if (head == "types") {
            for (std::size_t k = 1; k < sec.items.size(); ++k) d.types.push_back(expect_token(sec.items[k], "type"));
        } else if (head == "predicates") {
            for (std::size_t k = 1; k < sec.items.size(); ++k) {
                const auto& p = sec.items[k];
                expect_list(p, "predicate declaration");
                if (p.items.empty()) fail_at(p, "empty predicate declaration");
                PredicateDecl decl{expect_token(p.items[0], "predicate name"), read_typed(p, 1, "object")};
                d.predicates.push_back(std::move(decl));
            }
        } else if (head == "actor-type") {
            if (sec.items.size() != 2) fail_at(sec, "expected (actor-type TYPE)");
            d.actor_type = expect_token(sec.items[1], "type");
        } else if (head == "turn-predicate") {
            if (sec.items.size() != 2) fail_at(sec, "expected (turn-predicate NAME)");
            d.turn_predicate = expect_token(sec.items[1], "predicate");
        } else if (head == "action") {
            if (sec.items.size() < 2) fail_at(sec, "expected (action NAME ...)");
            ActionSchema s;
            s.name = expect_token(sec.items[1], "action name");
            for (std::size_t k = 2; k < sec.items.size(); ++k) {
                const auto& part = sec.items[k];
                expect_list(part, "action section");
                const auto ph = part.head();
                if (ph == "params") {
                    s.params = read_typed(part, 1, "object");
                } else if (ph == "actor") {
                    if (part.items.size() != 2) fail_at(part, "expected (actor ?param)");
                    s.actor = expect_token(part.items[1], "parameter");
                } else if (ph == "distinct") {
                    if (part.items.size() != 3) fail_at(part, "expected (distinct ?x ?y)");
                    s.distinct.emplace_back(expect_token(part.items[1], "parameter"),
                                            expect_token(part.items[2], "parameter"));
                } else if (ph == "pre") {
                    s.pre = read_atoms(part, 1);
                } else if (ph == "add") {
                    s.add = read_atoms(part, 1);
                } else if (ph == "del") {
                    s.del = read_atoms(part, 1);
                } else if (ph == "cost") {
                    if (part.items.size() != 2) fail_at(part, "expected (cost NUMBER)");
                    s.cost = read_cost(part.items[1]);
                } else {
                    fail_at(part, "unknown action section '" + std::string(ph) + "'");
                }
            }
            d.actions.push_back(std::move(s));
        } else if (head == "mutex") {
            if (sec.items.size() != 3) fail_at(sec, "expected (mutex (P ?x ...) ?x)");
            MutexGroup m;
            m.pattern = read_atom(sec.items[1]);
            const auto& var = expect_token(sec.items[2], "varying parameter");
            auto it = std::find(m.pattern.args.begin(), m.pattern.args.end(), var);
            if (it == m.pattern.args.end()) fail_at(sec.items[2], "varying parameter '" + var + "' not in pattern");
            m.vary = static_cast<std::size_t>(it - m.pattern.args.begin());
            d.mutexes.push_back(std::move(m));
        } else {
            fail_at(sec, "unknown domain section '" + std::string(head) + "'");
        }
    }

    // Semantic checks.
    auto known_type = [&](const std::string& t) {
        return t == "object" || std::find(d.types.begin(), d.types.end(), t) != d.types.end();
    };
    for (const auto& p : d.predicates) {
        for (const auto& param : p.params) {
            if (!known_type(param.type)) {
                throw SemanticError("predicate '" + p.name + "': undeclared type '" + param.type + "'");
            }
        }
    }
    if (d.actor_type && !known_type(*d.actor_type)) {
        throw SemanticError("undeclared actor type '" + *d.actor_type + "'");
    }
    if (d.turn_predicate) {
        const auto* tp = d.predicate(*d.turn_predicate);
        if (!tp) throw SemanticError("undeclared turn predicate '" + *d.turn_predicate + "'");
        if (tp->params.size() != 1 || !d.actor_type || tp->params[0].type != *d.actor_type) {
            throw SemanticError("turn predicate '" + *d.turn_predicate + "' must be unary over the actor type");
        }
    }
    for (const auto& s : d.actions) {
        for (const auto& param : s.params) {
            if (!known_type(param.type)) {
                throw SemanticError("action '" + s.name + "': undeclared type '" + param.type + "'");
            }
        }
        if (!s.actor.empty()) {
            auto it = std::find_if(s.params.begin(), s.params.end(), [&](const TypedParam& p) { return p.name == s.actor; });
            if (it == s.params.end()) throw SemanticError("action '" + s.name + "': actor '" + s.actor + "' is not a parameter");
            if (d.actor_type && it->type != *d.actor_type) {
                throw SemanticError("action '" + s.name + "': actor parameter must have type '" + *d.actor_type + "'");
            }
        } else if (d.actor_type) {
            throw SemanticError("action '" + s.name + "': missing (actor ?param)");
        }
        for (const auto& [x, y] : s.distinct) {
            for (const auto& v : {x, y}) {
                if (std::none_of(s.params.begin(), s.params.end(), [&](const TypedParam& p) { return p.name == v; })) {
                    throw SemanticError("action '" + s.name + "': unknown variable '" + v + "' in distinct");
                }
            }
        }
        check_schema_atoms(d, s, s.pre, "pre");
        check_schema_atoms(d, s, s.add, "add");
        check_schema_atoms(d, s, s.del, "del");
    }
    for (const auto& m : d.mutexes) {
        const auto* decl = d.predicate(m.pattern.predicate);
        if (!decl) throw SemanticError("mutex: undeclared predicate '" + m.pattern.predicate + "'");
        if (decl->params.size() != m.pattern.args.size()) {
            throw SemanticError("mutex: arity mismatch for predicate '" + m.pattern.predicate + "'");
        }
    }
    return d;
}

inline std::string print_domain(const Domain& d) {
    using detail::join_atom;
    std::string out = "(domain " + d.name + "\n";
    if (!d.types.empty()) {
        out += "  (types";
        for (const auto& t : d.types) out += " " + t;
        out += ")\n";
    }
    out += "  (predicates";
    for (const auto& p : d.predicates) {
        out += "\n    (" + p.name;
        if (!p.params.empty()) out += " " + detail::join_typed(p.params);
        out += ")";
    }
    out += ")\n";
    if (d.actor_type) out += "  (actor-type " + *d.actor_type + ")\n";
    if (d.turn_predicate) out += "  (turn-predicate " + *d.turn_predicate + ")\n";
    for (const auto& s : d.actions) {
        out += "  (action " + s.name + "\n";
        out += "    (params" + (s.params.empty() ? std::string() : " " + detail::join_typed(s.params)) + ")\n";
        if (!s.actor.empty()) out += "    (actor " + s.actor + ")\n";
        for (const auto& [x, y] : s.distinct) out += "    (distinct " + x + " " + y + ")\n";
        auto section = [&](const char* name, const std::vector<Atom>& atoms) {
            if (atoms.empty()) return;
            out += std::string("    (") + name;
            for (const auto& a : atoms) out += " " + join_atom(a);
            out += ")\n";
        };
        section("pre", s.pre);
        section("add", s.add);
        section("del", s.del);
        out += "    (cost " + format_cost(s.cost) + "))\n";
    }
    for (const auto& m : d.mutexes) {
        out += "  (mutex " + join_atom(m.pattern) + " " + m.pattern.args[m.vary] + ")\n";
    }
    out += ")\n";
    return out;
}

inline ProblemSpec parse_problem(std::string_view text) {
    using namespace detail;
    const auto top = read_sexprs(text);
    if (top.size() != 1) {
        if (top.empty()) throw SyntaxError("empty problem text", 1, 1);
        fail_at(top[1], "only one problem definition is allowed");
    }
    const auto& root = top.front();
    if (root.head() != "problem" || root.items.size() < 2) fail_at(root, "expected (problem NAME ...)");
    ProblemSpec p;
    p.name = expect_token(root.items[1], "problem name");
    for (std::size_t i = 2; i < root.items.size(); ++i) {
        const auto& sec = root.items[i];
        expect_list(sec, "problem section");
        const auto head = sec.head();
        if (head == "domain") {
            if (sec.items.size() != 2) fail_at(sec, "expected (domain NAME)");
            p.domain = expect_token(sec.items[1], "domain name");
        } else if (head == "objects") {
            for (auto& tp : read_typed(sec, 1, "object")) p.objects.push_back({tp.name, tp.type});
        } else if (head == "actors") {
            for (std::size_t k = 1; k < sec.items.size(); ++k) p.actors.push_back(expect_token(sec.items[k], "actor"));
        } else if (head == "init") {
            p.init = read_atoms(sec, 1);
        } else if (head == "goal") {
            p.goal.atoms = read_atoms(sec, 1);
        } else if (head == "hypotheses") {
            for (std::size_t k = 1; k < sec.items.size(); ++k) {
                const auto& h = sec.items[k];
                expect_list(h, "(LABEL ATOM ...)");
                if (h.items.empty()) fail_at(h, "empty hypothesis");
                p.hypotheses.push_back({expect_token(h.items[0], "label"), GoalCondition{read_atoms(h, 1)}});
            }
        } else {
            fail_at(sec, "unknown problem section '" + std::string(head) + "'");
        }
    }
    return p;
}

inline std::string print_problem(const ProblemSpec& p) {
    using detail::join_atom;
    std::string out = "(problem " + p.name + "\n";
    out += "  (domain " + p.domain + ")\n";
    out += "  (objects";
    for (std::size_t i = 0; i < p.objects.size(); ++i) {
        out += " " + p.objects[i].name;
        if (i + 1 == p.objects.size() || p.objects[i + 1].type != p.objects[i].type) out += " - " + p.objects[i].type;
    }
    out += ")\n";
    if (!p.actors.empty()) {
        out += "  (actors";
        for (const auto& a : p.actors) out += " " + a;
        out += ")\n";
    }
    out += "  (init";
    for (const auto& a : p.init) out += "\n    " + join_atom(a);
    out += ")\n";
    out += "  (goal";
    for (const auto& a : p.goal.atoms) out += " " + join_atom(a);
    out += ")";
    if (!p.hypotheses.empty()) {
        out += "\n  (hypotheses";
        for (const auto& h : p.hypotheses) {
            out += "\n    (" + h.label;
            for (const auto& a : h.goal.atoms) out += " " + join_atom(a);
            out += ")";
        }
        out += ")";
    }
    out += ")\n";
    return out;
}

namespace detail {

struct ObjectIndex {
    std::map<std::string, std::string> type_of;
    std::map<std::string, std::vector<std::string>> by_type;

    const std::vector<std::string>& of_type(const std::string& t) const {
        static const std::vector<std::string> none;
        if (t == "object") {
            static thread_local std::vector<std::string> all;
            all.clear();
            for (const auto& [name, _] : type_of) all.push_back(name);
            return all;
        }
        auto it = by_type.find(t);
        return it == by_type.end() ? none : it->second;
    }
};

inline void check_ground_atom(const Domain& d, const ObjectIndex& objs, const Atom& a, std::string_view where) {
    const auto* decl = d.predicate(a.predicate);
    if (!decl) throw SemanticError(std::string(where) + ": undeclared predicate '" + a.predicate + "'");
    if (decl->params.size() != a.args.size()) {
        throw SemanticError(std::string(where) + ": " + a.str() + " has wrong arity (expected " +
                            std::to_string(decl->params.size()) + ")");
    }
    for (std::size_t i = 0; i < a.args.size(); ++i) {
        auto it = objs.type_of.find(a.args[i]);
        if (it == objs.type_of.end()) {
            throw SemanticError(std::string(where) + ": undeclared object '" + a.args[i] + "' in " + a.str());
        }
        if (decl->params[i].type != "object" && it->second != decl->params[i].type) {
            throw SemanticError(std::string(where) + ": object '" + a.args[i] + "' has type '" + it->second +
                                "', expected '" + decl->params[i].type + "'");
        }
    }
}

template <class F>
void for_each_binding(const std::vector<TypedParam>& params, const ObjectIndex& objs, F&& f) {
    std::map<std::string, std::string> binding;
    std::vector<std::vector<std::string>> domains;
    for (const auto& p : params) domains.push_back(objs.of_type(p.type));
    std::vector<std::size_t> idx(params.size(), 0);
    for (const auto& dom : domains) {
        if (dom.empty()) return;
    }
    for (;;) {
        for (std::size_t i = 0; i < params.size(); ++i) binding[params[i].name] = domains[i][idx[i]];
        f(binding);
        std::size_t k = params.size();
        while (k > 0) {
            --k;
            if (++idx[k] < domains[k].size()) break;
            idx[k] = 0;
            if (k == 0) return;
        }
        if (params.empty()) return;
    }
}

inline Atom substitute(const Atom& a, const std::map<std::string, std::string>& binding) {
    Atom out{a.predicate, {}};
    for (const auto& x : a.args) {
        auto it = binding.find(x);
        out.args.push_back(it == binding.end() ? x : it->second);
    }
    return out;
}

inline std::vector<AtomId> intern_sorted(AtomTable& table, const std::vector<Atom>& atoms) {
    std::vector<AtomId> ids;
    for (const auto& a : atoms) ids.push_back(table.intern(a));
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

}  // namespace detail

// Grounds every schema over the declared objects. Ground actions are ordered
// by their printed name; atom ids cover every type-correct predicate instance.
inline Problem ground(const Domain& d, const ProblemSpec& spec, const GroundingOptions& options = {}) {
    using namespace detail;
    ObjectIndex objs;
    for (const auto& o : spec.objects) {
        if (o.type != "object" && std::find(d.types.begin(), d.types.end(), o.type) == d.types.end()) {
            throw SemanticError("object '" + o.name + "' has undeclared type '" + o.type + "'");
        }
        if (!objs.type_of.emplace(o.name, o.type).second) {
            throw SemanticError("object '" + o.name + "' declared twice");
        }
        objs.by_type[o.type].push_back(o.name);
    }
    for (const auto& a : spec.actors) {
        auto it = objs.type_of.find(a);
        if (it == objs.type_of.end()) throw SemanticError("actor '" + a + "' is not a declared object");
        if (d.actor_type && it->second != *d.actor_type) {
            throw SemanticError("actor '" + a + "' must have type '" + *d.actor_type + "'");
        }
    }
    if (d.actor_type && spec.actors.empty()) throw SemanticError("problem declares no actors");

    Problem p;
    p.name = spec.name;
    p.objects = spec.objects;
    p.actors = spec.actors;
    p.mutex_templates = d.mutexes;

    const bool turns = options.turn_taking && d.turn_predicate && spec.actors.size() >= 2;
    if (turns) p.turn_predicate = d.turn_predicate;

    for (const auto& pred : d.predicates) {
        if (!turns && d.turn_predicate && pred.name == *d.turn_predicate) continue;
        for_each_binding(pred.params, objs, [&](const auto& binding) {
            Atom a{pred.name, {}};
            for (const auto& prm : pred.params) a.args.push_back(binding.at(prm.name));
            p.atoms.intern(a);
        });
    }

    auto next_actor = [&](const std::string& actor) {
        auto it = std::find(spec.actors.begin(), spec.actors.end(), actor);
        if (it == spec.actors.end()) return std::optional<std::string>{};
        ++it;
        return std::optional<std::string>{it == spec.actors.end() ? spec.actors.front() : *it};
    };

    for (const auto& s : d.actions) {
        for_each_binding(s.params, objs, [&](const auto& binding) {
            for (const auto& [x, y] : s.distinct) {
                if (binding.at(x) == binding.at(y)) return;
            }
            GroundAction g;
            g.name = s.name;
            for (std::size_t i = 0; i < s.params.size(); ++i) {
                g.params.push_back(binding.at(s.params[i].name));
                if (s.params[i].name == s.actor) g.actor_param = i;
            }
            if (!s.actor.empty() && !spec.actors.empty() &&
                std::find(spec.actors.begin(), spec.actors.end(), binding.at(s.actor)) == spec.actors.end()) {
                return;
            }
            auto keep = [&](const Atom& a) { return turns || !d.turn_predicate || a.predicate != *d.turn_predicate; };
            std::vector<Atom> pre, add, del;
            for (const auto& a : s.pre) if (keep(a)) pre.push_back(substitute(a, binding));
            for (const auto& a : s.add) if (keep(a)) add.push_back(substitute(a, binding));
            for (const auto& a : s.del) if (keep(a)) del.push_back(substitute(a, binding));
            g.passive = add.empty() && del.empty();
            if (turns && !s.actor.empty()) {
                const auto& who = binding.at(s.actor);
                Atom mine{*d.turn_predicate, {who}};
                Atom theirs{*d.turn_predicate, {*next_actor(who)}};
                pre.push_back(mine);
                del.push_back(mine);
                add.push_back(theirs);
            }
            g.pre = intern_sorted(p.atoms, pre);
            g.add = intern_sorted(p.atoms, add);
            g.del = intern_sorted(p.atoms, del);
            // A fact both deleted and added stays true.
            std::vector<AtomId> del_only;
            std::set_difference(g.del.begin(), g.del.end(), g.add.begin(), g.add.end(), std::back_inserter(del_only));
            g.del = std::move(del_only);
            g.cost = s.cost;
            p.actions.push_back(std::move(g));
        });
    }
    std::stable_sort(p.actions.begin(), p.actions.end(),
                     [](const GroundAction& a, const GroundAction& b) { return a.str() < b.str(); });

    // Ground mutex groups.
    for (const auto& m : d.mutexes) {
        const auto* decl = d.predicate(m.pattern.predicate);
        std::vector<TypedParam> fixed;
        for (std::size_t i = 0; i < m.pattern.args.size(); ++i) {
            if (i != m.vary) fixed.push_back({m.pattern.args[i], decl->params[i].type});
        }
        for_each_binding(fixed, objs, [&](const auto& binding) {
            std::vector<AtomId> group;
            for (const auto& o : objs.of_type(decl->params[m.vary].type)) {
                Atom a = substitute(m.pattern, binding);
                a.args[m.vary] = o;
                if (auto id = p.atoms.find(a)) group.push_back(*id);
            }
            if (group.size() >= 2) p.mutex_groups.push_back(std::move(group));
        });
    }

    p.init = State(p.atoms.size());
    for (const auto& a : spec.init) {
        check_ground_atom(d, objs, a, "init");
        if (!turns && d.turn_predicate && a.predicate == *d.turn_predicate) continue;
        p.init.insert(p.atoms.at(a));
    }
    if (turns) {
        bool any = false;
        for (const auto& a : spec.actors) any = any || p.init.contains(p.atoms.at(Atom{*d.turn_predicate, {a}}));
        if (!any) p.init.insert(p.atoms.at(Atom{*d.turn_predicate, {spec.actors.front()}}));
    }
    for (const auto& a : spec.goal.atoms) check_ground_atom(d, objs, a, "goal");
    for (const auto& h : spec.hypotheses) {
        for (const auto& a : h.goal.atoms) check_ground_atom(d, objs, a, "hypothesis " + h.label);
    }
    p.goal = spec.goal;
    if (auto bad = violated_groups(p, p.init); !bad.empty()) {
        std::string msg = "initial state violates mutex group {";
        const auto& g = p.mutex_groups[bad.front()];
        for (std::size_t i = 0; i < g.size(); ++i) msg += (i ? ", " : "") + p.atoms.atom(g[i]).str();
        throw SemanticError(msg + "}");
    }
    return p;
}

}  // namespace pretcil::io
