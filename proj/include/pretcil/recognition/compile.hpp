#pragma once
//
// Observation compilations for recognition as planning.
//
// Progress through the observation sequence O = o1..on is tracked by marker
// atoms complied(0..n), exactly one of which holds. Every action whose
// actor-erased signature equals some observation is split per progress value
// k: at k it either advances to k+1 (when it matches o(k+1)) or keeps k. The
// matching is greedy, which accepts exactly the plans that embed O as a
// subsequence. Actions matching no observation are left untouched.
//

#include <algorithm>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "pretcil/core/strips.hpp"

namespace pretcil::recognition {

inline Atom complied_atom(std::size_t k) { return Atom{"complied", {std::to_string(k)}}; }
inline Atom uncomplied_atom() { return Atom{"uncomplied", {}}; }

namespace detail {

enum class Compilation { Comply, Avoid };

inline Problem compile(const Problem& base, const GoalCondition& goal, std::span<const std::size_t> observations,
                       Compilation mode) {
    const std::size_t n = observations.size();
    Problem out;
    out.name = base.name + (mode == Compilation::Comply ? "+comply" : "+avoid");
    out.atoms = base.atoms;
    out.objects = base.objects;
    out.actors = base.actors;
    out.mutex_templates = base.mutex_templates;
    out.mutex_groups = base.mutex_groups;
    out.phase_groups = base.phase_groups;
    out.turn_predicate = base.turn_predicate;
    out.goal = goal;

    std::vector<std::string> sigs;
    std::unordered_set<std::string> observed;
    for (auto o : observations) {
        sigs.push_back(base.action(o).signature());
        observed.insert(sigs.back());
    }

    std::vector<AtomId> phase;
    for (std::size_t k = 0; k <= n; ++k) phase.push_back(out.atoms.intern(complied_atom(k)));
    const AtomId pending = out.atoms.intern(uncomplied_atom());

    out.init = base.init;
    out.init.insert(phase[0]);
    if (mode == Compilation::Avoid && n > 0) out.init.insert(pending);
    out.phase_groups.push_back(phase);
    if (phase.size() >= 2) out.mutex_groups.push_back(phase);

    auto sorted_insert = [](std::vector<AtomId>& v, AtomId a) {
        v.insert(std::upper_bound(v.begin(), v.end(), a), a);
    };

    for (const auto& a : base.actions) {
        if (!observed.count(a.signature())) {
            out.actions.push_back(a);
            continue;
        }
        const auto sig = a.signature();
        for (std::size_t k = 0; k <= n; ++k) {
            GroundAction v = a;
            sorted_insert(v.pre, phase[k]);
            if (k < n && sigs[k] == sig) {
                sorted_insert(v.del, phase[k]);
                sorted_insert(v.add, phase[k + 1]);
                if (mode == Compilation::Avoid && k + 1 == n) sorted_insert(v.del, pending);
            }
            out.actions.push_back(std::move(v));
        }
    }

    if (mode == Compilation::Comply) {
        out.goal.atoms.push_back(complied_atom(n));
    } else {
        // With O empty the marker is never true: avoiding an empty sequence is impossible.
        out.goal.atoms.push_back(uncomplied_atom());
    }
    return out;
}

}  // namespace detail

// Plans for the result embed the observations in order; its optimal cost is
// the cheapest goal-achieving plan that complies with O.
inline Problem compile_comply(const Problem& base, const GoalCondition& goal, std::span<const std::size_t> observations) {
    if (observations.empty()) {
        Problem out = base;
        out.goal = goal;
        return out;
    }
    return detail::compile(base, goal, observations, detail::Compilation::Comply);
}

// Plans for the result never complete the observation sequence.
inline Problem compile_avoid(const Problem& base, const GoalCondition& goal, std::span<const std::size_t> observations) {
    return detail::compile(base, goal, observations, detail::Compilation::Avoid);
}

}  // namespace pretcil::recognition
