#pragma once
// Independent Block Words reference: its own state encoding and move
// generator, no use of the planner or the STRIPS core. Tests compare the
// engine against it.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace oracle {

inline constexpr int kTable = -1;

// pos[b]: kTable, another block index, or -(2 + h) when held by hand h.
struct World {
    std::vector<int> pos;
    bool operator==(const World&) const = default;
};

struct WorldHash {
    std::size_t operator()(const World& w) const {
        std::size_t h = 1469598103934665603ull;
        for (int p : w.pos) h = (h ^ static_cast<std::size_t>(p + 7)) * 1099511628211ull;
        return h;
    }
};

inline int held_code(int hand) { return -(2 + hand); }

struct Move {
    std::string name;  // pickup | putdown | stack | unstack
    int hand = 0;
    int block = 0;
    int target = -1;  // stack/unstack partner
};

struct Instance {
    std::vector<std::string> blocks;  // names, index = block id
    std::vector<std::string> hands;   // actor names
    World init;
    std::vector<std::pair<int, int>> goal;  // on(x, y)

    int id(const std::string& name) const {
        return static_cast<int>(std::find(blocks.begin(), blocks.end(), name) - blocks.begin());
    }

    // Bottom-to-top stacks of single-letter block names.
    static Instance from_stacks(const std::vector<std::string>& stacks, std::vector<std::string> hands) {
        Instance in;
        in.hands = std::move(hands);
        for (const auto& s : stacks) {
            for (char c : s) in.blocks.push_back(std::string(1, c));
        }
        in.init.pos.assign(in.blocks.size(), kTable);
        for (const auto& s : stacks) {
            for (std::size_t i = 1; i < s.size(); ++i) {
                in.init.pos[in.id(std::string(1, s[i]))] = in.id(std::string(1, s[i - 1]));
            }
        }
        return in;
    }

    void set_word(const std::string& word) {
        goal.clear();
        for (std::size_t i = 0; i + 1 < word.size(); ++i) {
            goal.emplace_back(id(std::string(1, word[i])), id(std::string(1, word[i + 1])));
        }
    }

    std::string str(const Move& m) const {
        std::string out = m.name + "(" + hands[m.hand] + "," + blocks[m.block];
        if (m.target >= 0) out += "," + blocks[m.target];
        return out + ")";
    }

    // Same move with the actor left out, for actor-agnostic matching.
    std::string signature(const Move& m) const {
        std::string out = m.name + "(" + blocks[m.block];
        if (m.target >= 0) out += "," + blocks[m.target];
        return out + ")";
    }
};

inline bool clear(const World& w, int b) {
    if (w.pos[b] < kTable) return false;  // held
    for (int p : w.pos) {
        if (p == b) return false;
    }
    return true;
}

inline int holding(const World& w, int hand) {
    for (std::size_t b = 0; b < w.pos.size(); ++b) {
        if (w.pos[b] == held_code(hand)) return static_cast<int>(b);
    }
    return -1;
}

inline std::vector<std::pair<Move, World>> successors(const Instance& in, const World& w) {
    std::vector<std::pair<Move, World>> out;
    const int n = static_cast<int>(w.pos.size());
    for (int h = 0; h < static_cast<int>(in.hands.size()); ++h) {
        const int held = holding(w, h);
        if (held < 0) {
            for (int b = 0; b < n; ++b) {
                if (!clear(w, b)) continue;
                World next = w;
                next.pos[b] = held_code(h);
                if (w.pos[b] == kTable) out.push_back({{"pickup", h, b, -1}, next});
                else out.push_back({{"unstack", h, b, w.pos[b]}, next});
            }
        } else {
            World down = w;
            down.pos[held] = kTable;
            out.push_back({{"putdown", h, held, -1}, down});
            for (int c = 0; c < n; ++c) {
                if (c == held || !clear(w, c)) continue;
                World next = w;
                next.pos[held] = c;
                out.push_back({{"stack", h, held, c}, next});
            }
        }
    }
    return out;
}

inline bool satisfied(const Instance& in, const World& w) {
    for (auto [x, y] : in.goal) {
        if (w.pos[x] != y) return false;
    }
    return true;
}

// Admissible bound: each unsatisfied on(x,y) needs its own stack, plus a
// pickup unless x is already in hand.
inline int lower_bound(const Instance& in, const World& w) {
    int lb = 0;
    for (auto [x, y] : in.goal) {
        if (w.pos[x] == y) continue;
        lb += w.pos[x] < kTable ? 1 : 2;
    }
    return lb;
}

// Breadth-first search (unit costs); nullopt when unreachable, throws past `limit` states.
inline std::optional<int> bfs_cost(const Instance& in, const World& start, std::size_t limit = 5'000'000) {
    if (satisfied(in, start)) return 0;
    std::unordered_map<World, int, WorldHash> dist{{start, 0}};
    std::deque<World> queue{start};
    while (!queue.empty()) {
        World w = queue.front();
        queue.pop_front();
        const int d = dist[w];
        for (auto& [m, next] : successors(in, w)) {
            if (dist.count(next)) continue;
            if (satisfied(in, next)) return d + 1;
            dist.emplace(next, d + 1);
            if (dist.size() > limit) throw std::runtime_error("oracle search limit reached");
            queue.push_back(next);
        }
    }
    return std::nullopt;
}

// Iterative deepening with the bound above; exact for unit costs.
inline std::optional<int> ida_cost(const Instance& in, const World& start, int max_cost = 40) {
    std::vector<World> path{start};
    std::function<bool(const World&, int, int)> dfs = [&](const World& w, int g, int bound) {
        if (g + lower_bound(in, w) > bound) return false;
        if (satisfied(in, w)) return true;
        for (auto& [m, next] : successors(in, w)) {
            if (std::find(path.begin(), path.end(), next) != path.end()) continue;
            path.push_back(next);
            const bool found = dfs(next, g + 1, bound);
            path.pop_back();
            if (found) return true;
        }
        return false;
    };
    for (int bound = lower_bound(in, start); bound <= max_cost; ++bound) {
        if (dfs(start, 0, bound)) return bound;
    }
    return std::nullopt;
}

// Exact distance to the goal for every state of the instance. Block Words
// moves are reversible, so one backward BFS from all goal states suffices.
inline std::unordered_map<World, int, WorldHash> goal_distances(const Instance& in) {
    std::unordered_map<World, int, WorldHash> all;
    {
        std::deque<World> queue{in.init};
        std::unordered_set<World, WorldHash> seen{in.init};
        while (!queue.empty()) {
            World w = queue.front();
            queue.pop_front();
            for (auto& [m, next] : successors(in, w)) {
                if (seen.insert(next).second) queue.push_back(next);
            }
        }
        for (const auto& w : seen) all.emplace(w, -1);
    }
    std::deque<World> queue;
    for (auto& [w, d] : all) {
        if (satisfied(in, w)) {
            d = 0;
            queue.push_back(w);
        }
    }
    while (!queue.empty()) {
        World w = queue.front();
        queue.pop_front();
        const int d = all[w];
        for (auto& [m, next] : successors(in, w)) {
            auto& dn = all[next];
            if (dn < 0) {
                dn = d + 1;
                queue.push_back(next);
            }
        }
    }
    return all;
}

namespace detail {

// A* over (world, matched observations). Unit costs and a consistent bound
// (max of the goal bound and the unmatched observation count) keep it exact.
inline std::optional<int> observed_cost(const Instance& in, const World& start, const std::vector<std::string>& obs,
                                        bool avoid, std::size_t limit) {
    using Key = std::pair<World, std::size_t>;
    struct KeyHash {
        std::size_t operator()(const Key& k) const { return WorldHash{}(k.first) * 31 + k.second; }
    };
    const std::size_t n = obs.size();
    auto h = [&](const World& w, std::size_t k) {
        const int lb = lower_bound(in, w);
        return avoid ? lb : std::max(lb, static_cast<int>(n - k));
    };
    auto done = [&](const World& w, std::size_t k) { return satisfied(in, w) && (avoid || k == n); };
    std::unordered_map<Key, int, KeyHash> g{{{start, 0}, 0}};
    std::map<int, std::vector<Key>> open;  // f -> nodes
    open[h(start, 0)].push_back({start, 0});
    while (!open.empty()) {
        auto it = open.begin();
        const int f = it->first;
        if (it->second.empty()) {
            open.erase(it);
            continue;
        }
        Key key = std::move(it->second.back());
        it->second.pop_back();
        const int d = g.at(key);
        if (d + h(key.first, key.second) != f) continue;  // stale entry
        if (done(key.first, key.second)) return d;
        for (auto& [m, next] : successors(in, key.first)) {
            std::size_t k = key.second;
            if (k < n && in.signature(m) == obs[k]) ++k;
            if (avoid && k == n) continue;
            Key nk{next, k};
            auto [pos, fresh] = g.emplace(nk, d + 1);
            if (!fresh) {
                if (pos->second <= d + 1) continue;
                pos->second = d + 1;
            }
            if (g.size() > limit) throw std::runtime_error("oracle search limit reached");
            open[d + 1 + h(next, k)].push_back(std::move(nk));
        }
    }
    return std::nullopt;
}

}  // namespace detail

// Cheapest plan that contains the observations (actor-erased signatures) as
// an in-order subsequence and reaches the goal. Throws when the search
// outgrows `limit` states rather than guessing.
inline std::optional<int> comply_cost(const Instance& in, const World& start, const std::vector<std::string>& obs,
                                      std::size_t limit = 20'000'000) {
    return detail::observed_cost(in, start, obs, false, limit);
}

// Delete-relaxed reachability of the goal when moves with signature `banned`
// are never used. A false answer proves that every plan uses such a move.
inline bool relaxed_reachable(const Instance& in, const World& start, const std::string& banned) {
    const int n = static_cast<int>(in.blocks.size());
    const int hands = static_cast<int>(in.hands.size());
    std::vector<std::vector<char>> on(n, std::vector<char>(n, 0)), hold(hands, std::vector<char>(n, 0));
    std::vector<char> table(n, 0), clr(n, 0), empty(hands, 0);
    for (int b = 0; b < n; ++b) {
        const int p = start.pos[b];
        if (p == kTable) table[b] = 1;
        else if (p >= 0) on[b][p] = 1;
        else hold[-p - 2][b] = 1;
        clr[b] = clear(start, b);
    }
    for (int h = 0; h < hands; ++h) empty[h] = holding(start, h) < 0;
    auto allowed = [&](const std::string& name, int x, int y) {
        std::string sig = name + "(" + in.blocks[x];
        if (y >= 0) sig += "," + in.blocks[y];
        return sig + ")" != banned;
    };
    auto set = [](char& f, bool& changed) {
        if (!f) f = changed = true;
    };
    for (bool changed = true; changed;) {
        changed = false;
        for (int h = 0; h < hands; ++h) {
            for (int x = 0; x < n; ++x) {
                if (table[x] && clr[x] && empty[h] && allowed("pickup", x, -1)) set(hold[h][x], changed);
                if (hold[h][x] && allowed("putdown", x, -1)) {
                    set(table[x], changed);
                    set(clr[x], changed);
                    set(empty[h], changed);
                }
                for (int y = 0; y < n; ++y) {
                    if (x == y) continue;
                    if (on[x][y] && clr[x] && empty[h] && allowed("unstack", x, y)) {
                        set(hold[h][x], changed);
                        set(clr[y], changed);
                    }
                    if (hold[h][x] && clr[y] && allowed("stack", x, y)) {
                        set(on[x][y], changed);
                        set(clr[x], changed);
                        set(empty[h], changed);
                    }
                }
            }
        }
    }
    for (auto [x, y] : in.goal) {
        if (!on[x][y]) return false;
    }
    return true;
}

// Cheapest plan reaching the goal without completing the observations.
// Greedy matching is exact for subsequence containment.
inline std::optional<int> avoid_cost(const Instance& in, const World& start, const std::vector<std::string>& obs,
                                     std::size_t limit = 20'000'000) {
    if (obs.empty()) return std::nullopt;
    if (obs.size() == 1 && !relaxed_reachable(in, start, obs[0])) return std::nullopt;
    return detail::observed_cost(in, start, obs, true, limit);
}

// Optimal-plan DAG: (world, depth) pairs lying on some optimal plan.
struct OptimalDag {
    int cost = 0;
    std::set<std::pair<std::vector<int>, int>> nodes;
};

inline std::optional<OptimalDag> optimal_dag(const Instance& in, int max_cost = 40) {
    auto c = ida_cost(in, in.init, max_cost);
    if (!c) return std::nullopt;
    OptimalDag dag;
    dag.cost = *c;
    std::map<std::pair<std::vector<int>, int>, bool> memo;
    std::function<bool(const World&, int)> on_optimal = [&](const World& w, int g) {
        if (g + lower_bound(in, w) > *c) return false;
        if (g == *c) return satisfied(in, w);
        const auto key = std::make_pair(w.pos, g);
        if (auto it = memo.find(key); it != memo.end()) return it->second;
        bool any = false;
        for (auto& [m, next] : successors(in, w)) {
            if (on_optimal(next, g + 1)) any = true;
        }
        // Goal states reached early cannot continue optimally (unit costs, c* fixed).
        memo[key] = any;
        if (any) dag.nodes.insert(key);
        return any;
    };
    if (satisfied(in, in.init)) {
        dag.nodes.insert({in.init.pos, 0});
        return dag;
    }
    on_optimal(in.init, 0);
    return dag;
}

// Longest common prefix of optimal plans for two goals (single shared start).
inline std::optional<int> wcd(Instance a, const std::vector<std::pair<int, int>>& goal_b, int max_cost = 40) {
    Instance b = a;
    b.goal = goal_b;
    auto da = optimal_dag(a, max_cost);
    auto db = optimal_dag(b, max_cost);
    if (!da || !db) return std::nullopt;
    auto member = [](const OptimalDag& d, const World& w, int g) {
        if (g == d.cost) return false;  // plan ended; nothing further to share
        return d.nodes.count({w.pos, g}) > 0;
    };
    std::function<int(const World&, int)> longest = [&](const World& w, int g) {
        int best = 0;
        for (auto& [m, next] : successors(a, w)) {
            const bool in_a = g + 1 == da->cost ? satisfied(a, next) : member(*da, next, g + 1);
            const bool in_b = g + 1 == db->cost ? satisfied(b, next) : member(*db, next, g + 1);
            if (in_a && in_b) best = std::max(best, 1 + longest(next, g + 1));
        }
        return best;
    };
    return longest(a.init, 0);
}

}  // namespace oracle
