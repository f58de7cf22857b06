#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace pretcil {

// Action costs are fixed-precision: 1 unit == 1000 milli-units.
using Cost = std::int64_t;

inline constexpr Cost kCostScale = 1000;
inline constexpr Cost kInfiniteCost = std::numeric_limits<Cost>::max() / 4;

inline bool is_infinite(Cost c) { return c >= kInfiniteCost; }

inline Cost cost_from_units(double units) {
    if (!(units >= 0.0) || !std::isfinite(units)) {
        throw std::invalid_argument("cost must be a finite non-negative number");
    }
    return static_cast<Cost>(std::llround(units * static_cast<double>(kCostScale)));
}

inline double cost_to_units(Cost c) {
    if (is_infinite(c)) return std::numeric_limits<double>::infinity();
    return static_cast<double>(c) / static_cast<double>(kCostScale);
}

inline Cost add_costs(Cost a, Cost b) {
    if (is_infinite(a) || is_infinite(b)) return kInfiniteCost;
    const Cost s = a + b;
    return s >= kInfiniteCost ? kInfiniteCost : s;
}

// Shortest decimal rendering, e.g. 1000 -> "1", 1500 -> "1.5", inf -> "inf".
inline std::string format_cost(Cost c) {
    if (is_infinite(c)) return "inf";
    std::string out = std::to_string(c / kCostScale);
    Cost frac = c % kCostScale;
    if (frac != 0) {
        std::string digits = std::to_string(frac);
        digits.insert(0, 3 - digits.size(), '0');
        while (!digits.empty() && digits.back() == '0') digits.pop_back();
        out += "." + digits;
    }
    return out;
}

}  // namespace pretcil
