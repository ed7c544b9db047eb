#ifndef TAILSITTER_DUBINS_HPP
#define TAILSITTER_DUBINS_HPP

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "tailsitter/errors.hpp"
#include "tailsitter/math.hpp"

namespace tailsitter {

struct PlanarPose {
    double x = 0.0;
    double y = 0.0;
    double psi = 0.0; // heading, wrapped to (-pi, pi]

    PlanarPose() = default;
    PlanarPose(double x_, double y_, double psi_) : x(x_), y(y_), psi(wrap_pi(psi_)) {}
};

enum class DubinsWord { LSL, LSR, RSL, RSR, RLR, LRL };

inline const char *to_string(DubinsWord w) {
    switch (w) {
    case DubinsWord::LSL: return "LSL";
    case DubinsWord::LSR: return "LSR";
    case DubinsWord::RSL: return "RSL";
    case DubinsWord::RSR: return "RSR";
    case DubinsWord::RLR: return "RLR";
    default: return "LRL";
    }
}

// Normalized segment parameters: arc angles in radians, the middle
// straight in turning-radius units.
struct DubinsPath {
    DubinsWord word = DubinsWord::LSL;
    std::array<double, 3> params = {0.0, 0.0, 0.0};
    double turn_radius = 1.0;
    PlanarPose start;

    double length() const { return turn_radius * (params[0] + params[1] + params[2]); }

    char segment_type(int i) const {
        static constexpr char table[6][3] = {{'L', 'S', 'L'}, {'L', 'S', 'R'}, {'R', 'S', 'L'},
                                             {'R', 'S', 'R'}, {'R', 'L', 'R'}, {'L', 'R', 'L'}};
        return table[static_cast<int>(word)][i];
    }

    // Pose after travelling arclength s from the start.
    PlanarPose sample(double s) const {
        s = std::clamp(s / turn_radius, 0.0, params[0] + params[1] + params[2]);
        double gx = start.x, gy = start.y, psi = start.psi;
        for (int i = 0; i < 3; ++i) {
            const double seg = std::min(s, params[i]);
            const char type = segment_type(i);
            if (type == 'S') {
                gx += turn_radius * seg * std::cos(psi);
                gy += turn_radius * seg * std::sin(psi);
            } else {
                // turn center sits perpendicular-left (L) or -right (R)
                const double dir = type == 'L' ? 1.0 : -1.0;
                const double cx = gx - turn_radius * dir * std::sin(psi);
                const double cy = gy + turn_radius * dir * std::cos(psi);
                const double ang = std::atan2(gy - cy, gx - cx) + dir * seg;
                gx = cx + turn_radius * std::cos(ang);
                gy = cy + turn_radius * std::sin(ang);
                psi = wrap_pi(psi + dir * seg);
            }
            s -= seg;
            if (s <= 0.0) break;
        }
        return PlanarPose(gx, gy, psi);
    }

    // Signed turn rate (1/turn_radius units scaled by speed elsewhere) of
    // the segment active at arclength s.
    double curvature(double s) const {
        s = std::clamp(s / turn_radius, 0.0, params[0] + params[1] + params[2]);
        for (int i = 0; i < 3; ++i) {
            if (s <= params[i] || i == 2) {
                const char type = segment_type(i);
                if (type == 'S') return 0.0;
                return (type == 'L' ? 1.0 : -1.0) / turn_radius;
            }
            s -= params[i];
        }
        return 0.0;
    }
};

namespace detail {

inline double mod2pi(double a) {
    a = std::fmod(a, 2.0 * kPi);
    return a < 0.0 ? a + 2.0 * kPi : a;
}

struct WordSolution {
    double t, p, q;
};

// Solvers in normalized coordinates: start (0,0,a), goal (d,0,b), unit
// radius. Arc parameters are taken in [0, 2pi), the straight p >= 0.
inline std::optional<WordSolution> solve_word(DubinsWord w, double d, double a, double b) {
    const double sa = std::sin(a), ca = std::cos(a);
    const double sb = std::sin(b), cb = std::cos(b);
    const double cab = std::cos(a - b);
    switch (w) {
    case DubinsWord::LSL: {
        const double p2 = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sa - sb);
        if (p2 < 0.0) return std::nullopt;
        const double tmp = std::atan2(cb - ca, d + sa - sb);
        return WordSolution{mod2pi(tmp - a), std::sqrt(p2), mod2pi(b - tmp)};
    }
    case DubinsWord::RSR: {
        const double p2 = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sb - sa);
        if (p2 < 0.0) return std::nullopt;
        const double tmp = std::atan2(ca - cb, d - sa + sb);
        return WordSolution{mod2pi(a - tmp), std::sqrt(p2), mod2pi(tmp - b)};
    }
    case DubinsWord::LSR: {
        const double p2 = -2.0 + d * d + 2.0 * cab + 2.0 * d * (sa + sb);
        if (p2 < 0.0) return std::nullopt;
        const double p = std::sqrt(p2);
        const double tmp = std::atan2(-ca - cb, d + sa + sb) - std::atan2(-2.0, p);
        return WordSolution{mod2pi(tmp - a), p, mod2pi(tmp - b)};
    }
    case DubinsWord::RSL: {
        const double p2 = -2.0 + d * d + 2.0 * cab - 2.0 * d * (sa + sb);
        if (p2 < 0.0) return std::nullopt;
        const double p = std::sqrt(p2);
        const double tmp = std::atan2(ca + cb, d - sa - sb) - std::atan2(2.0, p);
        return WordSolution{mod2pi(a - tmp), p, mod2pi(b - tmp)};
    }
    case DubinsWord::RLR: {
        const double tmp = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sa - sb)) / 8.0;
        if (std::abs(tmp) > 1.0) return std::nullopt;
        const double p = mod2pi(2.0 * kPi - std::acos(tmp));
        const double t = mod2pi(a - std::atan2(ca - cb, d - sa + sb) + p / 2.0);
        return WordSolution{t, p, mod2pi(a - b - t + p)};
    }
    default: { // LRL
        const double tmp = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sb - sa)) / 8.0;
        if (std::abs(tmp) > 1.0) return std::nullopt;
        const double p = mod2pi(2.0 * kPi - std::acos(tmp));
        const double t = mod2pi(-a + std::atan2(cb - ca, d + sa - sb) + p / 2.0);
        return WordSolution{t, p, mod2pi(b - a - t + p)};
    }
    }
}

} // namespace detail

// Shortest bounded-curvature path between oriented planar poses: the best
// of the six candidate words.
inline DubinsPath dubins_shortest(const PlanarPose &start, const PlanarPose &goal,
                                  double turn_radius) {
    if (!(turn_radius > 0.0)) {
        throw DomainError("turn radius must be positive");
    }
    const double dx = goal.x - start.x;
    const double dy = goal.y - start.y;
    const double d = std::hypot(dx, dy) / turn_radius;
    const double theta = std::atan2(dy, dx);
    const double a = wrap_pi(start.psi - theta);
    const double b = wrap_pi(goal.psi - theta);

    DubinsPath best;
    best.turn_radius = turn_radius;
    best.start = start;
    double best_len = std::numeric_limits<double>::infinity();
    for (const DubinsWord w : {DubinsWord::LSL, DubinsWord::LSR, DubinsWord::RSL,
                               DubinsWord::RSR, DubinsWord::RLR, DubinsWord::LRL}) {
        const auto sol = detail::solve_word(w, d, a, b);
        if (!sol) continue;
        const double len = sol->t + sol->p + sol->q;
        if (len < best_len) {
            best_len = len;
            best.word = w;
            best.params = {sol->t, sol->p, sol->q};
        }
    }
    if (!std::isfinite(best_len)) {
        throw DomainError("no Dubins word admissible"); // cannot happen for d >= 0
    }
    return best;
}

} // namespace tailsitter

#endif
