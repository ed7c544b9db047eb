#ifndef TESTS_SUPPORT_DUBINS_ORACLE_HPP
#define TESTS_SUPPORT_DUBINS_ORACLE_HPP

#include <cmath>
#include <limits>

#include "tailsitter/dubins.hpp"

// Geometric shooting oracle for shortest bounded-curvature paths: scans
// the first arc angle, closes each word by construction, and refines the
// closure residual by bisection. Independent of the closed-form solvers.
namespace oracles {

using tailsitter::PlanarPose;

namespace dubins_detail {

inline double mod2pi(double a) {
    a = std::fmod(a, 2.0 * tailsitter::kPi);
    return a < 0.0 ? a + 2.0 * tailsitter::kPi : a;
}

inline PlanarPose arc_end(const PlanarPose &p, double dir, double ang, double r) {
    const double cx = p.x - r * dir * std::sin(p.psi);
    const double cy = p.y + r * dir * std::cos(p.psi);
    const double a0 = std::atan2(p.y - cy, p.x - cx);
    const double a1 = a0 + dir * ang;
    return PlanarPose(cx + r * std::cos(a1), cy + r * std::sin(a1), p.psi + dir * ang);
}

// Pose whose dir-arc of the given angle ends at `end`.
inline PlanarPose arc_start(const PlanarPose &end, double dir, double ang, double r) {
    const double cx = end.x - r * dir * std::sin(end.psi);
    const double cy = end.y + r * dir * std::cos(end.psi);
    const double a1 = std::atan2(end.y - cy, end.x - cx);
    const double a0 = a1 - dir * ang;
    return PlanarPose(cx + r * std::cos(a0), cy + r * std::sin(a0), end.psi - dir * ang);
}

struct Csc {
    const PlanarPose &start, &goal;
    double d1, d2, r;

    // Signed misalignment of the connecting straight; zero when the word
    // closes. Output through `candidate` when the straight degenerates.
    double residual(double theta1, double *length = nullptr) const {
        const PlanarPose p1 = arc_end(start, d1, theta1, r);
        const double theta2 = mod2pi(d2 * (goal.psi - p1.psi));
        const PlanarPose q = arc_start(goal, d2, theta2, r);
        const double wx = q.x - p1.x, wy = q.y - p1.y;
        const double wn = std::hypot(wx, wy);
        if (length) {
            *length = std::numeric_limits<double>::infinity();
            if (wn < 1e-7 ||
                (std::abs(tailsitter::wrap_pi(std::atan2(wy, wx) - p1.psi)) < 1e-7 &&
                 wx * std::cos(p1.psi) + wy * std::sin(p1.psi) > -1e-9)) {
                *length = r * (theta1 + theta2) + wn;
            }
        }
        if (wn < 1e-9) {
            return 0.0;
        }
        return tailsitter::wrap_pi(std::atan2(wy, wx) - p1.psi);
    }
};

struct Ccc {
    const PlanarPose &start, &goal;
    double d, r;

    double residual(double theta1, double *length = nullptr) const {
        const PlanarPose p1 = arc_end(start, d, theta1, r);
        const double c2x = p1.x - r * (-d) * std::sin(p1.psi);
        const double c2y = p1.y + r * (-d) * std::cos(p1.psi);
        const double c3x = goal.x - r * d * std::sin(goal.psi);
        const double c3y = goal.y + r * d * std::cos(goal.psi);
        const double dist = std::hypot(c2x - c3x, c2y - c3y);
        if (length) {
            *length = std::numeric_limits<double>::infinity();
            if (std::abs(dist - 2.0 * r) < 1e-7) {
                const double mx = 0.5 * (c2x + c3x), my = 0.5 * (c2y + c3y);
                const double ang_p = std::atan2(p1.y - c2y, p1.x - c2x);
                const double ang_m = std::atan2(my - c2y, mx - c2x);
                const double mid = mod2pi(-d * (ang_m - ang_p));
                const double psi_m = p1.psi - d * mid;
                const double ang_m3 = std::atan2(my - c3y, mx - c3x);
                const double ang_g = std::atan2(goal.y - c3y, goal.x - c3x);
                const double last = mod2pi(d * (ang_g - ang_m3));
                // heading consistency at the tangent point
                const double psi_m_c3 = ang_m3 + d * 0.5 * tailsitter::kPi;
                if (std::abs(tailsitter::wrap_pi(psi_m - psi_m_c3)) < 1e-6) {
                    *length = r * (theta1 + mid + last);
                }
            }
        }
        return dist - 2.0 * r;
    }
};

template <typename Word>
inline void scan_word(const Word &word, double &best) {
    constexpr int kGrid = 4096;
    double prev_theta = 0.0;
    double prev_res = word.residual(0.0);
    {
        double len;
        word.residual(0.0, &len);
        best = std::min(best, len);
    }
    for (int i = 1; i <= kGrid; ++i) {
        const double theta = 2.0 * tailsitter::kPi * i / kGrid;
        const double res = word.residual(theta);
        double len;
        word.residual(theta, &len);
        best = std::min(best, len);

        // transversal sign change; exclude wrap jumps of the angle residual
        if (prev_res * res <= 0.0 && std::abs(prev_res) + std::abs(res) < 1.0) {
            double a = prev_theta, b = theta, fa = prev_res;
            for (int it = 0; it < 80; ++it) {
                const double mid = 0.5 * (a + b);
                const double fm = word.residual(mid);
                if (fa * fm <= 0.0) {
                    b = mid;
                } else {
                    a = mid;
                    fa = fm;
                }
            }
            double len_root;
            word.residual(0.5 * (a + b), &len_root);
            best = std::min(best, len_root);
        }
        prev_theta = theta;
        prev_res = res;
    }
}

} // namespace dubins_detail

inline double brute_force_dubins_length(const PlanarPose &start, const PlanarPose &goal,
                                        double r) {
    using namespace dubins_detail;
    double best = std::numeric_limits<double>::infinity();
    for (const double d1 : {1.0, -1.0}) {
        for (const double d2 : {1.0, -1.0}) {
            scan_word(Csc{start, goal, d1, d2, r}, best);
        }
        scan_word(Ccc{start, goal, d1, r}, best);
    }
    return best;
}

} // namespace oracles

#endif
