#ifndef TAILSITTER_PLANAR_HPP
#define TAILSITTER_PLANAR_HPP

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "tailsitter/dubins.hpp"
#include "tailsitter/errors.hpp"
#include "tailsitter/math.hpp"

namespace tailsitter {

struct L1Config {
    double lookahead = 10.0;      // L1 distance, m
    double accept_radius = 2.0;   // waypoint switching radius, m
};

// Lateral-acceleration path-following law a = 2 V^2 sin(eta) / L1 toward a
// lookahead point on the active polyline segment.
class L1Guidance {
public:
    L1Guidance(std::vector<Eigen::Vector2d> waypoints, L1Config cfg)
        : waypoints_(std::move(waypoints)), cfg_(cfg) {
        if (cfg_.lookahead <= 0.0) throw DomainError("L1 lookahead must be positive");
        if (waypoints_.size() < 2) throw DomainError("L1 path needs at least 2 waypoints");
    }

    struct Command {
        double lateral_accel = 0.0;
        bool off_path = false; // no lookahead intersection; nearest point used
        bool finished = false;
    };

    Command update(const PlanarPose &pose, double speed) {
        if (!(speed > 0.0)) throw DomainError("L1 guidance needs positive speed");
        Command cmd;
        const Eigen::Vector2d pos(pose.x, pose.y);

        // Waypoint switching on the acceptance radius.
        while (active_ + 1 < waypoints_.size() &&
               (waypoints_[active_ + 1] - pos).norm() < cfg_.accept_radius) {
            ++active_;
        }
        if (active_ + 1 >= waypoints_.size()) {
            cmd.finished = true;
            return cmd;
        }

        const Eigen::Vector2d ref = lookahead_point(pos, cmd.off_path);
        const Eigen::Vector2d to_ref = ref - pos;
        const double bearing = std::atan2(to_ref.y(), to_ref.x());
        const double eta = wrap_pi(bearing - pose.psi);
        cmd.lateral_accel = 2.0 * speed * speed * std::sin(eta) / cfg_.lookahead;
        return cmd;
    }

    size_t active_segment() const { return active_; }

private:
    // Farthest-along intersection of the lookahead circle with the active
    // segment; falls back to the nearest path point when none exists.
    Eigen::Vector2d lookahead_point(const Eigen::Vector2d &pos, bool &off_path) const {
        const Eigen::Vector2d a = waypoints_[active_];
        const Eigen::Vector2d b = waypoints_[active_ + 1];
        const Eigen::Vector2d ab = b - a;
        const double len2 = ab.squaredNorm();

        // |a + t ab - pos| = L1 as a quadratic in t.
        const Eigen::Vector2d ap = a - pos;
        const double qa = len2;
        const double qb = 2.0 * ap.dot(ab);
        const double qc = ap.squaredNorm() - cfg_.lookahead * cfg_.lookahead;
        const double disc = qb * qb - 4.0 * qa * qc;
        if (disc >= 0.0 && qa > 0.0) {
            const double t = (-qb + std::sqrt(disc)) / (2.0 * qa);
            if (t >= 0.0 && t <= 1.0) {
                off_path = false;
                return a + t * ab;
            }
            // beyond the segment end: aim at the end waypoint
            if (t > 1.0 && qc <= 0.0) {
                off_path = false;
                return b;
            }
        }
        off_path = true;
        const double t = len2 > 0.0 ? std::clamp(-ap.dot(ab) / len2, 0.0, 1.0) : 0.0;
        return a + t * ab;
    }

    std::vector<Eigen::Vector2d> waypoints_;
    L1Config cfg_;
    size_t active_ = 0;
};

struct PlanarTracePoint {
    double t = 0.0;
    PlanarPose pose;
    double psi_dot = 0.0;
    double speed = 0.0;
};

struct PlanarTrace {
    std::vector<PlanarTracePoint> points;
    double duration = 0.0;
    bool finished = false;

    // Count of turn-rate jumps larger than `threshold` between samples.
    int discontinuities(double threshold) const {
        int count = 0;
        for (size_t i = 1; i < points.size(); ++i) {
            if (std::abs(points[i].psi_dot - points[i - 1].psi_dot) > threshold) {
                ++count;
            }
        }
        return count;
    }

    double max_psi_dot_jump() const {
        double jump = 0.0;
        for (size_t i = 1; i < points.size(); ++i) {
            jump = std::max(jump, std::abs(points[i].psi_dot - points[i - 1].psi_dot));
        }
        return jump;
    }
};

// Constant-speed unicycle: xdot = V cos psi, ydot = V sin psi,
// psidot = a_cmd / V. The controller returns the lateral acceleration and
// may signal completion.
using PlanarController =
    std::function<std::pair<double, bool>(double t, const PlanarPose &, double speed)>;

inline PlanarTrace simulate_planar(const PlanarController &controller, const PlanarPose &start,
                                   double speed, double dt, double t_end) {
    if (!(dt > 0.0)) throw DomainError("planar simulation step must be positive");
    PlanarTrace trace;
    PlanarPose pose = start;
    for (double t = 0.0; t <= t_end + 0.5 * dt; t += dt) {
        const auto [a_cmd, finished] = controller(t, pose, speed);
        const double psi_dot = a_cmd / speed;
        trace.points.push_back({t, pose, psi_dot, speed});
        if (finished) {
            trace.finished = true;
            trace.duration = t;
            return trace;
        }
        pose.x += speed * std::cos(pose.psi) * dt;
        pose.y += speed * std::sin(pose.psi) * dt;
        pose.psi = wrap_pi(pose.psi + psi_dot * dt);
    }
    trace.duration = t_end;
    return trace;
}

// Open-loop replay of a Dubins path: piecewise-constant turn rate with
// jumps exactly at the word-segment boundaries.
inline PlanarTrace follow_dubins(const DubinsPath &path, double speed, double dt) {
    const double total = path.length();
    PlanarTrace trace = simulate_planar(
        [&](double t, const PlanarPose &, double) {
            const double s = speed * t;
            if (s >= total) {
                return std::make_pair(0.0, true);
            }
            return std::make_pair(speed * speed * path.curvature(s), false);
        },
        path.start, speed, dt, total / speed + 2.0 * dt);
    trace.finished = true;
    trace.duration = total / speed;
    return trace;
}

// Closed-loop L1 run over a waypoint polyline.
inline PlanarTrace follow_l1(const std::vector<Eigen::Vector2d> &waypoints,
                             const PlanarPose &start, double speed, const L1Config &cfg,
                             double dt, double t_end) {
    L1Guidance guidance(waypoints, cfg);
    return simulate_planar(
        [&](double, const PlanarPose &pose, double v) {
            const auto cmd = guidance.update(pose, v);
            return std::make_pair(cmd.lateral_accel, cmd.finished);
        },
        start, speed, dt, t_end);
}

} // namespace tailsitter

#endif
