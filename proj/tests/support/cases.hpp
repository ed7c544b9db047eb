#ifndef TESTS_SUPPORT_CASES_HPP
#define TESTS_SUPPORT_CASES_HPP

#include "tailsitter/time_opt.hpp"

// Shared planning instances used across the test suites.
namespace cases {

using tailsitter::BoundaryCondition;
using tailsitter::TimeAllocProblem;

// Hover-to-hover ascent in a vertical plane, ~80 m wide and 20 m tall,
// with two interior waypoints.
inline TimeAllocProblem vertical_ascent() {
    TimeAllocProblem p;
    p.start.position = Eigen::Vector3d(0.0, 0.0, 0.0);
    p.goal.position = Eigen::Vector3d(80.0, 0.0, -20.0);
    p.waypoints = {Eigen::Vector3d(30.0, 0.0, -6.0), Eigen::Vector3d(55.0, 0.0, -14.0)};
    p.config.v_max = 10.0;
    p.config.penalty_weight = 1e4;
    p.config.samples_per_segment = 16;
    return p;
}

// Four interior waypoints, moderate speed cap.
inline TimeAllocProblem four_waypoints() {
    TimeAllocProblem p;
    p.start.position = Eigen::Vector3d(0.0, 0.0, 0.0);
    p.goal.position = Eigen::Vector3d(40.0, 10.0, -8.0);
    p.waypoints = {Eigen::Vector3d(8.0, 6.0, -2.0), Eigen::Vector3d(16.0, -2.0, -4.0),
                   Eigen::Vector3d(26.0, 8.0, -5.0), Eigen::Vector3d(34.0, 2.0, -7.0)};
    p.config.v_max = 8.0;
    p.config.penalty_weight = 1e4;
    p.config.samples_per_segment = 16;
    return p;
}

// Planar turnaround used by the baseline comparison: level start and goal
// headed opposite ways, with the goal well inside any 8 m turning circle.
inline TimeAllocProblem planar_turnaround(double v_cap) {
    TimeAllocProblem p;
    p.start.position = Eigen::Vector3d(0.0, 0.0, -15.0);
    p.start.velocity = Eigen::Vector3d(v_cap, 0.0, 0.0);
    p.goal.position = Eigen::Vector3d(0.0, 6.0, -15.0);
    p.goal.velocity = Eigen::Vector3d(-v_cap, 0.0, 0.0);
    p.waypoints = {Eigen::Vector3d(30.0, 3.0, -15.0)};
    p.config.v_max = v_cap;
    p.config.penalty_weight = 1e4;
    p.config.samples_per_segment = 16;
    return p;
}

} // namespace cases

#endif
