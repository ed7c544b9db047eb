#ifndef TAILSITTER_TIME_OPT_HPP
#define TAILSITTER_TIME_OPT_HPP

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "tailsitter/flatness.hpp"
#include "tailsitter/lbfgs.hpp"
#include "tailsitter/minco.hpp"

namespace tailsitter {

struct OptimizerConfig {
    Eigen::VectorXd time_weights;     // b_i; broadcast when a single entry
    double penalty_weight = 1e4;      // w
    double v_max = 10.0;              // m/s
    int samples_per_segment = 16;     // N
    int lbfgs_memory = 8;
    double grad_tol_scale = 1e-5;     // delta = scale * max(1, ||grad(q0)||)
    int max_iterations = 200;
    double snap_weight = 0.0;         // optional energy term in the objective
    double duration_floor = 0.01;     // s
    double output_rate = 100.0;       // Hz reference sampling

    void validate() const {
        if (!(v_max > 0.0)) throw ValidationError("plan.v_max", "must be > 0");
        if (samples_per_segment < 4) {
            throw ValidationError("plan.samples_per_segment", "must be >= 4");
        }
        if (!(penalty_weight > 0.0)) throw ValidationError("plan.penalty_weight", "must be > 0");
        if (time_weights.size() > 0 && (time_weights.array() <= 0.0).any()) {
            throw ValidationError("plan.time_weights", "must be positive");
        }
    }

    double weight(int i, int segments) const {
        if (time_weights.size() == 0) return 1.0;
        if (time_weights.size() == 1) return time_weights(0);
        if (time_weights.size() != segments) {
            throw ValidationError("plan.time_weights", "size must be 1 or the segment count");
        }
        return time_weights(i);
    }
};

struct TimeAllocProblem {
    BoundaryCondition start;
    BoundaryCondition goal;
    std::vector<Eigen::Vector3d> waypoints;
    Eigen::Vector3d wind = Eigen::Vector3d::Zero();
    OptimizerConfig config;

    int segments() const { return static_cast<int>(waypoints.size()) + 1; }
};

// Cubic hinge penalty on sampled speeds, with its total derivative w.r.t.
// the segment durations: the coefficient path through the spline solve
// plus the explicit shift of the sample instants j*T_i/N.
inline std::pair<double, Eigen::VectorXd> speed_penalty(const MincoSolver &solver,
                                                        const PiecewiseTrajectory &traj,
                                                        double v_max, int samples) {
    const int M = traj.segments();
    double penalty = 0.0;
    Eigen::VectorXd grad_T = Eigen::VectorXd::Zero(M);
    Eigen::MatrixX3d grad_c = Eigen::MatrixX3d::Zero(kCoeffsPerSegment * M, 3);
    bool any_active = false;

    for (int i = 0; i < M; ++i) {
        const double Ti = traj.durations()(i);
        for (int j = 1; j <= samples; ++j) {
            const double frac = static_cast<double>(j) / samples;
            const double tau = frac * Ti;
            const Eigen::Vector3d vel = traj.evaluate_segment(i, tau, 1);
            const double speed = vel.norm();
            const double excess = speed - v_max;
            if (excess <= 0.0 || speed < 1e-12) {
                continue;
            }
            any_active = true;
            penalty += excess * excess * excess;
            const Eigen::Vector3d w = 3.0 * excess * excess * vel / speed;
            grad_c.block<kCoeffsPerSegment, 3>(kCoeffsPerSegment * i, 0) +=
                poly_basis(tau, 1).transpose() * w.transpose();
            grad_T(i) += frac * w.dot(traj.evaluate_segment(i, tau, 2));
        }
    }

    if (any_active) {
        for (int m = 0; m < M; ++m) {
            grad_T(m) += (grad_c.array() * solver.dcoeff_dT(m).array()).sum();
        }
    }
    return {penalty, grad_T};
}

struct TimeObjectiveTerms {
    double value = 0.0;
    Eigen::VectorXd grad_q;
    double penalty = 0.0;
    PiecewiseTrajectory trajectory;
};

inline double traj_fourth_norm2(const Eigen::Matrix<double, 4, 3> &d, double t) {
    Eigen::Vector3d v = Eigen::Vector3d::Zero();
    double tp = 1.0;
    for (int k = 0; k < 4; ++k) {
        v += d.row(k).transpose() * tp;
        tp *= t;
    }
    return v.squaredNorm();
}

// h(q) = sum b_i e^{q_i} + w P(v) (+ optional snap energy), with gradient
// in the warped coordinates.
inline TimeObjectiveTerms objective(const Eigen::VectorXd &q, const TimeAllocProblem &problem,
                                    MincoSolver &solver) {
    const int M = problem.segments();
    const Eigen::VectorXd T = q.array().exp().matrix();
    TimeObjectiveTerms out;
    out.trajectory = solver.solve(T);

    auto [P, dP_dT] = speed_penalty(solver, out.trajectory, problem.config.v_max,
                                    problem.config.samples_per_segment);
    out.penalty = P;
    out.grad_q.resize(M);
    out.value = problem.config.penalty_weight * P;
    for (int i = 0; i < M; ++i) {
        const double b = problem.config.weight(i, M);
        out.value += b * T(i);
        out.grad_q(i) = (b + problem.config.penalty_weight * dP_dT(i)) * T(i);
    }

    if (problem.config.snap_weight > 0.0) {
        out.value += problem.config.snap_weight * out.trajectory.snap_cost();
        Eigen::VectorXd dS_dT = Eigen::VectorXd::Zero(M);
        Eigen::MatrixX3d dS_dc = Eigen::MatrixX3d::Zero(kCoeffsPerSegment * M, 3);
        const auto &c = out.trajectory.coefficients();
        for (int i = 0; i < M; ++i) {
            const double Ti = T(i);
            Eigen::Matrix<double, 4, 3> d;
            const double fac[4] = {24.0, 120.0, 360.0, 840.0};
            for (int k = 0; k < 4; ++k) {
                d.row(k) = fac[k] * c.row(kCoeffsPerSegment * i + 4 + k);
            }
            dS_dT(i) = traj_fourth_norm2(d, Ti);
            for (int k = 0; k < 4; ++k) {
                Eigen::RowVector3d acc = Eigen::RowVector3d::Zero();
                double power = Ti;
                for (int s = 0; s <= 6; ++s) {
                    const int l = s - k;
                    if (l >= 0 && l <= 3) {
                        acc += d.row(l) * power / static_cast<double>(s + 1);
                    }
                    power *= Ti;
                }
                dS_dc.row(kCoeffsPerSegment * i + 4 + k) = 2.0 * fac[k] * acc;
            }
        }
        for (int m = 0; m < M; ++m) {
            dS_dT(m) += (dS_dc.array() * solver.dcoeff_dT(m).array()).sum();
        }
        out.grad_q += problem.config.snap_weight * dS_dT.cwiseProduct(T);
    }
    return out;
}

struct TimeOptResult {
    Eigen::VectorXd q;
    PiecewiseTrajectory trajectory;
    lbfgs::Status status = lbfgs::Status::Converged;
    int iterations = 0;
    double objective_value = 0.0;
    double penalty = 0.0;
};

inline Eigen::VectorXd initial_log_durations(const TimeAllocProblem &problem) {
    const int M = problem.segments();
    Eigen::VectorXd q(M);
    Eigen::Vector3d prev = problem.start.position;
    for (int i = 0; i < M; ++i) {
        const Eigen::Vector3d next = i + 1 < M
                                         ? problem.waypoints[static_cast<size_t>(i)]
                                         : problem.goal.position;
        const double chord = (next - prev).norm();
        const double T0 = std::max(chord / (0.5 * problem.config.v_max),
                                   problem.config.duration_floor);
        q(i) = std::log(T0);
        prev = next;
    }
    return q;
}

inline TimeOptResult optimize_times(const TimeAllocProblem &problem, Eigen::VectorXd q0) {
    problem.config.validate();
    MincoSolver solver(problem.start, problem.goal, problem.waypoints);
    const double log_floor = std::log(problem.config.duration_floor);

    auto eval = [&](const Eigen::VectorXd &q, Eigen::VectorXd &grad) -> double {
        if ((q.array() < log_floor - 1e-12).any()) {
            grad.setZero(q.size());
            return std::numeric_limits<double>::infinity();
        }
        try {
            const TimeObjectiveTerms terms = objective(q, problem, solver);
            grad = terms.grad_q;
            return terms.value;
        } catch (const ConditioningError &) {
            grad.setZero(q.size());
            return std::numeric_limits<double>::infinity();
        }
    };

    Eigen::VectorXd g0(q0.size());
    const double f0 = eval(q0, g0);
    if (!std::isfinite(f0)) {
        throw DomainError("initial durations violate the floor or the solver");
    }

    lbfgs::Params params;
    params.memory = problem.config.lbfgs_memory;
    params.grad_tol = problem.config.grad_tol_scale * std::max(1.0, g0.norm());
    params.max_iterations = problem.config.max_iterations;
    const lbfgs::Result r = lbfgs::minimize(eval, q0, params);

    TimeOptResult out;
    out.q = r.x.cwiseMax(log_floor);
    out.status = r.status;
    out.iterations = r.iterations;
    const TimeObjectiveTerms final_terms = objective(out.q, problem, solver);
    out.trajectory = final_terms.trajectory;
    out.objective_value = final_terms.value;
    out.penalty = final_terms.penalty;
    return out;
}

struct StallWarning {
    double time = 0.0;
    double alpha = 0.0;
    double residual = 0.0;
};

struct PlanResult {
    PiecewiseTrajectory trajectory;
    std::vector<double> sample_times;
    std::vector<FlatnessResult> samples;
    std::vector<StallWarning> stall_warnings;
    lbfgs::Status optimizer_status = lbfgs::Status::Converged;
    int optimizer_iterations = 0;
    double objective_value = 0.0;
};

constexpr double kEndpointSpeedFloor = 0.3; // m/s injected at hover endpoints

inline FlatSample flat_sample_at(const PiecewiseTrajectory &traj, double t,
                                 const Eigen::Vector3d &wind) {
    FlatSample s;
    s.position = traj.evaluate(t, 0);
    s.velocity = traj.evaluate(t, 1);
    s.acceleration = traj.evaluate(t, 2);
    s.jerk = traj.evaluate(t, 3);
    s.snap = traj.evaluate(t, 4);
    s.wind = wind;
    return s;
}

// Full pipeline: endpoint regularization, duration optimization, then the
// flatness sweep that produces the tracking reference.
inline PlanResult plan(const TimeAllocProblem &problem_in, const VehicleParams &params,
                       const AeroModel &model) {
    TimeAllocProblem problem = problem_in;
    const Eigen::Vector3d up = -params.gravity.normalized();

    const bool hover_start = problem.start.velocity.norm() < 1e-12;
    const bool hover_goal = problem.goal.velocity.norm() < 1e-12;
    const bool degenerate = problem.waypoints.empty() &&
                            (problem.start.position - problem.goal.position).norm() < 1e-9 &&
                            hover_start && hover_goal;
    if (!degenerate) {
        // Exactly-zero endpoint speeds destabilize the incidence solve;
        // nudge them along the thrust axis.
        if (hover_start) problem.start.velocity = kEndpointSpeedFloor * up;
        if (hover_goal) problem.goal.velocity = kEndpointSpeedFloor * up;
    }

    TimeOptResult opt = optimize_times(problem, initial_log_durations(problem));

    PlanResult out;
    out.trajectory = std::move(opt.trajectory);
    out.optimizer_status = opt.status;
    out.optimizer_iterations = opt.iterations;
    out.objective_value = opt.objective_value;

    FlatnessMap map(params, model);
    map.reset(Eigen::Vector3d::UnitY(), 0.5 * kPi);

    const double total = out.trajectory.total_duration();
    const double dt = 1.0 / problem.config.output_rate;
    const int n = static_cast<int>(std::floor(total / dt));
    for (int k = 0; k <= n + 1; ++k) {
        const double t = std::min(k * dt, total);
        out.sample_times.push_back(t);
        FlatnessResult r = map.transform(flat_sample_at(out.trajectory, t, problem.wind));
        if (r.alpha_info.stall) {
            out.stall_warnings.push_back({t, r.alpha, r.alpha_info.residual});
        }
        out.samples.push_back(std::move(r));
        if (t >= total) {
            break;
        }
    }
    return out;
}

} // namespace tailsitter

#endif
