#ifndef TAILSITTER_HARNESS_HPP
#define TAILSITTER_HARNESS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "tailsitter/dynamics.hpp"
#include "tailsitter/mpc.hpp"
#include "tailsitter/planar.hpp"
#include "tailsitter/scenario.hpp"
#include "tailsitter/time_opt.hpp"

namespace tailsitter {

namespace detail {

inline std::string fmt_g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path &path, const std::vector<std::string> &header)
        : out_(path) {
        if (!out_) {
            throw std::runtime_error("cannot open " + path.string() + " for writing");
        }
        for (size_t i = 0; i < header.size(); ++i) {
            out_ << header[i] << (i + 1 < header.size() ? "," : "\n");
        }
    }

    void row(const std::vector<double> &values) {
        for (size_t i = 0; i < values.size(); ++i) {
            out_ << fmt_g(values[i]) << (i + 1 < values.size() ? "," : "\n");
        }
    }

private:
    std::ofstream out_;
};

inline void append_vec3(std::vector<double> &row, const Eigen::Vector3d &v) {
    row.push_back(v.x());
    row.push_back(v.y());
    row.push_back(v.z());
}

} // namespace detail

inline const std::vector<std::string> kReferenceCsvHeader = {
    "t",    "px",   "py",   "pz",   "vx",        "vy",       "vz",  "ax",   "ay",   "az",
    "qw",   "qx",   "qy",   "qz",   "omx",       "omy",      "omz", "f",    "taux", "tauy",
    "tauz", "alpha_deg", "beta_deg", "aT"};

inline std::vector<double> reference_csv_row(double t, const FlatnessResult &r,
                                             const Eigen::Vector3d &accel) {
    std::vector<double> row;
    row.reserve(kReferenceCsvHeader.size());
    row.push_back(t);
    detail::append_vec3(row, r.state.p);
    detail::append_vec3(row, r.state.v);
    detail::append_vec3(row, accel);
    const Eigen::Quaterniond q(r.state.R);
    row.push_back(q.w());
    row.push_back(q.x());
    row.push_back(q.y());
    row.push_back(q.z());
    detail::append_vec3(row, r.state.omega);
    row.push_back(r.input.thrust);
    detail::append_vec3(row, r.input.torque);
    row.push_back(r.alpha * 180.0 / kPi);
    row.push_back(r.airflow.beta * 180.0 / kPi);
    row.push_back(r.thrust_accel);
    return row;
}

struct PlanArtifacts {
    PlanResult result;
    std::filesystem::path trajectory_json;
    std::filesystem::path reference_csv;
};

// Plan and emit the trajectory serialization plus the sampled reference.
inline PlanArtifacts run_plan(const Scenario &scenario, const AeroModel &model,
                              const std::filesystem::path &out_dir) {
    std::filesystem::create_directories(out_dir);
    PlanArtifacts art;
    art.result = plan(scenario.planning_problem(), scenario.vehicle, model);
    art.trajectory_json = out_dir / "trajectory.json";
    art.reference_csv = out_dir / "reference.csv";

    {
        nlohmann::json j = art.result.trajectory.to_json();
        j["name"] = scenario.name;
        j["stall_warnings"] = nlohmann::json::array();
        for (const auto &w : art.result.stall_warnings) {
            j["stall_warnings"].push_back({{"t", w.time}, {"alpha", w.alpha},
                                           {"residual", w.residual}});
        }
        std::ofstream out(art.trajectory_json);
        out << j.dump(2) << "\n";
    }
    {
        detail::CsvWriter csv(art.reference_csv, kReferenceCsvHeader);
        for (size_t k = 0; k < art.result.samples.size(); ++k) {
            const double t = art.result.sample_times[k];
            csv.row(reference_csv_row(t, art.result.samples[k],
                                      art.result.trajectory.evaluate(t, 2)));
        }
    }
    return art;
}

// Rebuilds the reference sweep from a serialized trajectory, so tracking
// can run from artifacts alone.
inline PlanResult resweep(const PiecewiseTrajectory &traj, const Scenario &scenario,
                          const AeroModel &model) {
    PlanResult out;
    out.trajectory = traj;
    FlatnessMap map(scenario.vehicle, model);
    map.reset(Eigen::Vector3d::UnitY(), 0.5 * kPi);
    const double total = traj.total_duration();
    const double dt = 1.0 / scenario.plan.output_rate;
    const int n = static_cast<int>(std::floor(total / dt));
    for (int k = 0; k <= n + 1; ++k) {
        const double t = std::min(k * dt, total);
        out.sample_times.push_back(t);
        FlatnessResult r = map.transform(flat_sample_at(traj, t, scenario.planner_wind));
        if (r.alpha_info.stall) {
            out.stall_warnings.push_back({t, r.alpha, r.alpha_info.residual});
        }
        out.samples.push_back(std::move(r));
        if (t >= total) break;
    }
    return out;
}

struct TrackOptions {
    double hold_time = 2.0; // keep tracking the final reference this long
    std::optional<VehicleState> initial_state;
    double csv_rate = 100.0;
};

struct TrackMetrics {
    double max_position_error = 0.0;
    double rms_position_error = 0.0;
    double final_position_error = 0.0;
    double peak_acceleration = 0.0;
    double peak_body_rate = 0.0;
    int input_bound_violations = 0;
    bool diverged = false;
    double duration = 0.0;
};

struct TrackResult {
    TrackMetrics metrics;
    std::filesystem::path tracking_csv;
    std::filesystem::path metrics_json;
};

inline const std::vector<std::string> kTrackingCsvHeader = {
    "t",    "px_ref", "py_ref", "pz_ref", "px",   "py",  "pz",  "vx",   "vy",  "vz",
    "qw",   "qx",     "qy",     "qz",     "omx",  "omy", "omz", "f",    "taux", "tauy",
    "tauz", "pos_err"};

// Closed loop: MPC at its own period, body-rate PID at the simulation rate,
// full nonlinear integration in between.
inline TrackResult run_track(const Scenario &scenario, const PlanResult &plan_result,
                             const AeroModel &model, const std::filesystem::path &out_dir,
                             const TrackOptions &options = {}) {
    std::filesystem::create_directories(out_dir);
    TrackResult result;
    result.tracking_csv = out_dir / "tracking.csv";
    result.metrics_json = out_dir / "metrics.json";

    const auto &samples = plan_result.samples;
    if (samples.empty()) {
        throw DomainError("tracking requires a non-empty reference");
    }
    const double total = plan_result.trajectory.total_duration();
    const double t_end = std::min(scenario.sim_duration_cap, total + options.hold_time);
    const double dt = scenario.sim_dt;

    // Reference points at the MPC period.
    MpcTracker tracker(scenario.mpc, scenario.vehicle);
    const double ref_rate = scenario.plan.output_rate;
    const int stride = std::max(1, static_cast<int>(std::lround(scenario.mpc.dt * ref_rate)));
    std::vector<MpcReferencePoint> refs;
    for (size_t k = 0; k < samples.size(); k += static_cast<size_t>(stride)) {
        refs.push_back(MpcReferencePoint::from_flatness(samples[k]));
    }
    MpcReferencePoint terminal = MpcReferencePoint::from_flatness(samples.back());
    terminal.omega.setZero();
    const int horizon = scenario.mpc.horizon;

    VehicleState state = options.initial_state ? *options.initial_state : samples.front().state;
    RatePid pid(RatePidConfig::defaults(scenario.vehicle));
    AirflowState airflow_prev = airflow_from_state(state, scenario.wind.at(0.0));

    detail::CsvWriter csv(result.tracking_csv, kTrackingCsvHeader);
    const int csv_stride =
        std::max(1, static_cast<int>(std::lround(1.0 / (options.csv_rate * dt))));
    const int mpc_stride = std::max(1, static_cast<int>(std::lround(scenario.mpc.dt / dt)));

    double f_cmd = samples.front().input.thrust;
    Eigen::Vector3d omega_cmd = samples.front().state.omega;
    double err2_sum = 0.0;
    long err_count = 0;
    Eigen::Vector3d v_prev = state.v;
    const double extent = std::max(
        1.0, (plan_result.trajectory.evaluate(0.0, 0) - plan_result.trajectory.evaluate(total, 0))
                 .norm());

    TrackMetrics &m = result.metrics;
    int step = 0;
    for (double t = 0.0; t < t_end - 0.5 * dt; t += dt, ++step) {
        if (step % mpc_stride == 0) {
            std::vector<MpcReferencePoint> window;
            window.reserve(static_cast<size_t>(horizon) + 1);
            const size_t base = static_cast<size_t>(step / mpc_stride);
            for (int k = 0; k <= horizon; ++k) {
                const size_t idx = base + static_cast<size_t>(k);
                window.push_back(idx < refs.size() ? refs[idx] : terminal);
            }
            const MpcSolution sol = tracker.solve(state, window);
            f_cmd = sol.thrust;
            omega_cmd = sol.omega_cmd;
            if (f_cmd < scenario.vehicle.thrust_min - 1e-9 ||
                f_cmd > scenario.vehicle.thrust_max + 1e-9 ||
                (omega_cmd.cwiseAbs() - scenario.vehicle.omega_max).maxCoeff() > 1e-9) {
                ++m.input_bound_violations;
            }
        }

        const Eigen::Vector3d wind = scenario.wind.at(t);
        const AirflowState airflow = airflow_from_state(state, wind, &airflow_prev);
        const Eigen::Vector3d M_a = aero_moment_body(airflow, scenario.vehicle, model);
        const Eigen::Vector3d gyro =
            state.omega.cross(scenario.vehicle.inertia * state.omega);
        const Eigen::Vector3d tau = pid.torque(omega_cmd, state.omega, M_a, gyro, dt);

        try {
            state = step_rk4(state, {f_cmd, tau}, wind, dt, scenario.vehicle, model,
                             &airflow_prev);
        } catch (const DivergenceError &) {
            m.diverged = true;
            break;
        }
        airflow_prev = airflow;

        const double t_next = t + dt;
        const Eigen::Vector3d p_ref =
            plan_result.trajectory.evaluate(std::min(t_next, total), 0);
        const double err = (p_ref - state.p).norm();
        m.max_position_error = std::max(m.max_position_error, err);
        err2_sum += err * err;
        ++err_count;
        m.final_position_error = err;
        m.peak_body_rate = std::max(m.peak_body_rate, state.omega.norm());
        m.peak_acceleration = std::max(m.peak_acceleration, (state.v - v_prev).norm() / dt);
        v_prev = state.v;
        m.duration = t_next;

        if (err > 10.0 * extent) {
            m.diverged = true;
            break;
        }

        if (step % csv_stride == 0) {
            std::vector<double> row;
            row.push_back(t_next);
            detail::append_vec3(row, p_ref);
            detail::append_vec3(row, state.p);
            detail::append_vec3(row, state.v);
            const Eigen::Quaterniond q(state.R);
            row.push_back(q.w());
            row.push_back(q.x());
            row.push_back(q.y());
            row.push_back(q.z());
            detail::append_vec3(row, state.omega);
            row.push_back(f_cmd);
            detail::append_vec3(row, tau);
            row.push_back(err);
            csv.row(row);
        }
    }
    m.rms_position_error = err_count > 0 ? std::sqrt(err2_sum / err_count) : 0.0;

    nlohmann::json j;
    j["max_position_error"] = m.max_position_error;
    j["rms_position_error"] = m.rms_position_error;
    j["final_position_error"] = m.final_position_error;
    j["peak_acceleration"] = m.peak_acceleration;
    j["peak_body_rate"] = m.peak_body_rate;
    j["input_bound_violations"] = m.input_bound_violations;
    j["diverged"] = m.diverged;
    j["duration"] = m.duration;
    std::ofstream out(result.metrics_json);
    out << j.dump(2) << "\n";
    return result;
}

struct CompareMethodReport {
    std::string name;
    double duration = 0.0;
    int discontinuities = 0;
    double max_turn_rate_jump = 0.0;
    bool finished = true;
};

struct CompareReport {
    std::vector<CompareMethodReport> methods;
    double speed_cap = 0.0;
    std::filesystem::path report_json;
};

// Planar comparison at a shared speed cap: the proposed planner through
// the waypoints, L1 guidance over the same polyline, and the Dubins
// shortest path between the boundary poses.
inline CompareReport run_compare(const Scenario &scenario, const AeroModel &model,
                                 const std::filesystem::path &out_dir) {
    std::filesystem::create_directories(out_dir);

    const double z0 = scenario.start.position.z();
    auto planar_check = [&](const Eigen::Vector3d &p, const std::string &field) {
        if (std::abs(p.z() - z0) > 1e-6) {
            throw ValidationError(field, "comparison scenarios must be planar (constant z)");
        }
    };
    planar_check(scenario.goal.position, "goal.position");
    for (size_t i = 0; i < scenario.waypoints.size(); ++i) {
        planar_check(scenario.waypoints[i], "waypoints[" + std::to_string(i) + "]");
    }

    const double speed = scenario.baselines.speed.value_or(scenario.plan.v_max);
    const double sim_dt = 0.01;
    CompareReport report;
    report.speed_cap = speed;
    report.report_json = out_dir / "compare_report.json";

    // Turn-rate jump threshold: a fraction of the bounded-curvature rate.
    const double jump_threshold = 0.25 * speed / scenario.baselines.turn_radius;

    // Proposed planner, twice: through the waypoints (the L1 task) and
    // boundary-to-boundary (the only task Dubins can take).
    auto report_plan = [&](const PlanResult &planned, const std::string &name) {
        CompareMethodReport r;
        r.name = name;
        r.duration = planned.trajectory.total_duration();
        for (size_t k = 1; k < planned.samples.size(); ++k) {
            const double jump = std::abs(planned.samples[k].state.omega.norm() -
                                         planned.samples[k - 1].state.omega.norm());
            r.max_turn_rate_jump = std::max(r.max_turn_rate_jump, jump);
            if (jump > jump_threshold) {
                ++r.discontinuities;
            }
        }
        report.methods.push_back(r);

        detail::CsvWriter csv(out_dir / (name + "_trace.csv"),
                              {"t", "px", "py", "pz", "speed", "omega_norm"});
        for (size_t k = 0; k < planned.samples.size(); ++k) {
            const auto &s = planned.samples[k];
            csv.row({planned.sample_times[k], s.state.p.x(), s.state.p.y(), s.state.p.z(),
                     s.state.v.norm(), s.state.omega.norm()});
        }
    };
    report_plan(plan(scenario.planning_problem(), scenario.vehicle, model), "proposed");
    {
        TimeAllocProblem direct = scenario.planning_problem();
        direct.waypoints.clear();
        report_plan(plan(direct, scenario.vehicle, model), "proposed_direct");
    }

    const auto heading = [](const Eigen::Vector3d &v, double fallback) {
        return v.head<2>().norm() > 1e-9 ? std::atan2(v.y(), v.x()) : fallback;
    };
    const PlanarPose start_pose(scenario.start.position.x(), scenario.start.position.y(),
                                heading(scenario.start.velocity, 0.0));
    const PlanarPose goal_pose(scenario.goal.position.x(), scenario.goal.position.y(),
                               heading(scenario.goal.velocity, 0.0));

    // L1 over the waypoint polyline.
    {
        std::vector<Eigen::Vector2d> poly;
        poly.emplace_back(start_pose.x, start_pose.y);
        for (const auto &w : scenario.waypoints) poly.emplace_back(w.x(), w.y());
        poly.emplace_back(goal_pose.x, goal_pose.y);
        L1Config cfg;
        cfg.lookahead = scenario.baselines.l1_lookahead;
        cfg.accept_radius = scenario.baselines.accept_radius;
        const PlanarTrace trace =
            follow_l1(poly, start_pose, speed, cfg, sim_dt, scenario.sim_duration_cap);
        CompareMethodReport r;
        r.name = "l1_guidance";
        r.duration = trace.duration;
        r.finished = trace.finished;
        r.discontinuities = trace.discontinuities(jump_threshold);
        r.max_turn_rate_jump = trace.max_psi_dot_jump();
        report.methods.push_back(r);

        detail::CsvWriter csv(out_dir / "l1_trace.csv", {"t", "x", "y", "psi", "psi_dot"});
        for (const auto &p : trace.points) {
            csv.row({p.t, p.pose.x, p.pose.y, p.pose.psi, p.psi_dot});
        }
    }

    // Dubins between the boundary poses only.
    {
        const DubinsPath path =
            dubins_shortest(start_pose, goal_pose, scenario.baselines.turn_radius);
        const PlanarTrace trace = follow_dubins(path, speed, sim_dt);
        CompareMethodReport r;
        r.name = "dubins";
        r.duration = trace.duration;
        r.finished = true;
        r.discontinuities = trace.discontinuities(jump_threshold);
        r.max_turn_rate_jump = trace.max_psi_dot_jump();
        report.methods.push_back(r);

        detail::CsvWriter csv(out_dir / "dubins_trace.csv", {"t", "x", "y", "psi", "psi_dot"});
        for (const auto &p : trace.points) {
            csv.row({p.t, p.pose.x, p.pose.y, p.pose.psi, p.psi_dot});
        }
    }

    nlohmann::json j;
    j["speed_cap"] = report.speed_cap;
    j["turn_radius"] = scenario.baselines.turn_radius;
    for (const auto &r : report.methods) {
        j["methods"][r.name] = {{"duration", r.duration},
                                {"discontinuities", r.discontinuities},
                                {"max_turn_rate_jump", r.max_turn_rate_jump},
                                {"finished", r.finished}};
    }
    std::ofstream out(report.report_json);
    out << j.dump(2) << "\n";
    return report;
}

} // namespace tailsitter

#endif
