#ifndef TAILSITTER_SCENARIO_HPP
#define TAILSITTER_SCENARIO_HPP

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tailsitter/aero.hpp"
#include "tailsitter/errors.hpp"
#include "tailsitter/minco.hpp"
#include "tailsitter/mpc.hpp"
#include "tailsitter/time_opt.hpp"

namespace tailsitter {

struct GustInterval {
    double start = 0.0;
    double end = 0.0;
    Eigen::Vector3d wind = Eigen::Vector3d::Zero();
};

struct WindProfile {
    Eigen::Vector3d constant = Eigen::Vector3d::Zero();
    std::vector<GustInterval> gusts;

    Eigen::Vector3d at(double t) const {
        Eigen::Vector3d w = constant;
        for (const auto &g : gusts) {
            if (t >= g.start && t < g.end) {
                w += g.wind;
            }
        }
        return w;
    }
};

struct BaselineConfig {
    bool enabled = false;
    double turn_radius = 8.0;
    double l1_lookahead = 10.0;
    double accept_radius = 2.0;
    std::optional<double> speed; // defaults to the plan's v_max
};

struct Scenario {
    VehicleParams vehicle;
    std::optional<std::string> coefficient_table; // CSV path; analytic when absent
    AnalyticAeroConfig analytic;
    BoundaryCondition start;
    BoundaryCondition goal;
    std::vector<Eigen::Vector3d> waypoints;
    OptimizerConfig plan;
    MpcConfig mpc;
    bool mpc_explicit_bounds = false;
    WindProfile wind;     // actual wind seen by the simulator
    Eigen::Vector3d planner_wind = Eigen::Vector3d::Zero();
    double sim_dt = 1e-3;
    double sim_duration_cap = 60.0;
    BaselineConfig baselines;
    std::string name = "scenario";

    TimeAllocProblem planning_problem() const {
        TimeAllocProblem p;
        p.start = start;
        p.goal = goal;
        p.waypoints = waypoints;
        p.wind = planner_wind;
        p.config = plan;
        return p;
    }
};

namespace detail {

inline Eigen::Vector3d parse_vec3(const nlohmann::json &j, const std::string &field) {
    if (!j.is_array() || j.size() != 3) {
        throw ValidationError(field, "expected an array of 3 numbers");
    }
    for (const auto &v : j) {
        if (!v.is_number()) throw ValidationError(field, "expected numeric entries");
    }
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline BoundaryCondition parse_boundary(const nlohmann::json &j, const std::string &field) {
    BoundaryCondition b;
    if (!j.contains("position")) throw ValidationError(field + ".position", "required");
    b.position = parse_vec3(j.at("position"), field + ".position");
    if (j.contains("velocity")) b.velocity = parse_vec3(j.at("velocity"), field + ".velocity");
    if (j.contains("acceleration")) {
        b.acceleration = parse_vec3(j.at("acceleration"), field + ".acceleration");
    }
    if (j.contains("jerk")) b.jerk = parse_vec3(j.at("jerk"), field + ".jerk");
    return b;
}

} // namespace detail

inline Scenario parse_scenario(const nlohmann::json &j) {
    Scenario s;
    if (j.contains("name")) s.name = j.at("name").get<std::string>();

    if (j.contains("vehicle")) {
        const auto &v = j.at("vehicle");
        if (v.contains("mass")) s.vehicle.mass = v.at("mass").get<double>();
        if (v.contains("inertia")) {
            s.vehicle.inertia =
                detail::parse_vec3(v.at("inertia"), "vehicle.inertia").asDiagonal();
        }
        if (v.contains("wing_area")) s.vehicle.wing_area = v.at("wing_area").get<double>();
        if (v.contains("chord")) s.vehicle.chord = v.at("chord").get<double>();
        if (v.contains("span")) s.vehicle.span = v.at("span").get<double>();
        if (v.contains("air_density")) s.vehicle.air_density = v.at("air_density").get<double>();
        if (v.contains("thrust_min")) s.vehicle.thrust_min = v.at("thrust_min").get<double>();
        if (v.contains("thrust_max")) s.vehicle.thrust_max = v.at("thrust_max").get<double>();
        if (v.contains("omega_max")) {
            s.vehicle.omega_max = detail::parse_vec3(v.at("omega_max"), "vehicle.omega_max");
        }
        if (v.contains("coefficient_table")) {
            s.coefficient_table = v.at("coefficient_table").get<std::string>();
        }
        if (v.contains("aero")) {
            const auto &a = v.at("aero");
            if (a.contains("cd0")) s.analytic.cd0 = a.at("cd0").get<double>();
            if (a.contains("cd90")) s.analytic.cd90 = a.at("cd90").get<double>();
            if (a.contains("lift_slope")) s.analytic.lift_slope = a.at("lift_slope").get<double>();
            if (a.contains("cy_beta")) s.analytic.cy_beta = a.at("cy_beta").get<double>();
            if (a.contains("cm_scale")) s.analytic.cm_scale = a.at("cm_scale").get<double>();
        }
    }
    s.vehicle.validate();

    if (!j.contains("start")) throw ValidationError("start", "required");
    if (!j.contains("goal")) throw ValidationError("goal", "required");
    s.start = detail::parse_boundary(j.at("start"), "start");
    s.goal = detail::parse_boundary(j.at("goal"), "goal");

    if (j.contains("waypoints")) {
        size_t idx = 0;
        for (const auto &w : j.at("waypoints")) {
            s.waypoints.push_back(
                detail::parse_vec3(w, "waypoints[" + std::to_string(idx) + "]"));
            ++idx;
        }
    }

    if (!j.contains("plan")) throw ValidationError("plan", "required");
    const auto &p = j.at("plan");
    if (!p.contains("v_max")) throw ValidationError("plan.v_max", "required");
    s.plan.v_max = p.at("v_max").get<double>();
    if (p.contains("time_weight")) {
        const auto &b = p.at("time_weight");
        if (b.is_number()) {
            s.plan.time_weights.resize(1);
            s.plan.time_weights(0) = b.get<double>();
        } else {
            s.plan.time_weights.resize(static_cast<Eigen::Index>(b.size()));
            for (Eigen::Index i = 0; i < s.plan.time_weights.size(); ++i) {
                s.plan.time_weights(i) = b.at(static_cast<size_t>(i)).get<double>();
            }
        }
    }
    if (p.contains("penalty_weight")) s.plan.penalty_weight = p.at("penalty_weight").get<double>();
    if (p.contains("samples_per_segment")) {
        s.plan.samples_per_segment = p.at("samples_per_segment").get<int>();
    }
    if (p.contains("max_iterations")) s.plan.max_iterations = p.at("max_iterations").get<int>();
    if (p.contains("snap_weight")) s.plan.snap_weight = p.at("snap_weight").get<double>();
    if (p.contains("output_rate")) s.plan.output_rate = p.at("output_rate").get<double>();
    s.plan.validate();

    s.mpc = MpcConfig::for_vehicle(s.vehicle);
    if (j.contains("mpc")) {
        const auto &m = j.at("mpc");
        if (m.contains("horizon")) s.mpc.horizon = m.at("horizon").get<int>();
        if (m.contains("dt")) s.mpc.dt = m.at("dt").get<double>();
        if (m.contains("q_position")) {
            s.mpc.state_weights.segment<3>(0).setConstant(m.at("q_position").get<double>());
        }
        if (m.contains("q_velocity")) {
            s.mpc.state_weights.segment<3>(3).setConstant(m.at("q_velocity").get<double>());
        }
        if (m.contains("q_attitude")) {
            s.mpc.state_weights.segment<3>(6).setConstant(m.at("q_attitude").get<double>());
        }
        if (m.contains("p_thrust")) s.mpc.input_weights(0) = m.at("p_thrust").get<double>();
        if (m.contains("p_rate")) {
            s.mpc.input_weights.tail<3>().setConstant(m.at("p_rate").get<double>());
        }
        s.mpc.validate();
    }

    if (j.contains("wind")) {
        const auto &w = j.at("wind");
        if (w.contains("constant")) {
            s.wind.constant = detail::parse_vec3(w.at("constant"), "wind.constant");
        }
        if (w.contains("gusts")) {
            for (const auto &g : w.at("gusts")) {
                GustInterval gi;
                gi.start = g.at("start").get<double>();
                gi.end = g.at("end").get<double>();
                gi.wind = detail::parse_vec3(g.at("vector"), "wind.gusts.vector");
                s.wind.gusts.push_back(gi);
            }
        }
        // The planner sees the constant component unless told otherwise.
        s.planner_wind = s.wind.constant;
        if (w.contains("planner_constant")) {
            s.planner_wind = detail::parse_vec3(w.at("planner_constant"), "wind.planner_constant");
        }
    }

    if (j.contains("sim")) {
        const auto &sim = j.at("sim");
        if (sim.contains("dt")) s.sim_dt = sim.at("dt").get<double>();
        if (sim.contains("duration_cap")) s.sim_duration_cap = sim.at("duration_cap").get<double>();
        if (!(s.sim_dt > 0.0)) throw ValidationError("sim.dt", "must be > 0");
        if (!(s.sim_duration_cap > 0.0)) throw ValidationError("sim.duration_cap", "must be > 0");
    }

    if (j.contains("baselines")) {
        const auto &b = j.at("baselines");
        s.baselines.enabled = b.value("enabled", true);
        if (b.contains("turn_radius")) s.baselines.turn_radius = b.at("turn_radius").get<double>();
        if (b.contains("l1_lookahead")) {
            s.baselines.l1_lookahead = b.at("l1_lookahead").get<double>();
        }
        if (b.contains("accept_radius")) {
            s.baselines.accept_radius = b.at("accept_radius").get<double>();
        }
        if (b.contains("speed")) s.baselines.speed = b.at("speed").get<double>();
        if (!(s.baselines.turn_radius > 0.0)) {
            throw ValidationError("baselines.turn_radius", "must be > 0");
        }
    }
    return s;
}

inline Scenario load_scenario(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("scenario", "cannot open " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception &e) {
        throw ValidationError("scenario", std::string("invalid JSON: ") + e.what());
    }
    Scenario s = parse_scenario(j);
    if (s.coefficient_table) {
        // Resolve relative to the scenario file.
        const std::filesystem::path t = *s.coefficient_table;
        if (t.is_relative()) {
            s.coefficient_table = (path.parent_path() / t).string();
        }
        if (!std::filesystem::exists(*s.coefficient_table)) {
            throw ValidationError("vehicle.coefficient_table",
                                  "file not found: " + *s.coefficient_table);
        }
    }
    return s;
}

inline std::unique_ptr<AeroModel> make_aero_model(const Scenario &s,
                                                  std::vector<std::string> *warnings = nullptr) {
    if (s.coefficient_table) {
        std::ifstream in(*s.coefficient_table);
        if (!in) {
            throw ValidationError("vehicle.coefficient_table",
                                  "cannot open " + *s.coefficient_table);
        }
        return std::make_unique<TableAeroModel>(load_coefficient_table(in, warnings));
    }
    return std::make_unique<AnalyticAeroModel>(s.analytic);
}

} // namespace tailsitter

#endif
