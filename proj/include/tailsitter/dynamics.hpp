#ifndef TAILSITTER_DYNAMICS_HPP
#define TAILSITTER_DYNAMICS_HPP

#include <Eigen/Dense>
#include <cmath>

#include "tailsitter/aero.hpp"
#include "tailsitter/errors.hpp"
#include "tailsitter/math.hpp"

namespace tailsitter {

struct VehicleState {
    Eigen::Vector3d p = Eigen::Vector3d::Zero();       // m, world (NED)
    Eigen::Vector3d v = Eigen::Vector3d::Zero();       // m/s, world
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();   // body -> world
    Eigen::Vector3d omega = Eigen::Vector3d::Zero();   // rad/s, body

    bool finite() const {
        return p.allFinite() && v.allFinite() && R.allFinite() && omega.allFinite();
    }
};

struct FullInput {
    double thrust = 0.0;                                // N, along body x
    Eigen::Vector3d torque = Eigen::Vector3d::Zero();   // N m, body
};

struct StateDerivative {
    Eigen::Vector3d p_dot, v_dot;
    Eigen::Matrix3d R_dot;
    Eigen::Vector3d omega_dot;
};

// Full nonlinear rigid-body dynamics with the aero model evaluated at the
// current relative airflow. Previous-airflow carry-over keeps alpha/beta
// defined through near-zero airspeed.
inline StateDerivative derivative(const VehicleState &state, const FullInput &input,
                                  const Eigen::Vector3d &wind, const VehicleParams &params,
                                  const AeroModel &model,
                                  const AirflowState *previous_airflow = nullptr) {
    const AirflowState airflow = airflow_from_state(state, wind, previous_airflow);
    const AeroCoefficients coeffs = model.coefficients(airflow.alpha, airflow.beta);
    const Eigen::Vector3d fa = aero_force_body(airflow, params, coeffs);
    const Eigen::Vector3d ma = aero_moment_body(airflow, params, coeffs);

    StateDerivative d;
    d.p_dot = state.v;
    d.v_dot = params.gravity +
              (input.thrust * state.R.col(0) + state.R * fa) / params.mass;
    d.R_dot = state.R * skew(state.omega);
    d.omega_dot = params.inertia.ldlt().solve(
        input.torque + ma - state.omega.cross(params.inertia * state.omega));
    return d;
}

// Classic fixed-step RK4; the rotation block is integrated chart-free and
// projected back onto SO(3) by its polar factor afterwards.
inline VehicleState step_rk4(const VehicleState &state, const FullInput &input,
                             const Eigen::Vector3d &wind, double dt, const VehicleParams &params,
                             const AeroModel &model,
                             const AirflowState *previous_airflow = nullptr) {
    if (!(dt > 0.0)) {
        throw DomainError("integrator step must be positive");
    }
    auto advance = [&](const VehicleState &s, const StateDerivative &k, double h) {
        VehicleState out;
        out.p = s.p + h * k.p_dot;
        out.v = s.v + h * k.v_dot;
        out.R = s.R + h * k.R_dot;
        out.omega = s.omega + h * k.omega_dot;
        return out;
    };

    const StateDerivative k1 = derivative(state, input, wind, params, model, previous_airflow);
    const StateDerivative k2 =
        derivative(advance(state, k1, 0.5 * dt), input, wind, params, model, previous_airflow);
    const StateDerivative k3 =
        derivative(advance(state, k2, 0.5 * dt), input, wind, params, model, previous_airflow);
    const StateDerivative k4 =
        derivative(advance(state, k3, dt), input, wind, params, model, previous_airflow);

    VehicleState next;
    next.p = state.p + dt / 6.0 * (k1.p_dot + 2.0 * k2.p_dot + 2.0 * k3.p_dot + k4.p_dot);
    next.v = state.v + dt / 6.0 * (k1.v_dot + 2.0 * k2.v_dot + 2.0 * k3.v_dot + k4.v_dot);
    next.R = orthonormalize(state.R +
                            dt / 6.0 * (k1.R_dot + 2.0 * k2.R_dot + 2.0 * k3.R_dot + k4.R_dot));
    next.omega =
        state.omega + dt / 6.0 * (k1.omega_dot + 2.0 * k2.omega_dot + 2.0 * k3.omega_dot +
                                  k4.omega_dot);
    if (!next.finite()) {
        throw DivergenceError("simulator state became non-finite");
    }
    return next;
}

struct RatePidConfig {
    Eigen::Vector3d kp;
    Eigen::Vector3d ki = Eigen::Vector3d::Zero();
    Eigen::Vector3d kd = Eigen::Vector3d::Zero();
    double integrator_limit = 1.0;
    bool feedforward = true;

    // Default gains scale with inertia so each axis closes at the same rate.
    static RatePidConfig defaults(const VehicleParams &params) {
        RatePidConfig cfg;
        cfg.kp = 0.3 / 0.05 * params.inertia.diagonal();
        return cfg;
    }
};

// Three decoupled body-rate PID loops. The gyroscopic torque and the aero
// moment enter as feed-forward so the PID only sees the commanded error.
class RatePid {
public:
    explicit RatePid(RatePidConfig cfg) : cfg_(std::move(cfg)) {}

    Eigen::Vector3d torque(const Eigen::Vector3d &omega_cmd, const Eigen::Vector3d &omega,
                           const Eigen::Vector3d &aero_moment, const Eigen::Vector3d &gyro_torque,
                           double dt) {
        if (!(dt > 0.0)) {
            throw DomainError("rate PID step must be positive");
        }
        const Eigen::Vector3d err = omega_cmd - omega;
        integral_ += err * dt;
        integral_ = integral_.cwiseMax(-cfg_.integrator_limit).cwiseMin(cfg_.integrator_limit);
        Eigen::Vector3d deriv = Eigen::Vector3d::Zero();
        if (has_prev_) {
            deriv = (err - prev_err_) / dt;
        }
        prev_err_ = err;
        has_prev_ = true;

        Eigen::Vector3d tau = cfg_.kp.cwiseProduct(err) + cfg_.ki.cwiseProduct(integral_) +
                              cfg_.kd.cwiseProduct(deriv);
        if (cfg_.feedforward) {
            tau += -aero_moment + gyro_torque;
        }
        return tau;
    }

    void reset() {
        integral_.setZero();
        prev_err_.setZero();
        has_prev_ = false;
    }

private:
    RatePidConfig cfg_;
    Eigen::Vector3d integral_ = Eigen::Vector3d::Zero();
    Eigen::Vector3d prev_err_ = Eigen::Vector3d::Zero();
    bool has_prev_ = false;
};

} // namespace tailsitter

#endif
