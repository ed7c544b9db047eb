#ifndef TAILSITTER_MPC_HPP
#define TAILSITTER_MPC_HPP

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "tailsitter/aero.hpp"
#include "tailsitter/dynamics.hpp"
#include "tailsitter/errors.hpp"
#include "tailsitter/flatness.hpp"
#include "tailsitter/math.hpp"

namespace tailsitter {

using Vector9d = Eigen::Matrix<double, 9, 1>;
using Matrix9d = Eigen::Matrix<double, 9, 9>;

// Stacked error (dp, dv, dR) with dR = Log(R^T R_r).
struct ErrorState {
    Eigen::Vector3d dp = Eigen::Vector3d::Zero();
    Eigen::Vector3d dv = Eigen::Vector3d::Zero();
    Eigen::Vector3d dR = Eigen::Vector3d::Zero();

    Vector9d stacked() const {
        Vector9d x;
        x << dp, dv, dR;
        return x;
    }
    static ErrorState from_stacked(const Vector9d &x) {
        ErrorState e;
        e.dp = x.segment<3>(0);
        e.dv = x.segment<3>(3);
        e.dR = x.segment<3>(6);
        return e;
    }
};

// One reference sample with the aero terms the error model linearizes
// around. Thrust is carried as acceleration (f / m).
struct MpcReferencePoint {
    Eigen::Vector3d p = Eigen::Vector3d::Zero();
    Eigen::Vector3d v = Eigen::Vector3d::Zero();
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    double thrust_accel = 0.0;
    Eigen::Vector3d omega = Eigen::Vector3d::Zero();
    Eigen::Vector3d airspeed_world = Eigen::Vector3d::Zero();
    Eigen::Vector3d aero_force = Eigen::Vector3d::Zero();       // body, N
    Eigen::Matrix3d force_jacobian = Eigen::Matrix3d::Zero();   // d f_a / d v_a^B

    static MpcReferencePoint from_flatness(const FlatnessResult &r) {
        MpcReferencePoint out;
        out.p = r.state.p;
        out.v = r.state.v;
        out.R = r.state.R;
        out.thrust_accel = r.thrust_accel;
        out.omega = r.state.omega;
        out.airspeed_world = r.airflow.airspeed_world;
        out.aero_force = r.aero_force;
        out.force_jacobian = r.force_jacobian;
        return out;
    }
};

// Frozen actual-state quantities the error model and its Jacobians are
// evaluated with. dR/domega give the linearization point.
struct ErrorOperatingPoint {
    Eigen::Vector3d omega = Eigen::Vector3d::Zero();            // actual body rate
    double thrust_accel = 0.0;                                  // actual a_T
    Eigen::Vector3d aero_force = Eigen::Vector3d::Zero();       // actual f_a, body
    Eigen::Vector3d airspeed_world = Eigen::Vector3d::Zero();   // actual v_a
    Eigen::Vector3d dR = Eigen::Vector3d::Zero();
    Eigen::Vector3d domega = Eigen::Vector3d::Zero();

    static ErrorOperatingPoint at_reference(const MpcReferencePoint &ref) {
        ErrorOperatingPoint ctx;
        ctx.omega = ref.omega;
        ctx.thrust_accel = ref.thrust_accel;
        ctx.aero_force = ref.aero_force;
        ctx.airspeed_world = ref.airspeed_world;
        return ctx;
    }
};

// Error dynamics expanded to second order around the reference, with the
// actual-state context held fixed. Input error du = (d a_T, d omega).
inline Vector9d error_dynamics(const Vector9d &dx, const Eigen::Vector4d &du,
                               const Eigen::Vector3d &dw, const MpcReferencePoint &ref,
                               const ErrorOperatingPoint &ctx, const VehicleParams &params) {
    const Eigen::Vector3d dp_dot = dx.segment<3>(3);
    const Eigen::Vector3d dR_vec = dx.segment<3>(6);
    const Eigen::Vector3d domega = du.tail<3>();
    const double da_T = du(0);
    const double m = params.mass;

    const Eigen::Vector3d dva = dx.segment<3>(3) - dw;
    const Eigen::Vector3d dvab =
        ref.R.transpose() * dva + skew(ref.R.transpose() * ctx.airspeed_world) * dR_vec;
    const Eigen::Vector3d dfa = ref.force_jacobian * dvab;

    const Eigen::Vector3d dv_dot =
        da_T * ref.R.col(0) - ctx.thrust_accel * ref.R * skew(Eigen::Vector3d::UnitX()) * dR_vec +
        ref.R * dfa / m - ref.R * skew(ctx.aero_force) * dR_vec / m;

    const Eigen::Matrix3d dRx = skew(dR_vec);
    const Eigen::Vector3d dR_dot = (Eigen::Matrix3d::Identity() + 0.5 * dRx) * domega -
                                   skew(ctx.omega) * dR_vec + 0.5 * dRx * dRx * ctx.omega;

    Vector9d out;
    out << dp_dot, dv_dot, dR_dot;
    return out;
}

struct ErrorJacobians {
    Matrix9d Fx;
    Eigen::Matrix<double, 9, 4> Fu;
    Eigen::Matrix<double, 9, 3> Fw;
};

// d(skew(dR)^2 w)/d(dR), closed form.
inline Eigen::Matrix3d k_matrix(const Eigen::Vector3d &dR, const Eigen::Vector3d &w) {
    return dR.dot(w) * Eigen::Matrix3d::Identity() + dR * w.transpose() -
           2.0 * w * dR.transpose();
}

inline ErrorJacobians jacobians(const MpcReferencePoint &ref, const ErrorOperatingPoint &ctx,
                                const VehicleParams &params) {
    const double m = params.mass;
    ErrorJacobians J;
    J.Fx.setZero();
    J.Fu.setZero();
    J.Fw.setZero();

    J.Fx.block<3, 3>(0, 3).setIdentity();
    const Eigen::Matrix3d dv_dv = ref.R * ref.force_jacobian * ref.R.transpose() / m;
    J.Fx.block<3, 3>(3, 3) = dv_dv;
    J.Fx.block<3, 3>(3, 6) =
        ref.R * (-ctx.thrust_accel * skew(Eigen::Vector3d::UnitX()) -
                 skew(ctx.aero_force) / m +
                 ref.force_jacobian * skew(ref.R.transpose() * ctx.airspeed_world) / m);
    J.Fx.block<3, 3>(6, 6) = -skew(ctx.omega) - 0.5 * skew(ctx.domega) +
                             0.5 * k_matrix(ctx.dR, ctx.omega);

    J.Fu.block<3, 1>(3, 0) = ref.R.col(0);
    J.Fu.block<3, 3>(6, 1) = Eigen::Matrix3d::Identity() + 0.5 * skew(ctx.dR);

    J.Fw.block<3, 3>(3, 0) = -dv_dv;
    return J;
}

struct AlmParams {
    double initial_penalty = 10.0;
    double growth = 10.0;
    double tolerance = 1e-6;
    int max_outer = 20;
    int max_inner = 100;
};

struct BoxQpResult {
    Eigen::VectorXd z;
    bool converged = false;
    int outer_iterations = 0;
    double violation = 0.0;
    double inner_grad_norm = 0.0;
};

// min 1/2 z^T H z + q^T z  s.t.  lb <= z <= ub, solved by an augmented
// Lagrangian on the bound constraints with a semismooth Newton inner loop.
inline BoxQpResult solve_box_qp_alm(const Eigen::MatrixXd &H, const Eigen::VectorXd &q,
                                    const Eigen::VectorXd &lb, const Eigen::VectorXd &ub,
                                    const AlmParams &p = {}) {
    const Eigen::Index n = q.size();
    Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd mu_hi = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd mu_lo = Eigen::VectorXd::Zero(n);
    double rho = p.initial_penalty;

    BoxQpResult res;
    double prev_violation = std::numeric_limits<double>::infinity();

    for (int outer = 0; outer < p.max_outer; ++outer) {
        res.outer_iterations = outer + 1;

        for (int inner = 0; inner < p.max_inner; ++inner) {
            const Eigen::VectorXd hi_act = (mu_hi + rho * (z - ub)).cwiseMax(0.0);
            const Eigen::VectorXd lo_act = (mu_lo + rho * (lb - z)).cwiseMax(0.0);
            const Eigen::VectorXd grad = H * z + q + hi_act - lo_act;
            res.inner_grad_norm = grad.lpNorm<Eigen::Infinity>();
            if (res.inner_grad_norm <= p.tolerance) {
                break;
            }
            Eigen::MatrixXd Hess = H;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (hi_act(i) > 0.0 || lo_act(i) > 0.0) {
                    Hess(i, i) += rho;
                }
            }
            z += Hess.ldlt().solve(-grad);
        }

        const Eigen::VectorXd viol_hi = (z - ub).cwiseMax(0.0);
        const Eigen::VectorXd viol_lo = (lb - z).cwiseMax(0.0);
        res.violation = std::max(viol_hi.lpNorm<Eigen::Infinity>(),
                                 viol_lo.lpNorm<Eigen::Infinity>());
        if (res.violation <= p.tolerance && res.inner_grad_norm <= p.tolerance) {
            res.converged = true;
            break;
        }
        mu_hi = (mu_hi + rho * (z - ub)).cwiseMax(0.0);
        mu_lo = (mu_lo + rho * (lb - z)).cwiseMax(0.0);
        if (res.violation > 0.25 * prev_violation) {
            rho *= p.growth;
        }
        prev_violation = res.violation;
    }
    res.z = z;
    return res;
}

struct MpcConfig {
    int horizon = 10;
    double dt = 0.1;
    Vector9d state_weights = (Vector9d() << 100, 100, 100, 10, 10, 10, 50, 50, 50).finished();
    Eigen::Vector4d input_weights{1.0, 10.0, 10.0, 10.0}; // (a_T, omega)
    Eigen::Vector4d u_min{0.0, -6.0, -6.0, -3.0};         // (a_T m/s^2, omega rad/s)
    Eigen::Vector4d u_max{25.0, 6.0, 6.0, 3.0};
    AlmParams alm;

    void validate() const {
        if (horizon < 1) throw ValidationError("mpc.horizon", "must be >= 1");
        if (!(dt > 0.0)) throw ValidationError("mpc.dt", "must be > 0");
        if ((state_weights.array() <= 0.0).any()) {
            throw ValidationError("mpc.state_weights", "must be positive");
        }
        if ((input_weights.array() <= 0.0).any()) {
            throw ValidationError("mpc.input_weights", "must be positive");
        }
        if (((u_max - u_min).array() <= 0.0).any()) {
            throw ValidationError("mpc.input_bounds", "u_min must be below u_max");
        }
    }

    static MpcConfig for_vehicle(const VehicleParams &params) {
        MpcConfig cfg;
        cfg.u_min << params.thrust_min / params.mass, -params.omega_max;
        cfg.u_max << params.thrust_max / params.mass, params.omega_max;
        return cfg;
    }
};

struct MpcSolution {
    double thrust = 0.0;               // N
    Eigen::Vector3d omega_cmd = Eigen::Vector3d::Zero();
    Eigen::VectorXd du;                // stacked input errors over the horizon
    bool converged = false;
    int outer_iterations = 0;
    double violation = 0.0;
    bool reference_clamped = false;    // reference input outside the bounds
};

// Receding-horizon tracker on the error state. The horizon is linearized
// at the reference (zero-error context), discretized forward-Euler, and
// condensed to a box-constrained QP in the input errors.
class MpcTracker {
public:
    MpcTracker(MpcConfig cfg, VehicleParams params)
        : cfg_(std::move(cfg)), params_(std::move(params)) {
        cfg_.validate();
        params_.validate();
    }

    const MpcConfig &config() const { return cfg_; }

    MpcSolution solve(const VehicleState &x_now,
                      const std::vector<MpcReferencePoint> &window,
                      const std::vector<Eigen::Vector3d> *wind_errors = nullptr) const {
        const int N = cfg_.horizon;
        if (static_cast<int>(window.size()) < N + 1) {
            throw DomainError("reference window must hold horizon+1 samples");
        }

        ErrorState e0;
        e0.dp = window[0].p - x_now.p;
        e0.dv = window[0].v - x_now.v;
        e0.dR = so3_log(x_now.R.transpose() * window[0].R);
        const Vector9d dx0 = e0.stacked();

        // Condensed prediction: X = Adx0 + B U + c.
        const int nu = 4 * N;
        Eigen::MatrixXd Bbar = Eigen::MatrixXd::Zero(9 * N, nu);
        Eigen::MatrixXd Abar = Eigen::MatrixXd::Zero(9 * N, 9);
        Eigen::VectorXd cbar = Eigen::VectorXd::Zero(9 * N);

        for (int k = 0; k < N; ++k) {
            const auto ctx = ErrorOperatingPoint::at_reference(window[static_cast<size_t>(k)]);
            const ErrorJacobians J = jacobians(window[static_cast<size_t>(k)], ctx, params_);
            const Matrix9d Ak = Matrix9d::Identity() + cfg_.dt * J.Fx;
            const Eigen::Matrix<double, 9, 4> Bk = cfg_.dt * J.Fu;
            Eigen::Matrix<double, 9, 1> ck = Eigen::Matrix<double, 9, 1>::Zero();
            if (wind_errors) {
                ck = cfg_.dt * J.Fw * (*wind_errors)[static_cast<size_t>(k)];
            }

            if (k == 0) {
                Abar.block<9, 9>(0, 0) = Ak;
                Bbar.block<9, 4>(0, 0) = Bk;
                cbar.segment<9>(0) = ck;
            } else {
                Abar.block<9, 9>(9 * k, 0) = Ak * Abar.block<9, 9>(9 * (k - 1), 0);
                Bbar.block(9 * k, 0, 9, 4 * k) = Ak * Bbar.block(9 * (k - 1), 0, 9, 4 * k);
                Bbar.block<9, 4>(9 * k, 4 * k) = Bk;
                cbar.segment<9>(9 * k) = Ak * cbar.segment<9>(9 * (k - 1)) + ck;
            }
        }

        // Quadratic cost over predicted errors plus input-error effort.
        Eigen::MatrixXd H = Eigen::MatrixXd::Zero(nu, nu);
        Eigen::VectorXd q = Eigen::VectorXd::Zero(nu);
        const Eigen::VectorXd x_free = Abar * dx0 + cbar;
        for (int k = 0; k < N; ++k) {
            const auto Qk = cfg_.state_weights.asDiagonal();
            const auto rows = Bbar.middleRows<9>(9 * k);
            H += rows.transpose() * Qk * rows;
            q += rows.transpose() * (Qk * x_free.segment<9>(9 * k));
        }
        for (int k = 0; k < N; ++k) {
            H.block<4, 4>(4 * k, 4 * k) += Eigen::Matrix4d(cfg_.input_weights.asDiagonal());
        }

        // Box constraints: u_min <= u_r - du <= u_max.
        Eigen::VectorXd lb(nu), ub(nu);
        bool clamped = false;
        for (int k = 0; k < N; ++k) {
            Eigen::Vector4d ur;
            ur << window[static_cast<size_t>(k)].thrust_accel,
                window[static_cast<size_t>(k)].omega;
            lb.segment<4>(4 * k) = ur - cfg_.u_max;
            ub.segment<4>(4 * k) = ur - cfg_.u_min;
            if (((ur - cfg_.u_max).array() > 1e-9).any() ||
                ((cfg_.u_min - ur).array() > 1e-9).any()) {
                clamped = true;
            }
        }

        const BoxQpResult qp = solve_box_qp_alm(H, q, lb, ub, cfg_.alm);

        MpcSolution sol;
        sol.du = qp.z;
        sol.converged = qp.converged;
        sol.outer_iterations = qp.outer_iterations;
        sol.violation = qp.violation;
        sol.reference_clamped = clamped;

        Eigen::Vector4d ur0;
        ur0 << window[0].thrust_accel, window[0].omega;
        Eigen::Vector4d u = ur0 - qp.z.head<4>();
        u = u.cwiseMax(cfg_.u_min).cwiseMin(cfg_.u_max);
        sol.thrust = params_.mass * u(0);
        sol.omega_cmd = u.tail<3>();
        return sol;
    }

private:
    MpcConfig cfg_;
    VehicleParams params_;
};

} // namespace tailsitter

#endif
