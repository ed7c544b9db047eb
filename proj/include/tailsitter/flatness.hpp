#ifndef TAILSITTER_FLATNESS_HPP
#define TAILSITTER_FLATNESS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tailsitter/aero.hpp"
#include "tailsitter/dynamics.hpp"
#include "tailsitter/errors.hpp"
#include "tailsitter/math.hpp"

namespace tailsitter {

// Flat output (position) derivatives up to 4th order plus the wind and its
// first two derivatives, all in the world frame.
struct FlatSample {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
    Eigen::Vector3d acceleration = Eigen::Vector3d::Zero();
    Eigen::Vector3d jerk = Eigen::Vector3d::Zero();
    Eigen::Vector3d snap = Eigen::Vector3d::Zero();
    Eigen::Vector3d wind = Eigen::Vector3d::Zero();
    Eigen::Vector3d wind_rate = Eigen::Vector3d::Zero();
    Eigen::Vector3d wind_accel = Eigen::Vector3d::Zero();
};

struct AlphaSolveInfo {
    double alpha = 0.0;
    double residual = 0.0;
    int iterations = 0;
    bool stall = false; // no aero root found near the guess
};

struct FlatnessResult {
    VehicleState state;
    FullInput input;
    double thrust_accel = 0.0;      // a_T = f/m
    double thrust_accel_rate = 0.0; // d a_T / dt
    Eigen::Vector3d omega_dot = Eigen::Vector3d::Zero();
    double alpha = 0.0;
    double gamma = 0.0;
    double h = 0.0; // normalized specific-force coefficient
    int sign_r = 1;
    Eigen::Vector3d y_b = Eigen::Vector3d::UnitY();
    double balance_residual = 0.0; // z-axis force balance check
    AlphaSolveInfo alpha_info;
    bool hover_branch = false;
    // Axis-aligned flight leaves rotation about the thrust axis free; the
    // sweep then takes the least-norm rate solution.
    bool rate_fallback = false;

    // Intermediate quantities reused by the tracking controller.
    AirflowState airflow;
    AeroCoefficients coeffs;
    Eigen::Vector3d aero_force = Eigen::Vector3d::Zero(); // body frame, N
    Eigen::Matrix3d force_jacobian = Eigen::Matrix3d::Zero(); // d f_a / d v_a^B
};

// Maps flat-output samples to full states and inputs under coordinated
// flight. Stateful: the lateral-axis sign and the incidence root are
// tracked along the trajectory, so samples must be fed in time order.
class FlatnessMap {
public:
    static constexpr double kAlphaTol = 1e-10;
    static constexpr int kMaxNewtonIters = 50;
    static constexpr double kBracketHalfWidth = kPi / 6.0; // 30 deg

    FlatnessMap(VehicleParams params, const AeroModel &model)
        : params_(std::move(params)), model_(&model) {}

    // Hover start: lateral axis along world y, incidence guess at 90 deg.
    void reset(const Eigen::Vector3d &y_b0 = Eigen::Vector3d::UnitY(),
               double alpha0 = 0.5 * kPi) {
        y_prev_ = y_b0.normalized();
        alpha_prev_ = alpha0;
    }

    // r keeps the lateral axis on the same side as the previous sample;
    // a degenerate cross product falls back to the previous axis.
    static std::pair<Eigen::Vector3d, int> lateral_axis(const Eigen::Vector3d &v_a,
                                                        const Eigen::Vector3d &a_minus_g,
                                                        const Eigen::Vector3d &y_b_prev) {
        const Eigen::Vector3d cross = v_a.cross(a_minus_g);
        const double n = cross.norm();
        if (n < 1e-9) {
            return {y_b_prev, 1};
        }
        const int r = cross.dot(y_b_prev) >= 0.0 ? 1 : -1;
        return {static_cast<double>(r) * cross / n, r};
    }

    // Newton iteration on F(a) = h sin(gamma - a) + Cz(a, 0).
    AlphaSolveInfo solve_alpha(double h, double gamma, double alpha_guess) const {
        AlphaSolveInfo info;
        double a = alpha_guess;
        for (int it = 0; it < kMaxNewtonIters; ++it) {
            const auto [f, df] = f_and_df(h, gamma, a);
            info.iterations = it + 1;
            if (std::abs(f) < kAlphaTol) {
                info.alpha = a;
                info.residual = std::abs(f);
                return info;
            }
            if (std::abs(df) < 1e-12) {
                throw ConvergenceError("incidence solve stalled on a flat slope");
            }
            a -= f / df;
        }
        throw ConvergenceError("incidence solve exceeded the iteration budget");
    }

    FlatnessResult flat_to_state(const FlatSample &s) {
        FlatnessResult res;
        const Eigen::Vector3d v_a = s.velocity - s.wind;
        const double V = v_a.norm();
        const Eigen::Vector3d a_mg = s.acceleration - params_.gravity;

        res.state.p = s.position;
        res.state.v = s.velocity;

        if (V < kSpeedEps) {
            hover_state(s, a_mg, res);
            return res;
        }

        auto [y_b, r] = lateral_axis(v_a, a_mg, y_prev_);
        res.y_b = y_b;
        res.sign_r = r;
        res.gamma = static_cast<double>(r) *
                    std::atan2(a_mg.cross(v_a).norm(), a_mg.dot(v_a));
        res.h = 2.0 * params_.mass * a_mg.norm() /
                (params_.air_density * V * V * params_.wing_area);

        res.alpha_info = solve_alpha_robust(res.h, res.gamma, alpha_prev_);
        res.alpha = res.alpha_info.alpha;

        const Eigen::Vector3d v_hat = v_a / V;
        const Eigen::Vector3d x_b =
            v_hat * std::cos(res.alpha) + y_b.cross(v_hat) * std::sin(res.alpha);
        const Eigen::Vector3d z_b = x_b.cross(y_b);
        res.state.R.col(0) = x_b;
        res.state.R.col(1) = y_b;
        res.state.R.col(2) = z_b;

        res.airflow.wind = s.wind;
        res.airflow.airspeed_world = v_a;
        res.airflow.airspeed_body = res.state.R.transpose() * v_a;
        res.airflow.speed = V;
        res.airflow.alpha = res.alpha;
        res.airflow.beta = 0.0;

        res.coeffs = model_->coefficients(wrap_pi(res.alpha), 0.0);
        res.aero_force = aero_force_body(res.airflow, params_, res.coeffs);
        res.force_jacobian = dfa_dvab(res.airflow, params_, res.coeffs);

        res.thrust_accel = x_b.dot(a_mg) - res.aero_force.x() / params_.mass;
        res.input.thrust = params_.mass * res.thrust_accel;
        res.balance_residual = std::abs(z_b.dot(a_mg) - res.aero_force.z() / params_.mass);

        y_prev_ = y_b;
        alpha_prev_ = res.alpha;
        return res;
    }

    // Body rate and thrust-acceleration rate from the 4x4 linear system
    // built from the jerk equation and the zero-sideslip constraint rate.
    void flat_to_rates(const FlatSample &s, FlatnessResult &res,
                       bool least_norm_fallback = false) const {
        if (res.hover_branch) {
            return; // static hover: omega stays zero
        }
        const Eigen::Vector3d va_dot = s.acceleration - s.wind_rate;
        const Eigen::Matrix3d &R = res.state.R;
        const Eigen::Matrix3d B = rate_block(res);

        Eigen::Matrix4d N;
        N(0, 0) = 0.0;
        N.block<1, 3>(0, 1) =
            res.airflow.airspeed_body.transpose() * skew(Eigen::Vector3d::UnitY());
        N.block<3, 1>(1, 0) = R.col(0);
        N.block<3, 3>(1, 1) = R * B;

        Eigen::Vector4d rhs;
        rhs(0) = res.y_b.dot(va_dot);
        rhs.tail<3>() = s.jerk - R * (res.force_jacobian * (R.transpose() * va_dot)) / params_.mass;

        const Eigen::Vector4d w = solve_rate_system(N, rhs, least_norm_fallback, res);
        res.thrust_accel_rate = w(0);
        res.state.omega = w.tail<3>();
    }

    // Differentiates the rate system to obtain omega_dot, then the torque
    // from the rotational dynamics.
    void flat_to_torque(const FlatSample &s, FlatnessResult &res,
                        bool least_norm_fallback = false) const {
        const Eigen::Matrix3d J = params_.inertia;
        if (res.hover_branch) {
            res.omega_dot.setZero();
            res.input.torque = -aero_moment_body(res.airflow, params_, res.coeffs) +
                               res.state.omega.cross(J * res.state.omega);
            return;
        }
        const Eigen::Matrix3d &R = res.state.R;
        const Eigen::Vector3d &omega = res.state.omega;
        const Eigen::Matrix3d wx = skew(omega);
        const Eigen::Vector3d e1 = Eigen::Vector3d::UnitX();
        const Eigen::Vector3d e2 = Eigen::Vector3d::UnitY();
        const Eigen::Matrix3d e2x = skew(e2);

        const Eigen::Vector3d v_a = res.airflow.airspeed_world;
        const Eigen::Vector3d vb = res.airflow.airspeed_body;
        const double V = res.airflow.speed;
        const Eigen::Vector3d va_dot = s.acceleration - s.wind_rate;
        const Eigen::Vector3d va_ddot = s.jerk - s.wind_accel;
        const Eigen::Vector3d vb_dot = -wx * vb + R.transpose() * va_dot;

        const double V_dot = v_a.dot(va_dot) / V;
        const double alpha_dot =
            (vb_dot.z() * vb.x() - vb.z() * vb_dot.x()) / (vb.x() * vb.x() + vb.z() * vb.z());

        const double rs2 = 0.5 * params_.air_density * params_.wing_area;
        const Eigen::Vector3d C = res.coeffs.force();
        const Eigen::Vector3d &Ca = res.coeffs.dC_dalpha;
        const Eigen::Vector3d &Cb = res.coeffs.dC_dbeta;
        const Eigen::Vector3d &Caa = res.coeffs.d2C_dalpha2;
        const Eigen::Vector3d &Cba = res.coeffs.d2C_dbeta_dalpha;

        const Eigen::Matrix3d &Jfa = res.force_jacobian;
        const Eigen::Matrix3d Jfa_dot =
            rs2 * (2.0 * (Ca * alpha_dot * vb.transpose() + C * vb_dot.transpose()) +
                   (Caa * alpha_dot * vb.transpose() + Ca * vb_dot.transpose()) * e2x +
                   (V_dot * Cb + V * Cba * alpha_dot) * e2.transpose());

        const Eigen::Vector3d dfa_dV = params_.air_density * V * params_.wing_area * C;
        const Eigen::Vector3d dfa_dalpha = rs2 * V * V * Ca;

        const Eigen::Matrix3d B = rate_block(res);
        const Eigen::Matrix3d B_dot =
            -skew(res.thrust_accel_rate * e1 +
                  (dfa_dV * V_dot + dfa_dalpha * alpha_dot) / params_.mass) +
            (Jfa_dot * skew(vb) + Jfa * skew(vb_dot)) / params_.mass;

        Eigen::Matrix4d N, N_dot;
        N(0, 0) = 0.0;
        N.block<1, 3>(0, 1) = vb.transpose() * e2x;
        N.block<3, 1>(1, 0) = R.col(0);
        N.block<3, 3>(1, 1) = R * B;

        N_dot(0, 0) = 0.0;
        N_dot.block<1, 3>(0, 1) =
            (va_dot.transpose() * R + v_a.transpose() * R * wx) * e2x;
        N_dot.block<3, 1>(1, 0) = R * wx * e1;
        N_dot.block<3, 3>(1, 1) = R * wx * B + R * B_dot;

        Eigen::Vector4d h_dot;
        h_dot(0) = e2.dot(-wx * (R.transpose() * va_dot) + R.transpose() * va_ddot);
        h_dot.tail<3>() =
            s.snap - R *
                         (wx * (Jfa * (R.transpose() * va_dot)) +
                          Jfa_dot * (R.transpose() * va_dot) -
                          Jfa * (wx * (R.transpose() * va_dot)) +
                          Jfa * (R.transpose() * va_ddot)) /
                         params_.mass;

        Eigen::Vector4d current;
        current << res.thrust_accel_rate, omega;
        const Eigen::Vector4d w =
            solve_rate_system(N, h_dot - N_dot * current, least_norm_fallback, res);
        res.omega_dot = w.tail<3>();

        const Eigen::Vector3d M_a = aero_moment_body(res.airflow, params_, res.coeffs);
        res.input.torque = J * res.omega_dot - M_a + omega.cross(J * omega);
    }

    FlatnessResult transform(const FlatSample &s) {
        FlatnessResult res = flat_to_state(s);
        flat_to_rates(s, res, true);
        flat_to_torque(s, res, true);
        return res;
    }

    const Eigen::Vector3d &lateral_memory() const { return y_prev_; }
    double alpha_memory() const { return alpha_prev_; }

private:
    std::pair<double, double> f_and_df(double h, double gamma, double a) const {
        const AeroCoefficients c = model_->coefficients(wrap_pi(a), 0.0);
        const double f = h * std::sin(gamma - a) + c.Cz;
        const double df = -h * std::cos(gamma - a) + c.dC_dalpha.z();
        return {f, df};
    }

    // Newton from the warm start, then a bisection bracket around it, then
    // the same two stages seeded at the large-h asymptotic root gamma.
    AlphaSolveInfo solve_alpha_robust(double h, double gamma, double guess) const {
        for (const double seed : {guess, gamma}) {
            try {
                return solve_alpha(h, gamma, seed);
            } catch (const ConvergenceError &) {
            }
            if (auto info = bisect_bracket(h, gamma, seed)) {
                return *info;
            }
        }
        // Stall: no root reachable; report the best effort and flag it.
        AlphaSolveInfo info;
        info.stall = true;
        double best_f = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= 64; ++i) {
            const double a = guess - kBracketHalfWidth +
                             2.0 * kBracketHalfWidth * static_cast<double>(i) / 64.0;
            const double f = std::abs(f_and_df(h, gamma, a).first);
            if (f < best_f) {
                best_f = f;
                info.alpha = a;
            }
        }
        info.residual = best_f;
        return info;
    }

    std::optional<AlphaSolveInfo> bisect_bracket(double h, double gamma, double center) const {
        constexpr int kScan = 64;
        double lo = center - kBracketHalfWidth;
        double f_lo = f_and_df(h, gamma, lo).first;
        for (int i = 1; i <= kScan; ++i) {
            const double hi = center - kBracketHalfWidth +
                              2.0 * kBracketHalfWidth * static_cast<double>(i) / kScan;
            const double f_hi = f_and_df(h, gamma, hi).first;
            if (f_lo * f_hi <= 0.0 && std::isfinite(f_lo) && std::isfinite(f_hi)) {
                double a = lo, b = hi, fa = f_lo;
                AlphaSolveInfo info;
                for (int it = 0; it < 100; ++it) {
                    const double mid = 0.5 * (a + b);
                    const double fm = f_and_df(h, gamma, mid).first;
                    info.iterations = it + 1;
                    if (std::abs(fm) < kAlphaTol || 0.5 * (b - a) < 1e-15) {
                        info.alpha = mid;
                        info.residual = std::abs(fm);
                        return info;
                    }
                    if (fa * fm <= 0.0) {
                        b = mid;
                    } else {
                        a = mid;
                        fa = fm;
                    }
                }
                info.alpha = 0.5 * (a + b);
                info.residual = std::abs(f_and_df(h, gamma, info.alpha).first);
                return info;
            }
            lo = hi;
            f_lo = f_hi;
        }
        return std::nullopt;
    }

    // Direct solve with a conditioning monitor. With the fallback enabled
    // a near-null direction is truncated instead (least-norm solution).
    static Eigen::Vector4d solve_rate_system(const Eigen::Matrix4d &N, const Eigen::Vector4d &rhs,
                                             bool least_norm_fallback, FlatnessResult &res) {
        Eigen::JacobiSVD<Eigen::Matrix4d> svd(N, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const auto &sv = svd.singularValues();
        const double cond = sv(0) / sv(3);
        if (std::isfinite(cond) && cond <= 1e12) {
            return svd.solve(rhs);
        }
        if (!least_norm_fallback) {
            throw NearSingularityError("rate system is near singular");
        }
        res.rate_fallback = true;
        Eigen::Vector4d w = Eigen::Vector4d::Zero();
        for (int i = 0; i < 4; ++i) {
            if (sv(i) > 1e-10 * sv(0)) {
                w += svd.matrixV().col(i) * (svd.matrixU().col(i).dot(rhs) / sv(i));
            }
        }
        return w;
    }

    // Shared coefficient block of the rate system in body axes.
    Eigen::Matrix3d rate_block(const FlatnessResult &res) const {
        const Eigen::Vector3d e1 = Eigen::Vector3d::UnitX();
        return -skew(res.thrust_accel * e1 + res.aero_force / params_.mass) +
               (res.force_jacobian * skew(res.airflow.airspeed_body)) / params_.mass;
    }

    void hover_state(const FlatSample &s, const Eigen::Vector3d &a_mg, FlatnessResult &res) {
        res.hover_branch = true;
        const double n = a_mg.norm();
        const Eigen::Vector3d x_b = n > 1e-9 ? (a_mg / n).eval() : -params_.gravity.normalized();
        Eigen::Vector3d y_b = y_prev_ - y_prev_.dot(x_b) * x_b;
        if (y_b.norm() < 1e-9) {
            y_b = x_b.cross(Eigen::Vector3d::UnitX());
        }
        y_b.normalize();
        res.y_b = y_b;
        res.state.R.col(0) = x_b;
        res.state.R.col(1) = y_b;
        res.state.R.col(2) = x_b.cross(y_b);
        res.thrust_accel = n;
        res.input.thrust = params_.mass * n;
        res.alpha = alpha_prev_;
        res.gamma = alpha_prev_;
        res.h = std::numeric_limits<double>::infinity();
        res.airflow = airflow_from_state(res.state, s.wind);
        res.coeffs = model_->coefficients(wrap_pi(res.alpha), 0.0);
        y_prev_ = y_b;
    }

    VehicleParams params_;
    const AeroModel *model_;
    Eigen::Vector3d y_prev_ = Eigen::Vector3d::UnitY();
    double alpha_prev_ = 0.5 * kPi;
};

} // namespace tailsitter

#endif
