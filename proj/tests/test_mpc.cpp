#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "support/cases.hpp"
#include "support/oracles.hpp"
#include "tailsitter/mpc.hpp"
#include "tailsitter/time_opt.hpp"

using namespace tailsitter;

namespace {

const VehicleParams params;
const AnalyticAeroModel aero;

MpcReferencePoint level_reference(double V) {
    FlatnessMap map(params, aero);
    map.reset();
    FlatSample s;
    s.velocity = Eigen::Vector3d(V, 0, 0);
    return MpcReferencePoint::from_flatness(map.transform(s));
}

ErrorOperatingPoint random_context(std::mt19937 &rng, const MpcReferencePoint &ref) {
    std::normal_distribution<double> n(0.0, 1.0);
    ErrorOperatingPoint ctx = ErrorOperatingPoint::at_reference(ref);
    ctx.dR = 0.2 * Eigen::Vector3d(n(rng), n(rng), n(rng));
    ctx.domega = 0.3 * Eigen::Vector3d(n(rng), n(rng), n(rng));
    ctx.omega = ref.omega - ctx.domega;
    ctx.thrust_accel = ref.thrust_accel - 0.5 * n(rng);
    ctx.aero_force = ref.aero_force + 0.1 * Eigen::Vector3d(n(rng), n(rng), n(rng));
    ctx.airspeed_world = ref.airspeed_world + 0.4 * Eigen::Vector3d(n(rng), n(rng), n(rng));
    return ctx;
}

} // namespace

TEST_CASE("error dynamics fixed point") {
    const MpcReferencePoint ref = level_reference(9.0);
    const ErrorOperatingPoint ctx = ErrorOperatingPoint::at_reference(ref);
    const Vector9d rate = error_dynamics(Vector9d::Zero(), Eigen::Vector4d::Zero(),
                                         Eigen::Vector3d::Zero(), ref, ctx, params);
    REQUIRE(rate.norm() < 1e-14);
}

TEST_CASE("position error does not feed forces") {
    const MpcReferencePoint ref = level_reference(9.0);
    const ErrorOperatingPoint ctx = ErrorOperatingPoint::at_reference(ref);
    Vector9d dx = Vector9d::Zero();
    dx.segment<3>(0) = Eigen::Vector3d(3, -2, 1);
    const Vector9d rate = error_dynamics(dx, Eigen::Vector4d::Zero(),
                                         Eigen::Vector3d::Zero(), ref, ctx, params);
    REQUIRE(rate.segment<3>(3).norm() < 1e-14);
    REQUIRE(rate.segment<3>(6).norm() < 1e-14);
}

TEST_CASE("jacobians match finite differences of the error dynamics") {
    std::mt19937 rng(51);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const double V = 4.0 + 8.0 * std::abs(n(rng));
        const MpcReferencePoint ref = level_reference(std::min(V, 14.0));
        const ErrorOperatingPoint ctx = random_context(rng, ref);

        Vector9d dx0;
        dx0 << 0.5 * n(rng), 0.5 * n(rng), 0.5 * n(rng), 0.3 * n(rng), 0.3 * n(rng),
            0.3 * n(rng), ctx.dR;
        Eigen::Vector4d du0;
        du0 << ref.thrust_accel - ctx.thrust_accel, ctx.domega;
        const Eigen::Vector3d dw0(0.2 * n(rng), 0.2 * n(rng), 0.2 * n(rng));

        const ErrorJacobians J = jacobians(ref, ctx, params);

        auto fx = [&](const Eigen::VectorXd &dx) {
            return Eigen::VectorXd(
                error_dynamics(dx, du0, dw0, ref, ctx, params));
        };
        const Eigen::MatrixXd Fx_fd = oracles::central_diff_jacobian(fx, dx0, 1e-6);
        REQUIRE((J.Fx - Fx_fd).norm() < 1e-4 * std::max(1.0, Fx_fd.norm()));

        auto fu = [&](const Eigen::VectorXd &du) {
            return Eigen::VectorXd(
                error_dynamics(dx0, du, dw0, ref, ctx, params));
        };
        const Eigen::MatrixXd Fu_fd = oracles::central_diff_jacobian(fu, du0, 1e-6);
        REQUIRE((J.Fu - Fu_fd).norm() < 1e-4 * std::max(1.0, Fu_fd.norm()));

        auto fw = [&](const Eigen::VectorXd &dw) {
            return Eigen::VectorXd(
                error_dynamics(dx0, du0, dw, ref, ctx, params));
        };
        const Eigen::MatrixXd Fw_fd = oracles::central_diff_jacobian(fw, dw0, 1e-6);
        REQUIRE((J.Fw - Fw_fd).norm() < 1e-4 * std::max(1.0, Fw_fd.norm()));
    }
}

TEST_CASE("jacobian structure at the reference") {
    const MpcReferencePoint ref = level_reference(10.0);
    const ErrorOperatingPoint ctx = ErrorOperatingPoint::at_reference(ref);
    const ErrorJacobians J = jacobians(ref, ctx, params);
    REQUIRE((J.Fx.block<3, 3>(6, 6) + skew(ctx.omega)).norm() < 1e-14);
    Eigen::Matrix<double, 9, 1> thrust_col = J.Fu.col(0);
    REQUIRE(thrust_col.segment<3>(0).norm() == 0.0);
    REQUIRE((thrust_col.segment<3>(3) - ref.R.col(0)).norm() < 1e-15);
    REQUIRE(thrust_col.segment<3>(6).norm() == 0.0);
}

TEST_CASE("error model approximates paired nonlinear simulations") {
    const MpcReferencePoint ref0 = level_reference(10.0);

    // Reference and perturbed reduced-model runs under identical inputs.
    auto input = [&](double) { return std::make_pair(ref0.thrust_accel, ref0.omega); };
    oracles::ReducedState r{Eigen::Vector3d::Zero(), ref0.v, ref0.R};
    oracles::ReducedState x = r;
    const double eps = 1e-4;
    x.p += eps * Eigen::Vector3d(1, -1, 2).normalized();
    x.v += eps * Eigen::Vector3d(0.5, 1, -0.3).normalized();
    x.R = x.R * so3_exp(eps * Eigen::Vector3d(0.3, 0.5, -0.2));

    auto error_of = [&](const oracles::ReducedState &ref, const oracles::ReducedState &act) {
        Vector9d e;
        e << ref.p - act.p, ref.v - act.v, so3_log(act.R.transpose() * ref.R);
        return e;
    };

    const double h = 1e-5;
    const Vector9d e0 = error_of(r, x);
    const auto rp = oracles::reduced_rk4(r, input, 0.0, h, params, aero,
                                         Eigen::Vector3d::Zero());
    const auto xp = oracles::reduced_rk4(x, input, 0.0, h, params, aero,
                                         Eigen::Vector3d::Zero());
    const Vector9d fd = (error_of(rp, xp) - e0) / h;

    // Context from the actual (perturbed) state.
    ErrorOperatingPoint ctx = ErrorOperatingPoint::at_reference(ref0);
    ctx.dR = e0.segment<3>(6);
    AirflowState airflow;
    airflow.airspeed_world = x.v;
    airflow.airspeed_body = x.R.transpose() * x.v;
    airflow.speed = x.v.norm();
    airflow.alpha = std::atan2(airflow.airspeed_body.z(), airflow.airspeed_body.x());
    airflow.beta = std::asin(airflow.airspeed_body.y() / airflow.speed);
    ctx.aero_force = aero_force_body(airflow, params, aero);
    ctx.airspeed_world = x.v;

    const Vector9d model = error_dynamics(e0, Eigen::Vector4d::Zero(),
                                          Eigen::Vector3d::Zero(), ref0, ctx, params);
    REQUIRE((model - fd).norm() < 1e-4);
}

TEST_CASE("attitude error rate identity") {
    // d/dt Log(R^T Rr) computed by finite differences along simulated
    // rotations matches the closed-form map.
    std::mt19937 rng(52);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Matrix3d R = oracles::random_rotation(rng, 2.5);
        const Eigen::Matrix3d Rr = R * oracles::random_rotation(rng, 1.0);
        const Eigen::Vector3d omega = oracles::random_unit(rng) * 0.8;
        const Eigen::Vector3d omega_r = oracles::random_unit(rng) * 0.8;

        const double h = 1e-6;
        auto at = [&](double t) {
            const Eigen::Matrix3d Rt = R * so3_exp(t * omega);
            const Eigen::Matrix3d Rrt = Rr * so3_exp(t * omega_r);
            return so3_log(Rt.transpose() * Rrt);
        };
        const Eigen::Vector3d fd = (at(h) - at(-h)) / (2.0 * h);
        const Eigen::Vector3d dR = at(0.0);
        const Eigen::Vector3d formula =
            so3_a_inv_t(dR) * (-Rr.transpose() * R * omega + omega_r);
        REQUIRE((fd - formula).norm() < 1e-5 * std::max(1.0, formula.norm()));
    }
}

TEST_CASE("box qp solver") {
    std::mt19937 rng(53);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int m = 8;
        Eigen::MatrixXd A(m, m);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) A(i, j) = n(rng);
        }
        const Eigen::MatrixXd H = A.transpose() * A + Eigen::MatrixXd::Identity(m, m);
        Eigen::VectorXd q(m), lb(m), ub(m);
        for (int i = 0; i < m; ++i) {
            q(i) = 2.0 * n(rng);
            lb(i) = -0.4;
            ub(i) = 0.4;
        }
        const auto res = solve_box_qp_alm(H, q, lb, ub);
        REQUIRE(res.converged);
        // KKT: projected gradient vanishes
        const Eigen::VectorXd g = H * res.z + q;
        for (int i = 0; i < m; ++i) {
            REQUIRE(res.z(i) >= lb(i) - 1e-6);
            REQUIRE(res.z(i) <= ub(i) + 1e-6);
            if (res.z(i) > lb(i) + 1e-5 && res.z(i) < ub(i) - 1e-5) {
                REQUIRE(std::abs(g(i)) < 1e-5);
            } else if (res.z(i) <= lb(i) + 1e-5) {
                REQUIRE(g(i) > -1e-5);
            } else {
                REQUIRE(g(i) < 1e-5);
            }
        }
    }
}

namespace {

std::vector<MpcReferencePoint> hover_window(int n) {
    FlatnessMap map(params, aero);
    map.reset();
    FlatSample s; // strict hover
    const FlatnessResult r = map.transform(s);
    return std::vector<MpcReferencePoint>(static_cast<size_t>(n),
                                          MpcReferencePoint::from_flatness(r));
}

} // namespace

TEST_CASE("mpc on-reference solution is the reference input") {
    const MpcConfig cfg = MpcConfig::for_vehicle(params);
    MpcTracker tracker(cfg, params);
    const auto window = hover_window(cfg.horizon + 1);
    VehicleState x;
    x.R = window[0].R;
    x.v = window[0].v;
    x.p = window[0].p;
    const MpcSolution sol = tracker.solve(x, window);
    REQUIRE(sol.converged);
    REQUIRE(sol.du.lpNorm<Eigen::Infinity>() < 1e-8);
    REQUIRE(sol.thrust == Catch::Approx(params.mass * window[0].thrust_accel).margin(1e-6));
    REQUIRE(sol.omega_cmd.norm() < 1e-8);
}

TEST_CASE("mpc matches a dense KKT oracle when bounds are inactive") {
    MpcConfig cfg = MpcConfig::for_vehicle(params);
    cfg.horizon = 6;
    cfg.u_min << -1e6, -1e6, -1e6, -1e6;
    cfg.u_max << 1e6, 1e6, 1e6, 1e6;
    MpcTracker tracker(cfg, params);

    const MpcReferencePoint ref = level_reference(10.0);
    std::vector<MpcReferencePoint> window(static_cast<size_t>(cfg.horizon) + 1, ref);

    VehicleState x;
    x.p = ref.p - Eigen::Vector3d(0.4, -0.3, 0.2);
    x.v = ref.v + Eigen::Vector3d(0.2, 0.1, -0.15);
    x.R = ref.R * so3_exp(Eigen::Vector3d(0.05, -0.08, 0.04));
    const MpcSolution sol = tracker.solve(x, window);

    // Dense KKT on the uncondensed problem: variables (dx_1..dx_N, du_0..du_{N-1}).
    const int N = cfg.horizon;
    const int nx = 9 * N, nu = 4 * N, nc = 9 * N;
    Eigen::MatrixXd Hd = Eigen::MatrixXd::Zero(nx + nu, nx + nu);
    for (int k = 0; k < N; ++k) {
        Hd.block<9, 9>(9 * k, 9 * k) = 2.0 * Eigen::Matrix<double, 9, 9>(
            cfg.state_weights.asDiagonal());
        Hd.block<4, 4>(nx + 4 * k, nx + 4 * k) =
            2.0 * Eigen::Matrix4d(cfg.input_weights.asDiagonal());
    }
    Vector9d dx0;
    dx0 << ref.p - x.p, ref.v - x.v, so3_log(x.R.transpose() * ref.R);
    const auto ctx = ErrorOperatingPoint::at_reference(ref);
    const ErrorJacobians J = jacobians(ref, ctx, params);
    const Matrix9d A = Matrix9d::Identity() + cfg.dt * J.Fx;
    const Eigen::Matrix<double, 9, 4> B = cfg.dt * J.Fu;

    // Constraint rows: -dx_{k+1} + A dx_k + B du_k = e_k with e_0 = -A dx0.
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(nc, nx + nu);
    Eigen::VectorXd e = Eigen::VectorXd::Zero(nc);
    for (int k = 0; k < N; ++k) {
        C.block<9, 9>(9 * k, 9 * k) = -Matrix9d::Identity();
        C.block<9, 4>(9 * k, nx + 4 * k) = B;
        if (k == 0) {
            e.segment<9>(0) = -(A * dx0);
        } else {
            C.block<9, 9>(9 * k, 9 * (k - 1)) = A;
        }
    }
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nx + nu + nc, nx + nu + nc);
    kkt.topLeftCorner(nx + nu, nx + nu) = Hd;
    kkt.topRightCorner(nx + nu, nc) = C.transpose();
    kkt.bottomLeftCorner(nc, nx + nu) = C;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nx + nu + nc);
    rhs.tail(nc) = e;
    const Eigen::VectorXd sol_kkt = Eigen::FullPivLU<Eigen::MatrixXd>(kkt).solve(rhs);
    const Eigen::VectorXd du_oracle = sol_kkt.segment(nx, nu);

    REQUIRE((sol.du - du_oracle).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("out-of-bounds reference raises the clamp warning") {
    MpcConfig cfg = MpcConfig::for_vehicle(params);
    MpcTracker tracker(cfg, params);
    auto window = hover_window(cfg.horizon + 1);
    for (auto &ref : window) {
        ref.thrust_accel = cfg.u_max(0) + 5.0; // unreachable thrust demand
    }
    VehicleState x;
    x.R = window[0].R;
    const MpcSolution sol = tracker.solve(x, window);
    REQUIRE(sol.reference_clamped);
    REQUIRE(sol.thrust <= params.thrust_max + 1e-9);
}

TEST_CASE("hover offset recovery") {
    MpcConfig cfg = MpcConfig::for_vehicle(params);
    MpcTracker tracker(cfg, params);
    const auto window = hover_window(cfg.horizon + 1);

    VehicleState state;
    state.R = window[0].R;
    state.p = Eigen::Vector3d(0.5, 0.0, 0.0); // half-metre offset

    RatePid pid(RatePidConfig::defaults(params));
    const double dt = 1e-3;
    const int mpc_stride = static_cast<int>(std::lround(cfg.dt / dt));
    double f_cmd = params.mass * 9.8;
    Eigen::Vector3d omega_cmd = Eigen::Vector3d::Zero();
    AirflowState prev = airflow_from_state(state, Eigen::Vector3d::Zero());

    double t_recovered = -1.0;
    for (int step = 0; step < 5000; ++step) {
        if (step % mpc_stride == 0) {
            const MpcSolution sol = tracker.solve(state, window);
            f_cmd = sol.thrust;
            omega_cmd = sol.omega_cmd;
            REQUIRE(f_cmd >= params.thrust_min - 1e-9);
            REQUIRE(f_cmd <= params.thrust_max + 1e-9);
        }
        const AirflowState airflow = airflow_from_state(state, Eigen::Vector3d::Zero(), &prev);
        const Eigen::Vector3d ma = aero_moment_body(airflow, params, aero);
        const Eigen::Vector3d gyro = state.omega.cross(params.inertia * state.omega);
        const Eigen::Vector3d tau = pid.torque(omega_cmd, state.omega, ma, gyro, dt);
        state = step_rk4(state, {f_cmd, tau}, Eigen::Vector3d::Zero(), dt, params, aero, &prev);
        prev = airflow;
        if (t_recovered < 0.0 && state.p.norm() < 0.05) {
            t_recovered = (step + 1) * dt;
        }
    }
    REQUIRE(t_recovered > 0.0);
    REQUIRE(t_recovered < 5.0);
    REQUIRE(state.p.norm() < 0.05);
}
