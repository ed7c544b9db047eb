#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "support/oracles.hpp"
#include "tailsitter/dynamics.hpp"

using namespace tailsitter;

namespace {

const VehicleParams params;
const AnalyticAeroModel aero;

// All-zero coefficients; isolates the rigid-body terms.
struct ZeroAeroModel final : AeroModel {
    AeroCoefficients coefficients(double, double) const override { return {}; }
};
const ZeroAeroModel vacuum;

Eigen::Matrix3d nose_up_attitude() {
    // body x points world-up (-z in NED)
    Eigen::Matrix3d R;
    R.col(0) = Eigen::Vector3d(0, 0, -1);
    R.col(1) = Eigen::Vector3d(0, 1, 0);
    R.col(2) = Eigen::Vector3d(1, 0, 0);
    return R;
}

} // namespace

TEST_CASE("derivative equilibria") {
    SECTION("hover thrust cancels gravity") {
        VehicleState s;
        s.R = nose_up_attitude();
        FullInput u;
        u.thrust = params.mass * 9.8;
        const auto d = derivative(s, u, Eigen::Vector3d::Zero(), params, aero);
        REQUIRE(d.v_dot.norm() < 1e-12);
        REQUIRE(d.p_dot.norm() < 1e-12);
    }
    SECTION("free fall") {
        VehicleState s;
        const auto d = derivative(s, {}, Eigen::Vector3d::Zero(), params, aero);
        REQUIRE((d.v_dot - params.gravity).norm() < 1e-12);
    }
    SECTION("principal-axis spin has no gyroscopic torque") {
        VehicleState s;
        s.omega = Eigen::Vector3d(1, 0, 0);
        const auto d = derivative(s, {}, Eigen::Vector3d::Zero(), params, vacuum);
        REQUIRE(d.omega_dot.norm() < 1e-12);
    }
}

TEST_CASE("rk4 integration") {
    SECTION("hover persists") {
        VehicleState s;
        s.R = nose_up_attitude();
        FullInput u;
        u.thrust = params.mass * 9.8;
        const Eigen::Vector3d p0 = s.p;
        for (int i = 0; i < 1000; ++i) {
            s = step_rk4(s, u, Eigen::Vector3d::Zero(), 1e-3, params, aero);
        }
        REQUIRE((s.p - p0).norm() < 1e-6);
    }
    SECTION("ballistic drop closed form") {
        VehicleState s;
        for (int i = 0; i < 1000; ++i) {
            s = step_rk4(s, {}, Eigen::Vector3d::Zero(), 1e-3, params, vacuum);
        }
        REQUIRE(s.p.z() == Catch::Approx(0.5 * 9.8).margin(1e-9));
    }
    SECTION("step order: halving dt cuts global error ~16x") {
        // torque strong enough that truncation dominates roundoff
        auto run = [&](double dt) {
            VehicleState s;
            s.v = Eigen::Vector3d(5, 0, 0);
            FullInput u;
            u.thrust = 8.0;
            u.torque = Eigen::Vector3d(0.2, -0.15, 0.1);
            const int steps = static_cast<int>(std::lround(1.0 / dt));
            for (int i = 0; i < steps; ++i) {
                s = step_rk4(s, u, Eigen::Vector3d::Zero(), dt, params, vacuum);
            }
            return s;
        };
        const VehicleState ref = run(1e-4);
        auto err = [&](double dt) {
            const VehicleState s = run(dt);
            return (s.p - ref.p).norm() + (s.v - ref.v).norm() +
                   (s.omega - ref.omega).norm();
        };
        const double ratio = err(2e-2) / err(1e-2);
        REQUIRE(ratio > 8.0);
        REQUIRE(ratio < 40.0);
    }
    SECTION("invalid step size") {
        VehicleState s;
        REQUIRE_THROWS_AS(step_rk4(s, {}, Eigen::Vector3d::Zero(), 0.0, params, aero),
                          DomainError);
    }
    SECTION("non-finite states raise divergence") {
        VehicleState s;
        s.v = Eigen::Vector3d::Constant(std::numeric_limits<double>::quiet_NaN());
        REQUIRE_THROWS_AS(step_rk4(s, {}, Eigen::Vector3d::Zero(), 1e-3, params, vacuum),
                          DivergenceError);
    }
}

TEST_CASE("energy bookkeeping without inputs") {
    VehicleState s;
    s.v = Eigen::Vector3d(3, -1, 2);
    s.omega = Eigen::Vector3d(0.4, 0.8, -0.2);
    auto energy = [&](const VehicleState &st) {
        // NED: gravity potential decreases with +z
        return 0.5 * params.mass * st.v.squaredNorm() -
               params.mass * 9.8 * st.p.z() +
               0.5 * st.omega.dot(params.inertia * st.omega);
    };
    const double e0 = energy(s);
    for (int i = 0; i < 2000; ++i) {
        s = step_rk4(s, {}, Eigen::Vector3d::Zero(), 1e-3, params, vacuum);
    }
    REQUIRE(std::abs(energy(s) - e0) < 1e-5 * std::abs(e0));
}

TEST_CASE("rotation stays orthonormal over a long run") {
    VehicleState s;
    s.v = Eigen::Vector3d(6, 0, -1);
    FullInput u;
    u.thrust = 10.0;
    u.torque = Eigen::Vector3d(0.01, 0.02, -0.01);
    double worst = 0.0;
    for (int i = 0; i < 60000; ++i) {
        s = step_rk4(s, u, Eigen::Vector3d::Zero(), 1e-3, params, aero);
        if (i % 100 == 0) {
            worst = std::max(worst,
                             (s.R.transpose() * s.R - Eigen::Matrix3d::Identity()).norm());
        }
        if (s.v.norm() > 60.0) {
            u.thrust = 0.0; // keep the state bounded; only orthonormality matters
        }
    }
    REQUIRE(worst < 1e-9);
}

TEST_CASE("rate pid") {
    const RatePidConfig cfg = RatePidConfig::defaults(params);

    SECTION("pure feed-forward at zero error") {
        RatePid pid(cfg);
        const Eigen::Vector3d omega(0.5, -0.2, 0.1);
        const Eigen::Vector3d ma(0.1, 0.2, 0.3);
        const Eigen::Vector3d gyro = omega.cross(params.inertia * omega);
        const Eigen::Vector3d tau = pid.torque(omega, omega, ma, gyro, 1e-3);
        REQUIRE((tau - (-ma + gyro)).norm() < 1e-12);
    }
    SECTION("axes are decoupled") {
        RatePid pid(cfg);
        const Eigen::Vector3d tau = pid.torque(Eigen::Vector3d(0.5, 0, 0),
                                               Eigen::Vector3d::Zero(),
                                               Eigen::Vector3d::Zero(),
                                               Eigen::Vector3d::Zero(), 1e-3);
        REQUIRE(tau.y() == Catch::Approx(0.0).margin(1e-15));
        REQUIRE(tau.z() == Catch::Approx(0.0).margin(1e-15));
        REQUIRE(tau.x() > 0.0);
    }
    SECTION("closed-loop step settles inside half a second") {
        RatePid pid(cfg);
        VehicleState s;
        s.R = nose_up_attitude();
        const Eigen::Vector3d cmd(0.5, 0, 0);
        const double dt = 1e-3;
        double t_settle = -1.0;
        for (int i = 0; i < 600; ++i) {
            const AirflowState airflow = airflow_from_state(s, Eigen::Vector3d::Zero());
            const Eigen::Vector3d ma = aero_moment_body(airflow, params, aero);
            const Eigen::Vector3d gyro = s.omega.cross(params.inertia * s.omega);
            const Eigen::Vector3d tau = pid.torque(cmd, s.omega, ma, gyro, dt);
            FullInput u;
            u.thrust = params.mass * 9.8;
            u.torque = tau;
            s = step_rk4(s, u, Eigen::Vector3d::Zero(), dt, params, aero);
            if (t_settle < 0.0 && std::abs(s.omega.x() - 0.5) < 0.05 * 0.5) {
                t_settle = (i + 1) * dt;
            }
        }
        REQUIRE(t_settle > 0.0);
        REQUIRE(t_settle < 0.5);
        REQUIRE(std::abs(s.omega.x() - 0.5) < 0.05 * 0.5);
    }
}
