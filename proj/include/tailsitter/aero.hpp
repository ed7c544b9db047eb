#ifndef TAILSITTER_AERO_HPP
#define TAILSITTER_AERO_HPP

#include <Eigen/Dense>
#include <cmath>
#include <istream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "tailsitter/errors.hpp"
#include "tailsitter/math.hpp"
#include "tailsitter/spline.hpp"

namespace tailsitter {

// Below this airspeed the incidence angles are ill-defined and get carried
// over from the previous sample instead of being recomputed.
constexpr double kSpeedEps = 0.1;

struct VehicleParams {
    double mass = 1.3328;                      // kg
    Eigen::Matrix3d inertia =                  // kg m^2, body frame
        Eigen::Vector3d(0.015, 0.025, 0.035).asDiagonal();
    double wing_area = 0.225;                  // m^2
    double chord = 0.21;                       // m, mean aerodynamic chord
    double span = 1.085;                       // m
    double air_density = 1.225;                // kg/m^3
    Eigen::Vector3d gravity{0.0, 0.0, 9.8};    // m/s^2, NED
    double thrust_min = 0.0;                   // N
    double thrust_max = 30.0;                  // N
    Eigen::Vector3d omega_max{6.0, 6.0, 3.0};  // rad/s per body axis

    void validate() const {
        if (!(mass > 0.0)) throw ValidationError("vehicle.mass", "must be > 0");
        if (!(wing_area > 0.0)) throw ValidationError("vehicle.wing_area", "must be > 0");
        if (!(air_density > 0.0)) throw ValidationError("vehicle.air_density", "must be > 0");
        if (!(chord > 0.0)) throw ValidationError("vehicle.chord", "must be > 0");
        if (!(span > 0.0)) throw ValidationError("vehicle.span", "must be > 0");
        if (!(thrust_min < thrust_max)) {
            throw ValidationError("vehicle.thrust_max", "must exceed thrust_min");
        }
        if (!inertia.isApprox(inertia.transpose(), 1e-9)) {
            throw ValidationError("vehicle.inertia", "must be symmetric");
        }
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(inertia);
        if (es.eigenvalues().minCoeff() <= 0.0) {
            throw ValidationError("vehicle.inertia", "must be positive definite");
        }
    }
};

// Body-frame force coefficients C = (Cx, Cy, Cz), moment coefficients and
// the incidence partials needed by the flatness chain.
struct AeroCoefficients {
    double Cx = 0.0, Cy = 0.0, Cz = 0.0;
    double Cl = 0.0, Cm = 0.0, Cn = 0.0;
    Eigen::Vector3d dC_dalpha = Eigen::Vector3d::Zero();
    Eigen::Vector3d dC_dbeta = Eigen::Vector3d::Zero();
    Eigen::Vector3d d2C_dalpha2 = Eigen::Vector3d::Zero();
    Eigen::Vector3d d2C_dbeta_dalpha = Eigen::Vector3d::Zero();

    Eigen::Vector3d force() const { return {Cx, Cy, Cz}; }
    Eigen::Vector3d moment(double span, double chord) const {
        return {span * Cl, chord * Cm, span * Cn};
    }
};

struct AirflowState {
    Eigen::Vector3d airspeed_world = Eigen::Vector3d::Zero(); // v - w
    Eigen::Vector3d airspeed_body = Eigen::Vector3d::Zero();
    double speed = 0.0;
    double alpha = 0.0; // rad
    double beta = 0.0;  // rad
    Eigen::Vector3d wind = Eigen::Vector3d::Zero();
};

namespace detail {

// Wind-axis coefficient bundle at one (alpha, beta) point: values plus
// the partials required to chain into body axes.
struct WindAxisCoeffs {
    double CL, CD, CY;
    double dCL_da, dCD_da, dCY_da;
    double dCL_db, dCD_db, dCY_db;
    double d2CL_da2, d2CD_da2;
    double d2CY_dbda;
    double Cl, Cm, Cn;
};

// Rotation of (D, Y, L) into body axes and all requested partials.
inline AeroCoefficients to_body(const WindAxisCoeffs &w, double alpha) {
    const double c = std::cos(alpha);
    const double s = std::sin(alpha);
    AeroCoefficients out;
    out.Cx = -w.CD * c + w.CL * s;
    out.Cy = w.CY;
    out.Cz = -w.CD * s - w.CL * c;
    out.Cl = w.Cl;
    out.Cm = w.Cm;
    out.Cn = w.Cn;

    out.dC_dalpha.x() = -w.dCD_da * c + w.CD * s + w.dCL_da * s + w.CL * c;
    out.dC_dalpha.y() = w.dCY_da;
    out.dC_dalpha.z() = -w.dCD_da * s - w.CD * c - w.dCL_da * c + w.CL * s;

    out.dC_dbeta.x() = -w.dCD_db * c + w.dCL_db * s;
    out.dC_dbeta.y() = w.dCY_db;
    out.dC_dbeta.z() = -w.dCD_db * s - w.dCL_db * c;

    out.d2C_dalpha2.x() =
        -w.d2CD_da2 * c + 2.0 * w.dCD_da * s + w.CD * c + w.d2CL_da2 * s + 2.0 * w.dCL_da * c - w.CL * s;
    out.d2C_dalpha2.y() = 0.0;
    out.d2C_dalpha2.z() =
        -w.d2CD_da2 * s - 2.0 * w.dCD_da * c + w.CD * s - w.d2CL_da2 * c + 2.0 * w.dCL_da * s + w.CL * c;

    // CL/CD are even in beta, so their mixed partials vanish on the
    // symmetry plane; only the side-force component survives.
    out.d2C_dbeta_dalpha = Eigen::Vector3d(0.0, w.d2CY_dbda, 0.0);
    return out;
}

} // namespace detail

class AeroModel {
public:
    virtual ~AeroModel() = default;
    virtual AeroCoefficients coefficients(double alpha, double beta) const = 0;
};

// Smooth flat-plate style model, symmetric in beta and 2x differentiable
// everywhere; the fallback when no tabulated data is supplied.
struct AnalyticAeroConfig {
    double cd0 = 0.02;        // drag at zero incidence
    double cd90 = 1.3;        // drag broadside on
    double lift_slope = 2.5;  // dCL/dalpha at alpha = 0, 1/rad
    double cy_beta = -0.3;    // dCY/dbeta at beta = 0, 1/rad
    double cm_scale = 0.05;   // pitching-moment amplitude
    double cl_beta = -0.05;   // roll-moment slope in beta
    double cn_beta = 0.05;    // yaw-moment slope in beta
};

class AnalyticAeroModel final : public AeroModel {
public:
    AnalyticAeroModel() = default;
    explicit AnalyticAeroModel(const AnalyticAeroConfig &cfg) : cfg_(cfg) {}

    AeroCoefficients coefficients(double alpha, double beta) const override {
        const double c = std::cos(alpha);
        const double s = std::sin(alpha);
        const double sb = std::sin(beta);
        const double cb = std::cos(beta);

        detail::WindAxisCoeffs w;
        w.CL = cfg_.lift_slope * s * c;
        w.dCL_da = cfg_.lift_slope * (c * c - s * s);
        w.d2CL_da2 = -4.0 * cfg_.lift_slope * s * c;
        w.CD = cfg_.cd0 * c * c + cfg_.cd90 * s * s;
        w.dCD_da = 2.0 * (cfg_.cd90 - cfg_.cd0) * s * c;
        w.d2CD_da2 = 2.0 * (cfg_.cd90 - cfg_.cd0) * (c * c - s * s);
        w.CY = cfg_.cy_beta * sb;
        w.dCY_db = cfg_.cy_beta * cb;
        w.dCY_da = 0.0;
        w.d2CY_dbda = 0.0;
        w.dCL_db = 0.0;
        w.dCD_db = 0.0;
        w.Cl = cfg_.cl_beta * sb;
        w.Cm = -cfg_.cm_scale * 2.0 * s * c;
        w.Cn = cfg_.cn_beta * sb;
        return detail::to_body(w, alpha);
    }

    const AnalyticAeroConfig &config() const { return cfg_; }

private:
    AnalyticAeroConfig cfg_;
};

// Bicubic-spline model over a CFD-style coefficient grid.
class TableAeroModel final : public AeroModel {
public:
    AeroCoefficients coefficients(double alpha, double beta) const override {
        const auto cl = CL_.eval(alpha, beta);
        const auto cd = CD_.eval(alpha, beta);
        const auto cy = CY_.eval(alpha, beta);
        const auto ml = Cl_.eval(alpha, beta);
        const auto mm = Cm_.eval(alpha, beta);
        const auto mn = Cn_.eval(alpha, beta);

        detail::WindAxisCoeffs w;
        w.CL = cl.value;
        w.CD = cd.value;
        w.CY = cy.value;
        w.dCL_da = cl.du;
        w.dCD_da = cd.du;
        w.dCY_da = cy.du;
        w.dCL_db = cl.dv;
        w.dCD_db = cd.dv;
        w.dCY_db = cy.dv;
        w.d2CL_da2 = cl.duu;
        w.d2CD_da2 = cd.duu;
        w.d2CY_dbda = cy.duv;
        w.Cl = ml.value;
        w.Cm = mm.value;
        w.Cn = mn.value;

        AeroCoefficients out = detail::to_body(w, alpha);
        // The beta-even/odd structure only holds exactly on the symmetry
        // plane; pin it there so downstream identities are exact.
        if (std::abs(beta) < 1e-12) {
            out.Cy = 0.0;
            out.dC_dbeta.x() = -cd.dv * std::cos(alpha) + cl.dv * std::sin(alpha);
            out.dC_dbeta.z() = -cd.dv * std::sin(alpha) - cl.dv * std::cos(alpha);
        }
        return out;
    }

    friend TableAeroModel load_coefficient_table(std::istream &, std::vector<std::string> *);

private:
    BicubicSpline CL_, CD_, CY_, Cl_, Cm_, Cn_;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string &line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r");
        const auto e = cell.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    return out;
}

} // namespace detail

// Reads `alpha_deg,beta_deg,CL,CD,CY,Cl,Cm,Cn` rows on a complete 10 deg
// grid, enforces the lateral-symmetry identities by projection, and builds
// the spline model. Angles are degrees in the file, radians in memory.
inline TableAeroModel load_coefficient_table(std::istream &in,
                                             std::vector<std::string> *warnings = nullptr) {
    static const std::vector<std::string> expected = {"alpha_deg", "beta_deg", "CL",
                                                      "CD",        "CY",       "Cl",
                                                      "Cm",        "Cn"};
    std::string line;
    long row = 0;
    if (!std::getline(in, line)) {
        throw ParseError("empty coefficient table");
    }
    ++row;
    if (detail::split_csv_line(line) != expected) {
        throw ParseError("expected header alpha_deg,beta_deg,CL,CD,CY,Cl,Cm,Cn", row);
    }

    std::map<std::pair<long, long>, Eigen::Matrix<double, 6, 1>> cells;
    while (std::getline(in, line)) {
        ++row;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        const auto f = detail::split_csv_line(line);
        if (f.size() != 8) {
            throw ParseError("expected 8 comma-separated fields", row);
        }
        double vals[8];
        for (int i = 0; i < 8; ++i) {
            try {
                size_t used = 0;
                vals[i] = std::stod(f[static_cast<size_t>(i)], &used);
                if (used != f[static_cast<size_t>(i)].size()) throw std::invalid_argument("");
            } catch (const std::exception &) {
                throw ParseError("field '" + f[static_cast<size_t>(i)] + "' is not a number", row);
            }
            if (!std::isfinite(vals[i])) {
                throw ParseError("non-finite value", row);
            }
        }
        const double a10 = vals[0] / 10.0, b10 = vals[1] / 10.0;
        if (std::abs(a10 - std::round(a10)) > 1e-9 || std::abs(b10 - std::round(b10)) > 1e-9) {
            throw ParseError("angles must sit on the 10 degree grid", row);
        }
        const auto key = std::make_pair(static_cast<long>(std::llround(a10)),
                                        static_cast<long>(std::llround(b10)));
        if (cells.count(key)) {
            throw ParseError("duplicate grid cell at alpha=" + std::to_string(key.first * 10) +
                                 " beta=" + std::to_string(key.second * 10),
                             row);
        }
        Eigen::Matrix<double, 6, 1> v;
        v << vals[2], vals[3], vals[4], vals[5], vals[6], vals[7];
        cells[key] = v;
    }
    if (cells.empty()) {
        throw ParseError("coefficient table has no data rows");
    }

    long amin = cells.begin()->first.first, amax = amin;
    long bmin = cells.begin()->first.second, bmax = bmin;
    for (const auto &kv : cells) {
        amin = std::min(amin, kv.first.first);
        amax = std::max(amax, kv.first.first);
        bmin = std::min(bmin, kv.first.second);
        bmax = std::max(bmax, kv.first.second);
    }
    const long na = amax - amin + 1, nb = bmax - bmin + 1;
    if (na < 4 || nb < 4) {
        throw ParseError("grid must span at least 4 points per axis");
    }
    for (long i = 0; i < na; ++i) {
        for (long j = 0; j < nb; ++j) {
            if (!cells.count({amin + i, bmin + j})) {
                throw ParseError("missing grid cell at alpha=" + std::to_string((amin + i) * 10) +
                                 " beta=" + std::to_string((bmin + j) * 10));
            }
        }
    }

    const double deg = kPi / 180.0;
    Eigen::VectorXd alphas(na), betas(nb);
    for (long i = 0; i < na; ++i) alphas(i) = 10.0 * static_cast<double>(amin + i) * deg;
    for (long j = 0; j < nb; ++j) betas(j) = 10.0 * static_cast<double>(bmin + j) * deg;

    Eigen::MatrixXd grids[6];
    for (auto &g : grids) g.resize(na, nb);
    for (long i = 0; i < na; ++i) {
        for (long j = 0; j < nb; ++j) {
            const auto &v = cells.at({amin + i, bmin + j});
            for (int k = 0; k < 6; ++k) grids[k](i, j) = v(k);
        }
    }

    // Symmetrize across beta when the mirrored cell exists: CL, CD keep
    // the even part, CY the odd part. CFD tables are noisy, so deviations
    // are projected out rather than rejected.
    double worst = 0.0;
    for (long i = 0; i < na; ++i) {
        for (long j = 0; j < nb; ++j) {
            const long jm = -(bmin + j) - bmin; // index of -beta
            if (jm < 0 || jm >= nb || jm < j) continue;
            for (int k = 0; k < 2; ++k) { // CL, CD even
                const double even = 0.5 * (grids[k](i, j) + grids[k](i, jm));
                worst = std::max(worst, std::abs(grids[k](i, j) - even));
                grids[k](i, j) = even;
                grids[k](i, jm) = even;
            }
            const double odd = 0.5 * (grids[2](i, j) - grids[2](i, jm)); // CY odd
            worst = std::max(worst, std::abs(grids[2](i, j) - odd));
            grids[2](i, j) = odd;
            grids[2](i, jm) = -odd;
        }
    }
    if (warnings && worst > 1e-12) {
        warnings->push_back("coefficient table violated lateral symmetry by up to " +
                            std::to_string(worst) + "; symmetrized");
    }

    TableAeroModel model;
    model.CL_.build(alphas, betas, grids[0]);
    model.CD_.build(alphas, betas, grids[1]);
    model.CY_.build(alphas, betas, grids[2]);
    model.Cl_.build(alphas, betas, grids[3]);
    model.Cm_.build(alphas, betas, grids[4]);
    model.Cn_.build(alphas, betas, grids[5]);
    return model;
}

// Incidence angles from inertial velocity, wind and attitude. At very low
// airspeed alpha/beta are carried over from `previous` when given, else
// default to the thrust-borne convention (pi/2, 0).
template <typename StateT>
inline AirflowState airflow_from_state(const StateT &state, const Eigen::Vector3d &wind,
                                       const AirflowState *previous = nullptr) {
    AirflowState out;
    out.wind = wind;
    out.airspeed_world = state.v - wind;
    out.airspeed_body = state.R.transpose() * out.airspeed_world;
    out.speed = out.airspeed_world.norm();
    if (out.speed < kSpeedEps) {
        out.alpha = previous ? previous->alpha : 0.5 * kPi;
        out.beta = previous ? previous->beta : 0.0;
        return out;
    }
    out.alpha = std::atan2(out.airspeed_body.z(), out.airspeed_body.x());
    out.beta = std::asin(std::clamp(out.airspeed_body.y() / out.speed, -1.0, 1.0));
    return out;
}

inline Eigen::Vector3d aero_force_body(const AirflowState &airflow, const VehicleParams &params,
                                       const AeroCoefficients &coeffs) {
    const double q = 0.5 * params.air_density * airflow.speed * airflow.speed * params.wing_area;
    return q * coeffs.force();
}

inline Eigen::Vector3d aero_force_body(const AirflowState &airflow, const VehicleParams &params,
                                       const AeroModel &model) {
    return aero_force_body(airflow, params, model.coefficients(airflow.alpha, airflow.beta));
}

inline Eigen::Vector3d aero_moment_body(const AirflowState &airflow, const VehicleParams &params,
                                        const AeroCoefficients &coeffs) {
    const double q = 0.5 * params.air_density * airflow.speed * airflow.speed * params.wing_area;
    return q * coeffs.moment(params.span, params.chord);
}

inline Eigen::Vector3d aero_moment_body(const AirflowState &airflow, const VehicleParams &params,
                                        const AeroModel &model) {
    return aero_moment_body(airflow, params, model.coefficients(airflow.alpha, airflow.beta));
}

// d(f_a)/d(v_a^B) for coordinated flight (beta = 0). The middle term uses
// that incidence responds to body velocity through the e2 skew.
inline Eigen::Matrix3d dfa_dvab(const AirflowState &airflow, const VehicleParams &params,
                                const AeroCoefficients &coeffs) {
    if (airflow.speed <= kSpeedEps) {
        throw DegenerateSpeedError("aero force Jacobian undefined below V_eps");
    }
    const double rs2 = 0.5 * params.air_density * params.wing_area;
    const Eigen::Vector3d vb = airflow.airspeed_body;
    const Eigen::Matrix3d e2x = skew(Eigen::Vector3d::UnitY());
    return rs2 * (2.0 * coeffs.force() * vb.transpose() +
                  coeffs.dC_dalpha * (vb.transpose() * e2x) +
                  airflow.speed * coeffs.dC_dbeta * Eigen::RowVector3d::UnitY());
}

inline Eigen::Matrix3d dfa_dvab(const AirflowState &airflow, const VehicleParams &params,
                                const AeroModel &model) {
    return dfa_dvab(airflow, params, model.coefficients(airflow.alpha, airflow.beta));
}

} // namespace tailsitter

#endif
