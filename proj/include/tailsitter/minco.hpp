#ifndef TAILSITTER_MINCO_HPP
#define TAILSITTER_MINCO_HPP

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tailsitter/errors.hpp"

namespace tailsitter {

constexpr int kPolyOrder = 7;
constexpr int kCoeffsPerSegment = kPolyOrder + 1;

// Monomial basis (1, t, ..., t^7) differentiated `order` times.
inline Eigen::Matrix<double, 1, kCoeffsPerSegment> poly_basis(double t, int order) {
    Eigen::Matrix<double, 1, kCoeffsPerSegment> row;
    row.setZero();
    if (order < 0 || order > kPolyOrder) {
        return row;
    }
    double tn = 1.0;
    for (int j = order; j <= kPolyOrder; ++j) {
        double fac = 1.0;
        for (int k = 0; k < order; ++k) {
            fac *= static_cast<double>(j - k);
        }
        row(j) = fac * tn;
        tn *= t;
    }
    return row;
}

// Position and its first three derivatives at a trajectory endpoint.
struct BoundaryCondition {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
    Eigen::Vector3d acceleration = Eigen::Vector3d::Zero();
    Eigen::Vector3d jerk = Eigen::Vector3d::Zero();

    Eigen::Vector3d row(int order) const {
        switch (order) {
        case 0: return position;
        case 1: return velocity;
        case 2: return acceleration;
        default: return order == 3 ? jerk : Eigen::Vector3d::Zero();
        }
    }
};

// M segments of degree-7 polynomials in segment-relative time.
class PiecewiseTrajectory {
public:
    PiecewiseTrajectory() = default;

    PiecewiseTrajectory(Eigen::VectorXd durations, Eigen::MatrixX3d coeffs,
                        std::vector<Eigen::Vector3d> waypoints)
        : T_(std::move(durations)), c_(std::move(coeffs)), waypoints_(std::move(waypoints)) {}

    int segments() const { return static_cast<int>(T_.size()); }
    const Eigen::VectorXd &durations() const { return T_; }
    const Eigen::MatrixX3d &coefficients() const { return c_; }
    const std::vector<Eigen::Vector3d> &waypoints() const { return waypoints_; }
    double total_duration() const { return T_.sum(); }

    Eigen::Vector3d evaluate_segment(int i, double tau, int order) const {
        return (poly_basis(tau, order) * c_.block<kCoeffsPerSegment, 3>(kCoeffsPerSegment * i, 0))
            .transpose();
    }

    // Joint times resolve to the segment ending there.
    Eigen::Vector3d evaluate(double t, int order) const {
        const double total = total_duration();
        const double slack = 1e-9 * std::max(1.0, total);
        if (t < -slack || t > total + slack) {
            throw DomainError("trajectory evaluated outside [0, total duration]");
        }
        t = std::clamp(t, 0.0, total);
        int i = 0;
        while (i + 1 < segments() && t > T_(i)) {
            t -= T_(i);
            ++i;
        }
        return evaluate_segment(i, std::min(t, T_(i)), order);
    }

    // Integral of the squared 4th derivative over the whole trajectory.
    // The 4th derivative is cubic in t, so the integrand is an exact
    // degree-6 polynomial per segment.
    double snap_cost() const {
        double cost = 0.0;
        for (int i = 0; i < segments(); ++i) {
            Eigen::Matrix<double, 4, 3> d;
            const auto block = c_.block<kCoeffsPerSegment, 3>(kCoeffsPerSegment * i, 0);
            d.row(0) = 24.0 * block.row(4);
            d.row(1) = 120.0 * block.row(5);
            d.row(2) = 360.0 * block.row(6);
            d.row(3) = 840.0 * block.row(7);
            double power = T_(i);
            for (int s = 0; s <= 6; ++s) {
                double dot = 0.0;
                for (int k = std::max(0, s - 3); k <= std::min(s, 3); ++k) {
                    dot += d.row(k).dot(d.row(s - k));
                }
                cost += dot * power / static_cast<double>(s + 1);
                power *= T_(i);
            }
        }
        return cost;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["segments"] = segments();
        j["durations"] = std::vector<double>(T_.data(), T_.data() + T_.size());
        std::vector<std::vector<double>> rows;
        rows.reserve(static_cast<size_t>(c_.rows()));
        for (Eigen::Index r = 0; r < c_.rows(); ++r) {
            rows.push_back({c_(r, 0), c_(r, 1), c_(r, 2)});
        }
        j["coefficients"] = rows;
        std::vector<std::vector<double>> wps;
        for (const auto &w : waypoints_) {
            wps.push_back({w.x(), w.y(), w.z()});
        }
        j["waypoints"] = wps;
        return j;
    }

    static PiecewiseTrajectory from_json(const nlohmann::json &j) {
        const int m = j.at("segments").get<int>();
        Eigen::VectorXd T(m);
        const auto &durs = j.at("durations");
        for (int i = 0; i < m; ++i) T(i) = durs.at(static_cast<size_t>(i)).get<double>();
        Eigen::MatrixX3d c(kCoeffsPerSegment * m, 3);
        const auto &rows = j.at("coefficients");
        for (Eigen::Index r = 0; r < c.rows(); ++r) {
            for (int k = 0; k < 3; ++k) {
                c(r, k) = rows.at(static_cast<size_t>(r)).at(static_cast<size_t>(k)).get<double>();
            }
        }
        std::vector<Eigen::Vector3d> wps;
        for (const auto &w : j.at("waypoints")) {
            wps.emplace_back(w.at(0).get<double>(), w.at(1).get<double>(), w.at(2).get<double>());
        }
        return PiecewiseTrajectory(std::move(T), std::move(c), std::move(wps));
    }

private:
    Eigen::VectorXd T_;
    Eigen::MatrixX3d c_;
    std::vector<Eigen::Vector3d> waypoints_;
};

// Banded LU with partial pivoting in LAPACK-style storage. Pivoting widens
// the upper band to kl + ku, hence the 2*kl + ku + 1 storage rows.
class BandedLU {
public:
    void create(int n, int kl, int ku) {
        n_ = n;
        kl_ = kl;
        ku_ = ku;
        rows_ = 2 * kl + ku + 1;
        data_.assign(static_cast<size_t>(rows_) * static_cast<size_t>(n), 0.0);
        pivots_.assign(static_cast<size_t>(n), 0);
        factored_ = false;
    }

    void reset() {
        std::fill(data_.begin(), data_.end(), 0.0);
        factored_ = false;
    }

    double &at(int i, int j) { return data_[static_cast<size_t>(kl_ + ku_ + i - j) * n_ + j]; }
    double at(int i, int j) const {
        return data_[static_cast<size_t>(kl_ + ku_ + i - j) * n_ + j];
    }

    bool in_band(int i, int j) const {
        const int d = i - j;
        return d >= -(ku_ + kl_) && d <= kl_;
    }

    void factorize() {
        double amax = 0.0;
        for (double v : data_) amax = std::max(amax, std::abs(v));
        if (!(amax > 0.0)) {
            throw ConditioningError("banded matrix is zero");
        }
        for (int k = 0; k < n_; ++k) {
            const int ilast = std::min(k + kl_, n_ - 1);
            int p = k;
            for (int i = k + 1; i <= ilast; ++i) {
                if (std::abs(at(i, k)) > std::abs(at(p, k))) p = i;
            }
            pivots_[static_cast<size_t>(k)] = p;
            // Columns scale very differently (powers of the durations), so
            // only a genuinely vanishing pivot is fatal; accuracy is
            // guarded by the residual check after the solve.
            if (std::abs(at(p, k)) < 1e-280 * amax) {
                throw ConditioningError("banded LU pivot underflow; system is singular");
            }
            const int jlast = std::min(k + kl_ + ku_, n_ - 1);
            if (p != k) {
                for (int j = k; j <= jlast; ++j) std::swap(at(k, j), at(p, j));
            }
            for (int i = k + 1; i <= ilast; ++i) {
                const double l = at(i, k) / at(k, k);
                at(i, k) = l;
                for (int j = k + 1; j <= jlast; ++j) {
                    at(i, j) -= l * at(k, j);
                }
            }
        }
        factored_ = true;
    }

    template <typename Mat>
    void solve(Mat &b) const {
        for (int k = 0; k < n_; ++k) {
            const int p = pivots_[static_cast<size_t>(k)];
            if (p != k) b.row(p).swap(b.row(k));
            const int ilast = std::min(k + kl_, n_ - 1);
            for (int i = k + 1; i <= ilast; ++i) {
                b.row(i) -= at(i, k) * b.row(k);
            }
        }
        for (int j = n_ - 1; j >= 0; --j) {
            b.row(j) /= at(j, j);
            const int ifirst = std::max(0, j - kl_ - ku_);
            for (int i = ifirst; i < j; ++i) {
                b.row(i) -= at(i, j) * b.row(j);
            }
        }
    }

    bool factored() const { return factored_; }

private:
    int n_ = 0, kl_ = 0, ku_ = 0, rows_ = 0;
    std::vector<double> data_;
    std::vector<int> pivots_;
    bool factored_ = false;
};

// Assembles and solves the minimum-snap linear system: 4 boundary rows per
// end, and per interior joint one waypoint row plus continuity of orders
// 0..6 between adjacent segments. The solution is the unique minimum-snap
// spline through the waypoints for the given durations.
class MincoSolver {
public:
    MincoSolver(BoundaryCondition start, BoundaryCondition goal,
                std::vector<Eigen::Vector3d> waypoints)
        : start_(std::move(start)), goal_(std::move(goal)), waypoints_(std::move(waypoints)) {
        M_ = static_cast<int>(waypoints_.size()) + 1;
        n_ = kCoeffsPerSegment * M_;
        band_.create(n_, 11, 11);
        raw_.create(n_, 11, 11);
        b_.resize(n_, 3);
    }

    int segment_count() const { return M_; }

    PiecewiseTrajectory solve(const Eigen::VectorXd &durations) {
        assemble(durations);
        raw_ = band_;
        band_.factorize();
        c_ = b_;
        band_.solve(c_);

        // Residual guard against silently bad factorizations.
        const double bmax = std::max(b_.cwiseAbs().maxCoeff(), 1e-16);
        Eigen::MatrixX3d residual = multiply(raw_, c_) - b_;
        if (residual.cwiseAbs().maxCoeff() > 1e-8 * bmax) {
            throw ConditioningError("minimum-snap system residual too large");
        }
        T_ = durations;
        return PiecewiseTrajectory(T_, c_, waypoints_);
    }

    // d(coefficients)/d(T_i) = -A^{-1} (dA/dT_i) c via the stored
    // factorization; dA/dT_i only has entries in segment i's closing rows.
    Eigen::MatrixX3d dcoeff_dT(int segment) const {
        if (!band_.factored()) {
            throw ConditioningError("dcoeff_dT requires a solved system");
        }
        Eigen::MatrixX3d u = Eigen::MatrixX3d::Zero(n_, 3);
        const int i = segment; // 0-based
        const auto block = c_.block<kCoeffsPerSegment, 3>(kCoeffsPerSegment * i, 0);
        const double Ti = T_(i);
        auto deriv = [&](int order) -> Eigen::RowVector3d { return poly_basis(Ti, order) * block; };
        if (i + 1 < M_) {
            const int r = 4 + kCoeffsPerSegment * i;
            u.row(r) = deriv(1);
            for (int k = 0; k <= 6; ++k) {
                u.row(r + 1 + k) = deriv(k + 1);
            }
        } else {
            const int r = n_ - 4;
            for (int k = 0; k < 4; ++k) {
                u.row(r + k) = deriv(k + 1);
            }
        }
        band_.solve(u);
        return -u;
    }

    // Dense copies for verification against generic solvers.
    Eigen::MatrixXd dense_system_matrix(const Eigen::VectorXd &durations) {
        assemble(durations);
        Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n_, n_);
        for (int i = 0; i < n_; ++i) {
            for (int j = 0; j < n_; ++j) {
                if (band_.in_band(i, j)) dense(i, j) = band_.at(i, j);
            }
        }
        return dense;
    }

    Eigen::MatrixX3d dense_rhs() const { return b_; }

private:
    void assemble(const Eigen::VectorXd &durations) {
        if (durations.size() != M_) {
            throw DomainError("duration count must equal segment count");
        }
        for (int i = 0; i < M_; ++i) {
            if (!(durations(i) > 0.0)) {
                throw DomainError("segment durations must be positive");
            }
        }
        band_.reset();
        b_.setZero();

        for (int k = 0; k < 4; ++k) {
            set_row(k, 0, poly_basis(0.0, k));
            b_.row(k) = start_.row(k).transpose();
        }
        for (int i = 0; i + 1 < M_; ++i) {
            const int r = 4 + kCoeffsPerSegment * i;
            const double Ti = durations(i);
            set_row(r, i, poly_basis(Ti, 0));
            b_.row(r) = waypoints_[static_cast<size_t>(i)].transpose();
            for (int k = 0; k <= 6; ++k) {
                set_row(r + 1 + k, i, poly_basis(Ti, k));
                set_row(r + 1 + k, i + 1, -poly_basis(0.0, k));
            }
        }
        for (int k = 0; k < 4; ++k) {
            set_row(n_ - 4 + k, M_ - 1, poly_basis(durations(M_ - 1), k));
            b_.row(n_ - 4 + k) = goal_.row(k).transpose();
        }
    }

    void set_row(int row, int segment, const Eigen::Matrix<double, 1, kCoeffsPerSegment> &vals) {
        const int base = kCoeffsPerSegment * segment;
        for (int j = 0; j < kCoeffsPerSegment; ++j) {
            if (vals(j) != 0.0) band_.at(row, base + j) += vals(j);
        }
    }

    static Eigen::MatrixX3d multiply(const BandedLU &a, const Eigen::MatrixX3d &x) {
        Eigen::MatrixX3d y = Eigen::MatrixX3d::Zero(x.rows(), 3);
        const int n = static_cast<int>(x.rows());
        for (int i = 0; i < n; ++i) {
            for (int j = std::max(0, i - 11); j <= std::min(n - 1, i + 11); ++j) {
                if (a.in_band(i, j)) y.row(i) += a.at(i, j) * x.row(j);
            }
        }
        return y;
    }

    BoundaryCondition start_, goal_;
    std::vector<Eigen::Vector3d> waypoints_;
    int M_ = 0, n_ = 0;
    BandedLU band_, raw_;
    Eigen::MatrixX3d b_, c_;
    Eigen::VectorXd T_;
};

} // namespace tailsitter

#endif
