#ifndef TAILSITTER_SPLINE_HPP
#define TAILSITTER_SPLINE_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "tailsitter/errors.hpp"

namespace tailsitter {

// Natural cubic spline on a strictly increasing knot grid.
// Evaluates value and first/second derivatives; queries outside the
// knot span raise DomainError.
class CubicSpline {
public:
    CubicSpline() = default;

    CubicSpline(Eigen::VectorXd x, Eigen::VectorXd y) { build(std::move(x), std::move(y)); }

    void build(Eigen::VectorXd x, Eigen::VectorXd y) {
        if (x.size() != y.size() || x.size() < 3) {
            throw DomainError("cubic spline needs at least 3 knots");
        }
        x_ = std::move(x);
        y_ = std::move(y);
        const Eigen::Index n = x_.size();
        m_.setZero(n);

        // Tridiagonal system for interior second derivatives, natural ends.
        Eigen::VectorXd diag(n), rhs(n), sub(n);
        diag(0) = 1.0;
        rhs(0) = 0.0;
        sub(0) = 0.0;
        for (Eigen::Index i = 1; i + 1 < n; ++i) {
            const double h0 = x_(i) - x_(i - 1);
            const double h1 = x_(i + 1) - x_(i);
            if (h0 <= 0.0 || h1 <= 0.0) {
                throw DomainError("spline knots must be strictly increasing");
            }
            sub(i) = h0;
            diag(i) = 2.0 * (h0 + h1);
            rhs(i) = 6.0 * ((y_(i + 1) - y_(i)) / h1 - (y_(i) - y_(i - 1)) / h0);
        }

        // Thomas sweep; the natural boundary rows stay identity.
        Eigen::VectorXd c(n);
        c(0) = 0.0;
        for (Eigen::Index i = 1; i + 1 < n; ++i) {
            const double h1 = x_(i + 1) - x_(i);
            const double denom = diag(i) - sub(i) * c(i - 1);
            c(i) = h1 / denom;
            rhs(i) = (rhs(i) - sub(i) * rhs(i - 1)) / denom;
        }
        m_(n - 1) = 0.0;
        for (Eigen::Index i = n - 2; i >= 1; --i) {
            m_(i) = rhs(i) - c(i) * m_(i + 1);
        }
    }

    double min_x() const { return x_(0); }
    double max_x() const { return x_(x_.size() - 1); }

    double eval(double q, int order = 0) const {
        const Eigen::Index i = locate(q);
        const double h = x_(i + 1) - x_(i);
        const double a = (x_(i + 1) - q) / h;
        const double b = (q - x_(i)) / h;
        switch (order) {
        case 0:
            return a * y_(i) + b * y_(i + 1) +
                   ((a * a * a - a) * m_(i) + (b * b * b - b) * m_(i + 1)) * h * h / 6.0;
        case 1:
            return (y_(i + 1) - y_(i)) / h -
                   (3.0 * a * a - 1.0) / 6.0 * h * m_(i) +
                   (3.0 * b * b - 1.0) / 6.0 * h * m_(i + 1);
        case 2:
            return a * m_(i) + b * m_(i + 1);
        default:
            throw DomainError("cubic spline supports derivative orders 0..2");
        }
    }

private:
    Eigen::Index locate(double q) const {
        const double lo = x_(0), hi = x_(x_.size() - 1);
        const double slack = 1e-9 * std::max(1.0, std::abs(hi) + std::abs(lo));
        if (q < lo - slack || q > hi + slack) {
            throw DomainError("spline query outside tabulated domain");
        }
        q = std::clamp(q, lo, hi);
        Eigen::Index i = std::upper_bound(x_.data(), x_.data() + x_.size(), q) - x_.data() - 1;
        return std::clamp<Eigen::Index>(i, 0, x_.size() - 2);
    }

    Eigen::VectorXd x_, y_, m_;
};

// Tensor-product bicubic spline: one precomputed spline per grid row in
// the second coordinate, re-splined across the first coordinate at query
// time. Derivatives come out of the spline algebra, not differencing.
class BicubicSpline {
public:
    BicubicSpline() = default;

    void build(const Eigen::VectorXd &u, const Eigen::VectorXd &v, const Eigen::MatrixXd &z) {
        if (z.rows() != u.size() || z.cols() != v.size()) {
            throw DomainError("bicubic grid shape mismatch");
        }
        u_ = u;
        rows_.clear();
        rows_.reserve(static_cast<size_t>(u.size()));
        for (Eigen::Index i = 0; i < u.size(); ++i) {
            rows_.emplace_back(v, z.row(i).transpose());
        }
    }

    struct Sample {
        double value;
        double du, dv;   // first partials
        double duu, duv; // second partials used downstream
    };

    Sample eval(double uq, double vq) const {
        const Eigen::Index n = u_.size();
        Eigen::VectorXd val(n), dv(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            val(i) = rows_[static_cast<size_t>(i)].eval(vq, 0);
            dv(i) = rows_[static_cast<size_t>(i)].eval(vq, 1);
        }
        CubicSpline su(u_, val);
        CubicSpline sv(u_, dv);
        Sample s;
        s.value = su.eval(uq, 0);
        s.du = su.eval(uq, 1);
        s.duu = su.eval(uq, 2);
        s.dv = sv.eval(uq, 0);
        s.duv = sv.eval(uq, 1);
        return s;
    }

private:
    Eigen::VectorXd u_;
    std::vector<CubicSpline> rows_;
};

} // namespace tailsitter

#endif
