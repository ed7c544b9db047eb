#ifndef TAILSITTER_LBFGS_HPP
#define TAILSITTER_LBFGS_HPP

#include <Eigen/Dense>
#include <cmath>
#include <deque>
#include <functional>

namespace tailsitter {
namespace lbfgs {

struct Params {
    int memory = 8;
    double armijo = 1e-4;     // sufficient-decrease coefficient
    double wolfe = 0.9;       // weak curvature coefficient
    double grad_tol = 1e-5;   // stop when ||g|| <= grad_tol
    int max_iterations = 200;
    int max_bisections = 60;  // line-search budget
    double cautious_eps = 1e-6;
    double initial_step = 1.0;
    // Invoked after every accepted step with (x, f, iteration).
    std::function<void(const Eigen::VectorXd &, double, int)> progress;
};

enum class Status { Converged, MaxIterations, LineSearchFailed };

struct Result {
    Eigen::VectorXd x;
    double f = 0.0;
    Eigen::VectorXd gradient;
    int iterations = 0;
    Status status = Status::Converged;
};

using Objective = std::function<double(const Eigen::VectorXd &, Eigen::VectorXd &)>;

// Weak-Wolfe line search: bisect once an Armijo violation brackets the
// step, double otherwise. Tolerates the nonsmooth kinks a penalty
// objective can have.
inline bool line_search_lewis_overton(const Objective &eval, Eigen::VectorXd &x, double &f,
                                      Eigen::VectorXd &g, const Eigen::VectorXd &direction,
                                      const Eigen::VectorXd &x0, const Eigen::VectorXd &g0,
                                      double f0, double &step, const Params &p) {
    const double dg0 = g0.dot(direction);
    if (dg0 >= 0.0) {
        return false;
    }
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    for (int i = 0; i < p.max_bisections; ++i) {
        x = x0 + step * direction;
        f = eval(x, g);
        if (!std::isfinite(f)) {
            hi = step;
            step = 0.5 * (lo + hi);
            continue;
        }
        if (f > f0 + p.armijo * step * dg0) {
            hi = step;
        } else if (g.dot(direction) < p.wolfe * dg0) {
            lo = step;
        } else {
            return true;
        }
        step = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * step;
        if (step < 1e-20 || step > 1e20) {
            break;
        }
    }
    return false;
}

inline Result minimize(const Objective &eval, Eigen::VectorXd x0, const Params &p = {}) {
    Result res;
    const Eigen::Index n = x0.size();
    Eigen::VectorXd x = std::move(x0);
    Eigen::VectorXd g(n);
    double f = eval(x, g);

    std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> pairs; // (s, y)
    Eigen::VectorXd best_x = x, best_g = g;
    double best_f = f;

    for (int k = 0; k < p.max_iterations; ++k) {
        res.iterations = k;
        if (g.norm() <= p.grad_tol) {
            res.x = x;
            res.f = f;
            res.gradient = g;
            res.status = Status::Converged;
            return res;
        }

        // Two-loop recursion over the retained curvature pairs.
        Eigen::VectorXd d = -g;
        std::vector<double> alpha(pairs.size());
        for (size_t i = pairs.size(); i-- > 0;) {
            const auto &[s, y] = pairs[i];
            alpha[i] = s.dot(d) / y.dot(s);
            d -= alpha[i] * y;
        }
        if (!pairs.empty()) {
            const auto &[s, y] = pairs.back();
            d *= y.dot(s) / y.dot(y);
        }
        for (size_t i = 0; i < pairs.size(); ++i) {
            const auto &[s, y] = pairs[i];
            const double beta = y.dot(d) / y.dot(s);
            d += (alpha[i] - beta) * s;
        }
        if (d.dot(g) >= 0.0) {
            d = -g; // safeguard against a broken metric
        }

        const Eigen::VectorXd x_prev = x;
        const Eigen::VectorXd g_prev = g;
        const double f_prev = f;
        double step = (k == 0) ? p.initial_step / std::max(1.0, g.norm()) : 1.0;

        if (!line_search_lewis_overton(eval, x, f, g, d, x_prev, g_prev, f_prev, step, p)) {
            res.x = best_x;
            res.f = best_f;
            res.gradient = best_g;
            res.status = Status::LineSearchFailed;
            return res;
        }
        if (f < best_f) {
            best_f = f;
            best_x = x;
            best_g = g;
        }
        if (p.progress) {
            p.progress(x, f, k + 1);
        }

        // Cautious update: skip pairs with too little curvature relative
        // to the current gradient scale.
        const Eigen::VectorXd s = x - x_prev;
        const Eigen::VectorXd y = g - g_prev;
        if (s.dot(y) > p.cautious_eps * s.squaredNorm() * g_prev.norm()) {
            pairs.emplace_back(s, y);
            if (static_cast<int>(pairs.size()) > p.memory) {
                pairs.pop_front();
            }
        }
    }

    res.x = x;
    res.f = f;
    res.gradient = g;
    res.status = Status::MaxIterations;
    return res;
}

} // namespace lbfgs
} // namespace tailsitter

#endif
