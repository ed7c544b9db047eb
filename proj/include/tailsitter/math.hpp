#ifndef TAILSITTER_MATH_HPP
#define TAILSITTER_MATH_HPP

#include <Eigen/Dense>
#include <cmath>

namespace tailsitter {

constexpr double kPi = 3.14159265358979323846;

inline Eigen::Matrix3d skew(const Eigen::Vector3d &v) {
    Eigen::Matrix3d m;
    m << 0.0, -v.z(), v.y(),
        v.z(), 0.0, -v.x(),
        -v.y(), v.x(), 0.0;
    return m;
}

inline Eigen::Vector3d vee(const Eigen::Matrix3d &m) {
    return Eigen::Vector3d(m(2, 1), m(0, 2), m(1, 0));
}

inline double wrap_pi(double angle) {
    angle = std::fmod(angle + kPi, 2.0 * kPi);
    if (angle < 0.0) {
        angle += 2.0 * kPi;
    }
    return angle - kPi;
}

// Rodrigues formula with a series fallback near zero.
inline Eigen::Matrix3d so3_exp(const Eigen::Vector3d &theta) {
    const double n = theta.norm();
    const Eigen::Matrix3d t = skew(theta);
    double a, b;
    if (n < 1e-8) {
        const double n2 = n * n;
        a = 1.0 - n2 / 6.0;
        b = 0.5 - n2 / 24.0;
    } else {
        a = std::sin(n) / n;
        b = (1.0 - std::cos(n)) / (n * n);
    }
    return Eigen::Matrix3d::Identity() + a * t + b * t * t;
}

// Principal-branch logarithm. Near phi = pi the antisymmetric part loses
// the axis, so it is recovered from the dominant column of R + I instead.
inline Eigen::Vector3d so3_log(const Eigen::Matrix3d &R) {
    const double c = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
    const double phi = std::acos(c);
    const Eigen::Vector3d w = vee(R - R.transpose());

    if (phi < 1e-6) {
        return (0.5 + phi * phi / 12.0) * w;
    }
    if (kPi - phi < 1e-4) {
        // Axis from the symmetric part: (R + R^T)/2 - cos(phi) I equals
        // (1 - cos(phi)) n n^T, which stays well conditioned at pi.
        const Eigen::Matrix3d B =
            0.5 * (R + R.transpose()) - c * Eigen::Matrix3d::Identity();
        const double scale = 1.0 - c;
        int k;
        B.diagonal().maxCoeff(&k);
        Eigen::Vector3d axis;
        axis(k) = std::sqrt(std::max(0.0, B(k, k) / scale));
        for (int j = 0; j < 3; ++j) {
            if (j != k) {
                axis(j) = B(k, j) / (scale * axis(k));
            }
        }
        axis.normalize();
        if (axis.dot(w) < 0.0) {
            axis = -axis;
        }
        return phi * axis;
    }
    return (phi / (2.0 * std::sin(phi))) * w;
}

// A(theta) from the attitude-error kinematics; equals the left Jacobian
// of SO(3) at theta.
inline Eigen::Matrix3d so3_a_matrix(const Eigen::Vector3d &theta) {
    const double n = theta.norm();
    const Eigen::Matrix3d t = skew(theta);
    double a, b;
    if (n < 1e-6) {
        a = 0.5 - n * n / 24.0;
        b = 1.0 / 6.0 - n * n / 120.0;
    } else {
        a = (1.0 - std::cos(n)) / (n * n);
        b = (1.0 - std::sin(n) / n) / (n * n);
    }
    return Eigen::Matrix3d::Identity() + a * t + b * t * t;
}

// Inverse transpose of A(theta): maps -Rr^T R w + w_r to d/dt Log(R^T Rr).
inline Eigen::Matrix3d so3_a_inv_t(const Eigen::Vector3d &theta) {
    const double n = theta.norm();
    const Eigen::Matrix3d t = skew(theta);
    double b;
    if (n < 1e-6) {
        b = 1.0 / 12.0 + n * n / 720.0;
    } else {
        const double alpha = 0.5 * n / std::tan(0.5 * n);
        b = (1.0 - alpha) / (n * n);
    }
    return Eigen::Matrix3d::Identity() + 0.5 * t + b * t * t;
}

// Nearest rotation matrix in the Frobenius sense (polar factor).
inline Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d &m) {
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0.0) {
        Eigen::Matrix3d u = svd.matrixU();
        u.col(2) *= -1.0;
        r = u * svd.matrixV().transpose();
    }
    return r;
}

} // namespace tailsitter

#endif
