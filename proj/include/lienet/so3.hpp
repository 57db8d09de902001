#pragma once

// Singularity-guarded primitives on the rotation group SO(3): axis-angle
// conversions, log/exp maps, tangent projection, nearest-rotation retraction,
// Haar-uniform sampling and geodesic interpolation. Everything here is a pure
// function over Eigen value types; all rotation-returning operations keep
// their output orthonormal with det +1.

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <numbers>
#include <random>

#include "lienet/errors.hpp"

namespace lienet {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

inline constexpr double kPi = std::numbers::pi;

/// Orthonormality / determinant tolerance for rotation validity checks.
inline constexpr double kOrthTol = 1e-9;

/// Angle guard delta around the theta=0 and theta=pi singularities.
inline constexpr double kAngleEps = 1e-6;

/// Below this angle the theta/(2 sin theta) family switches to its series.
inline constexpr double kSeriesCutoff = 1e-3;

/// Axis-angle pair: unit axis, angle in [0, pi]. Zero-angle rotations use the
/// canonical placeholder axis (0,0,1).
struct AxisAngle {
    Vec3 axis{0.0, 0.0, 1.0};
    double angle = 0.0;
};

/// Skew-symmetric matrix from its 3 independent entries: skew3(v) * u = v x u.
inline Mat3 skew3(const Vec3& v) {
    Mat3 s;
    // clang-format off
    s <<   0.0, -v.z(),  v.y(),
         v.z(),    0.0, -v.x(),
        -v.y(),  v.x(),    0.0;
    // clang-format on
    return s;
}

/// Inverse of skew3 (reads the three independent entries).
inline Vec3 vee(const Mat3& s) {
    return Vec3(s(2, 1), s(0, 2), s(1, 0));
}

/// Frobenius norm of m^T m - I.
inline double orthogonality_drift(const Mat3& m) {
    return (m.transpose() * m - Mat3::Identity()).norm();
}

inline bool is_rotation(const Mat3& m, double tol = kOrthTol) {
    return orthogonality_drift(m) < tol && std::abs(m.determinant() - 1.0) < tol;
}

/// Rotation angle in [0, pi] via arccos((trace - 1)/2). The argument is
/// clamped to [-1, 1] so round-off just outside the manifold cannot NaN.
inline double rotation_angle(const Mat3& r) {
    const double c = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
    return std::acos(c);
}

/// Rotation axis as a unit vector. Three branches: the (r - r^T) formula away
/// from the singularities, the placeholder (0,0,1) at theta ~ 0, and the
/// +1-eigenvector of r near theta ~ pi (sign fixed by the first nonzero
/// component positive).
inline Vec3 rotation_axis(const Mat3& r) {
    const double theta = rotation_angle(r);
    if (theta <= kAngleEps) {
        return Vec3(0.0, 0.0, 1.0);
    }
    if (theta >= kPi - kAngleEps) {
        // r is nearly symmetric here; the axis is the eigenvector of the
        // symmetric part for the largest eigenvalue (+1).
        Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (r + r.transpose()));
        Vec3 axis = es.eigenvectors().col(2);
        for (int i = 0; i < 3; ++i) {
            if (std::abs(axis[i]) > 1e-12) {
                if (axis[i] < 0.0) axis = -axis;
                break;
            }
        }
        return axis.normalized();
    }
    // (r - r^T)/2 has magnitude sin(theta); normalizing instead of dividing
    // by the recovered sin keeps the axis unit-length right up to the guards.
    const Vec3 v(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
    return v.normalized();
}

inline AxisAngle axis_angle_from_rotation(const Mat3& r) {
    const double theta = rotation_angle(r);
    if (theta <= kAngleEps) {
        return AxisAngle{Vec3(0.0, 0.0, 1.0), theta};
    }
    return AxisAngle{rotation_axis(r).normalized(), theta};
}

/// Rodrigues formula: R = I + sin(t) K + (1 - cos(t)) K^2 with K = skew3(axis).
inline Mat3 rotation_from_axis_angle(const AxisAngle& aa) {
    const Mat3 k = skew3(aa.axis);
    return Mat3::Identity() + std::sin(aa.angle) * k +
           (1.0 - std::cos(aa.angle)) * (k * k);
}

/// theta / (2 sin theta), with the series 1/2 + t^2/12 + 7 t^4/720 below the
/// cutoff so the theta -> 0 limit stays smooth.
inline double log_coeff(double theta) {
    if (theta < kSeriesCutoff) {
        const double t2 = theta * theta;
        return 0.5 + t2 / 12.0 + 7.0 * t2 * t2 / 720.0;
    }
    return theta / (2.0 * std::sin(theta));
}

/// Group logarithm: log(R) = theta/(2 sin theta) * (R - R^T), skew-symmetric.
/// Throws NearPiSingularity for theta >= pi - delta; callers that must be
/// total use the axis-angle fallback instead.
inline Mat3 log_map(const Mat3& r) {
    const double theta = rotation_angle(r);
    if (theta >= kPi - kAngleEps) {
        throw NearPiSingularity("log_map: rotation angle within guard of pi");
    }
    return log_coeff(theta) * (r - r.transpose());
}

/// Group exponential of a skew matrix (Rodrigues on the unnormalized form,
/// series-guarded near zero).
inline Mat3 exp_map(const Mat3& a) {
    const Vec3 v = vee(a);
    const double theta = v.norm();
    double c1, c2;  // sin t / t, (1 - cos t) / t^2
    if (theta < kSeriesCutoff) {
        const double t2 = theta * theta;
        c1 = 1.0 - t2 / 6.0 + t2 * t2 / 120.0;
        c2 = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
    } else {
        c1 = std::sin(theta) / theta;
        c2 = (1.0 - std::cos(theta)) / (theta * theta);
    }
    return Mat3::Identity() + c1 * a + c2 * (a * a);
}

/// Frobenius inner product trace(a^T b).
inline double frobenius_inner(const Mat3& a, const Mat3& b) {
    return a.cwiseProduct(b).sum();
}

/// Nearest rotation in Frobenius norm: U V^T from the SVD, last column of U
/// negated when the product lands on det -1. Throws DegenerateMatrix when the
/// input is rank-deficient.
inline Mat3 project_to_rotation(const Mat3& m) {
    Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.singularValues()(2) <= 1e-12) {
        throw DegenerateMatrix("project_to_rotation: rank-deficient input");
    }
    Mat3 u = svd.matrixU();
    const Mat3 vt = svd.matrixV().transpose();
    if ((u * vt).determinant() < 0.0) {
        u.col(2) = -u.col(2);
    }
    return u * vt;
}

/// Orthogonal projection of an ambient gradient onto the tangent space at w:
/// w * skew_part(w^T g). The result T satisfies w^T T skew-symmetric.
inline Mat3 tangent_project(const Mat3& w, const Mat3& g) {
    const Mat3 x = w.transpose() * g;
    return w * (0.5 * (x - x.transpose()));
}

/// Haar-uniform rotation: QR of a 3x3 standard-Gaussian matrix with the
/// R-diagonal sign correction, one column negated if the determinant is -1.
inline Mat3 random_rotation(std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Mat3 a;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) a(i, j) = gauss(rng);
    Eigen::HouseholderQR<Mat3> qr(a);
    Mat3 q = qr.householderQ();
    const Mat3 r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < 3; ++i) {
        if (r(i, i) < 0.0) q.col(i) = -q.col(i);
    }
    if (q.determinant() < 0.0) q.col(2) = -q.col(2);
    return q;
}

/// Geodesic from r0 to r1: exp(t * log(r1 r0^T)) r0. Propagates
/// NearPiSingularity when the two rotations are a half-turn apart.
inline Mat3 geodesic_interpolate(const Mat3& r0, const Mat3& r1, double t) {
    return exp_map(t * log_map(r1 * r0.transpose())) * r0;
}

/// Geodesic distance d(r0, r1) = angle of the relative rotation.
inline double geodesic_distance(const Mat3& r0, const Mat3& r1) {
    return rotation_angle(r1 * r0.transpose());
}

}  // namespace lienet
