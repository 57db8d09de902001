#pragma once

// Shared helpers for the test suites: canonical rotations, random sampling,
// small statistics utilities used by the distribution checks, and a scratch
// directory guard for the file-format tests.

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "lienet/so3.hpp"

namespace lienet::testing {

inline Mat3 rot_x(double t) {
    Mat3 r;
    r << 1, 0, 0, 0, std::cos(t), -std::sin(t), 0, std::sin(t), std::cos(t);
    return r;
}

inline Mat3 rot_y(double t) {
    Mat3 r;
    r << std::cos(t), 0, std::sin(t), 0, 1, 0, -std::sin(t), 0, std::cos(t);
    return r;
}

inline Mat3 rot_z(double t) {
    Mat3 r;
    r << std::cos(t), -std::sin(t), 0, std::sin(t), std::cos(t), 0, 0, 0, 1;
    return r;
}

inline Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Vec3 v;
    do {
        v = Vec3(g(rng), g(rng), g(rng));
    } while (v.norm() < 1e-6);
    return v.normalized();
}

inline Mat3 random_matrix(std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Mat3 m;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) m(i, j) = g(rng);
    return m;
}

inline Mat3 random_skew(std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    return skew3(Vec3(g(rng), g(rng), g(rng)));
}

/// Rotation angle of a Haar-uniform quaternion sample; independent oracle for
/// the angle density (1 - cos t) / pi.
inline double haar_angle_via_quaternion(std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    double w = g(rng), x = g(rng), y = g(rng), z = g(rng);
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    const double vnorm = std::sqrt(x * x + y * y + z * z) / n;
    return 2.0 * std::atan2(vnorm, std::abs(w) / n);
}

/// Pearson chi-square statistic of observed counts against expected
/// probabilities (one-sample, no estimated parameters).
inline double chi_square(const std::vector<int>& observed,
                         const std::vector<double>& expected_prob, int total) {
    double stat = 0.0;
    for (size_t i = 0; i < observed.size(); ++i) {
        const double e = expected_prob[i] * total;
        const double d = observed[i] - e;
        stat += d * d / e;
    }
    return stat;
}

/// Exact bin probabilities of the Haar angle density (1 - cos t)/pi on
/// equal-width bins over [0, pi]: P([a,b]) = (b - a - sin b + sin a)/pi.
inline std::vector<double> haar_angle_bin_probs(int bins) {
    std::vector<double> p(bins);
    for (int i = 0; i < bins; ++i) {
        const double a = kPi * i / bins;
        const double b = kPi * (i + 1) / bins;
        p[i] = (b - a - std::sin(b) + std::sin(a)) / kPi;
    }
    return p;
}

/// Creates a fresh scratch directory; removed on destruction.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        static std::atomic<int> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("lienet_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const int n = static_cast<int>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        const double lx = std::log(x[i]);
        const double ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace lienet::testing
