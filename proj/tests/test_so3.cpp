#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>

#include "helpers.hpp"
#include "lienet/so3.hpp"

using namespace lienet;
using namespace lienet::testing;
using Catch::Matchers::WithinAbs;

TEST_CASE("rotation_from_axis_angle canonical cases") {
    const Mat3 id = rotation_from_axis_angle({Vec3(0, 0, 1), 0.0});
    REQUIRE((id - Mat3::Identity()).norm() < 1e-15);

    const Mat3 rz = rotation_from_axis_angle({Vec3(0, 0, 1), kPi / 2});
    Mat3 expect;
    expect << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    REQUIRE((rz - expect).norm() < 1e-12);
    REQUIRE_THAT(rotation_angle(rz), WithinAbs(kPi / 2, 1e-9));
}

TEST_CASE("axis-angle round trip over random samples") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ang(1e-4, kPi - 0.01);
    for (int i = 0; i < 1000; ++i) {
        const AxisAngle aa{random_unit(rng), ang(rng)};
        const Mat3 r = rotation_from_axis_angle(aa);
        REQUIRE(is_rotation(r));
        const AxisAngle back = axis_angle_from_rotation(r);
        REQUIRE_THAT(back.angle, WithinAbs(aa.angle, 1e-8));
        REQUIRE((back.axis - aa.axis).norm() < 1e-8);
    }
}

TEST_CASE("rotation_angle canonical and clamped") {
    REQUIRE_THAT(rotation_angle(Mat3::Identity()), WithinAbs(0.0, 0.0));
    REQUIRE_THAT(rotation_angle(rot_z(kPi / 2)), WithinAbs(kPi / 2, 1e-12));

    // Trace marginally above 3 must clamp to angle 0, not NaN.
    Mat3 m = Mat3::Identity();
    m(0, 0) += 1e-15;
    const double a = rotation_angle(m);
    REQUIRE(std::isfinite(a));
    REQUIRE_THAT(a, WithinAbs(0.0, 1e-7));
}

TEST_CASE("rotation_axis branches") {
    REQUIRE((rotation_axis(rot_z(kPi / 2)) - Vec3(0, 0, 1)).norm() < 1e-12);
    REQUIRE((rotation_axis(Mat3::Identity()) - Vec3(0, 0, 1)).norm() == 0.0);

    SECTION("pi rotation falls back to the +1 eigenvector") {
        const Mat3 r = rot_x(kPi);
        const Vec3 axis = rotation_axis(r);
        REQUIRE((axis - Vec3(1, 0, 0)).norm() < 1e-9);

        // Independent oracle: eigenvector of r for eigenvalue +1.
        Eigen::EigenSolver<Mat3> es(r);
        int best = 0;
        for (int i = 1; i < 3; ++i) {
            if (std::abs(es.eigenvalues()[i].real() - 1.0) <
                std::abs(es.eigenvalues()[best].real() - 1.0))
                best = i;
        }
        Vec3 oracle = es.eigenvectors().col(best).real().normalized();
        if (oracle.dot(axis) < 0) oracle = -oracle;
        REQUIRE((axis - oracle).norm() < 1e-9);
    }

    SECTION("random near-pi rotations recover their axis") {
        std::mt19937_64 rng(11);
        for (int i = 0; i < 200; ++i) {
            const Vec3 u = random_unit(rng);
            const Mat3 r = rotation_from_axis_angle({u, kPi});
            Vec3 axis = rotation_axis(r);
            if (axis.dot(u) < 0) axis = -axis;  // axis at pi is defined up to sign
            REQUIRE((axis - u).norm() < 1e-7);
        }
    }
}

TEST_CASE("log_map values and guards") {
    REQUIRE(log_map(Mat3::Identity()).norm() == 0.0);

    const Mat3 l = log_map(rot_z(kPi / 2));
    Mat3 expect;
    expect << 0, -kPi / 2, 0, kPi / 2, 0, 0, 0, 0, 0;
    REQUIRE((l - expect).norm() < 1e-12);

    SECTION("series and direct branch agree at the cutoff scale") {
        std::mt19937_64 rng(3);
        for (int i = 0; i < 50; ++i) {
            const double theta = 1e-5;
            const Mat3 r = rotation_from_axis_angle({random_unit(rng), theta});
            const Mat3 series = log_map(r);
            const Mat3 direct = theta / (2.0 * std::sin(theta)) * (r - r.transpose());
            REQUIRE((series - direct).norm() < 1e-12);
        }
    }

    SECTION("near-pi throws") {
        REQUIRE_THROWS_AS(log_map(rot_x(kPi)), NearPiSingularity);
        REQUIRE_THROWS_AS(log_map(rot_x(kPi - 1e-7)), NearPiSingularity);
        REQUIRE_NOTHROW(log_map(rot_x(kPi - 1e-3)));
    }
}

TEST_CASE("exp_map values and round trips") {
    REQUIRE((exp_map(Mat3::Zero()) - Mat3::Identity()).norm() == 0.0);
    REQUIRE((exp_map(skew3(Vec3(0, 0, kPi / 2))) - rot_z(kPi / 2)).norm() < 1e-12);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> mag(0.0, kPi - 0.01);
    for (int i = 0; i < 1000; ++i) {
        const Mat3 a = skew3(mag(rng) * random_unit(rng));
        const Mat3 r = exp_map(a);
        REQUIRE(is_rotation(r));
        REQUIRE((log_map(r) - a).norm() < 1e-8);
    }
    for (int i = 0; i < 1000; ++i) {
        const Mat3 r = rotation_from_axis_angle({random_unit(rng), mag(rng)});
        REQUIRE((exp_map(log_map(r)) - r).norm() < 1e-8);
    }
}

TEST_CASE("frobenius_inner identities") {
    std::mt19937_64 rng(13);
    const Mat3 a = random_skew(rng);
    REQUIRE(frobenius_inner(a, Mat3::Zero()) == 0.0);
    REQUIRE(frobenius_inner(a, a) >= 0.0);
    REQUIRE_THAT(frobenius_inner(a, a), WithinAbs(a.squaredNorm(), 1e-12));

    // For skew matrices built from vectors u, v: <skew(u), skew(v)> = 2 u.v
    for (int i = 0; i < 100; ++i) {
        const Vec3 u = random_unit(rng) * 2.0;
        const Vec3 v = random_unit(rng) * 0.7;
        REQUIRE_THAT(frobenius_inner(skew3(u), skew3(v)),
                     WithinAbs(2.0 * u.dot(v), 1e-12));
    }

    // symmetry and bilinearity
    const Mat3 b = random_skew(rng);
    const Mat3 c = random_skew(rng);
    REQUIRE_THAT(frobenius_inner(a, b), WithinAbs(frobenius_inner(b, a), 1e-14));
    REQUIRE_THAT(frobenius_inner(a, 2.0 * b + c),
                 WithinAbs(2.0 * frobenius_inner(a, b) + frobenius_inner(a, c), 1e-12));
}

TEST_CASE("project_to_rotation") {
    std::mt19937_64 rng(17);

    SECTION("idempotent on the manifold") {
        for (int i = 0; i < 100; ++i) {
            const Mat3 r = random_rotation(rng);
            REQUIRE((project_to_rotation(r) - r).norm() < 1e-12);
        }
    }

    SECTION("positive scalar multiples of the identity") {
        REQUIRE((project_to_rotation(2.0 * Mat3::Identity()) - Mat3::Identity()).norm() <
                1e-12);
    }

    SECTION("negative-determinant inputs still map to det +1") {
        int negatives = 0;
        for (int i = 0; i < 200; ++i) {
            Mat3 m = random_matrix(rng);
            if (std::abs(m.determinant()) < 1e-6) continue;
            if (m.determinant() > 0) m.col(0) = -m.col(0);
            ++negatives;
            const Mat3 r = project_to_rotation(m);
            REQUIRE(is_rotation(r));
            REQUIRE(r.determinant() > 0.0);
        }
        REQUIRE(negatives > 100);
    }

    SECTION("nearest-rotation against an SVD oracle") {
        // Brute-force check: the projection beats random rotations in
        // Frobenius distance.
        for (int i = 0; i < 20; ++i) {
            const Mat3 m = random_matrix(rng);
            if (std::abs(m.determinant()) < 1e-3) continue;
            const Mat3 p = project_to_rotation(m);
            const double d0 = (m - p).norm();
            for (int j = 0; j < 50; ++j) {
                REQUIRE(d0 <= (m - random_rotation(rng)).norm() + 1e-12);
            }
        }
    }

    SECTION("rank-deficient input throws") {
        Mat3 m = Mat3::Zero();
        m(0, 0) = 1.0;
        m(1, 1) = 1.0;
        REQUIRE_THROWS_AS(project_to_rotation(m), DegenerateMatrix);
    }
}

TEST_CASE("tangent_project") {
    std::mt19937_64 rng(19);
    const Mat3 w = random_rotation(rng);

    SECTION("tangent vectors are fixed points") {
        const Mat3 t = w * random_skew(rng);
        REQUIRE((tangent_project(w, t) - t).norm() < 1e-12);
    }

    SECTION("normal space is annihilated") {
        const Mat3 m = random_matrix(rng);
        const Mat3 y = 0.5 * (m + m.transpose());
        REQUIRE(tangent_project(w, w * y).norm() < 1e-12);
    }

    SECTION("idempotent and linear") {
        const Mat3 g = random_matrix(rng);
        const Mat3 h = random_matrix(rng);
        const Mat3 once = tangent_project(w, g);
        REQUIRE((tangent_project(w, once) - once).norm() < 1e-12);
        const Mat3 lin = tangent_project(w, 2.0 * g + 3.0 * h);
        REQUIRE((lin - 2.0 * tangent_project(w, g) - 3.0 * tangent_project(w, h)).norm() <
                1e-12);
    }

    SECTION("output is tangent: w^T T skew-symmetric") {
        const Mat3 t = tangent_project(w, random_matrix(rng));
        const Mat3 x = w.transpose() * t;
        REQUIRE((x + x.transpose()).norm() < 1e-12);
    }
}

TEST_CASE("random_rotation determinism and validity") {
    std::mt19937_64 a(42), b(42);
    const Mat3 r1 = random_rotation(a);
    const Mat3 r2 = random_rotation(b);
    REQUIRE(r1 == r2);  // bitwise under equal seeds
    for (int i = 0; i < 1000; ++i) {
        REQUIRE(is_rotation(random_rotation(a)));
    }
}

TEST_CASE("random_rotation matches the Haar angle density") {
    // One-sample chi-square at the 1% level, 12 bins => dof 11, critical
    // value 24.725. The quaternion sampler is the independent oracle that
    // validates the analytic bin probabilities first.
    const int n = 10000;
    const int bins = 12;
    const auto probs = haar_angle_bin_probs(bins);
    const double critical = 24.725;

    std::mt19937_64 rng(2024);
    std::vector<int> oracle_counts(bins, 0);
    for (int i = 0; i < n; ++i) {
        const double t = haar_angle_via_quaternion(rng);
        oracle_counts[std::min(bins - 1, static_cast<int>(t / kPi * bins))]++;
    }
    REQUIRE(chi_square(oracle_counts, probs, n) < critical);

    std::vector<int> counts(bins, 0);
    for (int i = 0; i < n; ++i) {
        const double t = rotation_angle(random_rotation(rng));
        counts[std::min(bins - 1, static_cast<int>(t / kPi * bins))]++;
    }
    REQUIRE(chi_square(counts, probs, n) < critical);
}

TEST_CASE("geodesic_interpolate") {
    std::mt19937_64 rng(23);
    const Mat3 r = random_rotation(rng);
    for (const double t : {0.0, 0.3, 1.0}) {
        REQUIRE((geodesic_interpolate(r, r, t) - r).norm() < 1e-12);
    }

    SECTION("endpoints and midpoint") {
        const Mat3 r0 = random_rotation(rng);
        const Mat3 r1 = random_rotation(rng);
        REQUIRE((geodesic_interpolate(r0, r1, 0.0) - r0).norm() < 1e-9);
        REQUIRE((geodesic_interpolate(r0, r1, 1.0) - r1).norm() < 1e-9);
        REQUIRE((geodesic_interpolate(Mat3::Identity(), rot_z(kPi / 2), 0.5) -
                 rot_z(kPi / 4))
                    .norm() < 1e-12);
    }

    SECTION("distance additivity along the geodesic") {
        for (int i = 0; i < 200; ++i) {
            const Mat3 r0 = random_rotation(rng);
            const Mat3 r1 = random_rotation(rng);
            if (geodesic_distance(r0, r1) > kPi - 0.05) continue;
            const Mat3 mid = geodesic_interpolate(r0, r1, 0.5);
            REQUIRE_THAT(geodesic_distance(r0, mid) + geodesic_distance(mid, r1),
                         WithinAbs(geodesic_distance(r0, r1), 1e-8));
        }
    }
}

TEST_CASE("manifold closure across operations") {
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> mag(0.0, kPi - 0.05);
    for (int i = 0; i < 2000; ++i) {
        const Mat3 a = random_rotation(rng);
        const Mat3 b = exp_map(skew3(mag(rng) * random_unit(rng)));
        const Mat3 c = geodesic_interpolate(a, b, 0.37);
        const Mat3 d = project_to_rotation(random_matrix(rng) + 3.0 * Mat3::Identity());
        for (const Mat3& m : {a, b, c, d}) {
            REQUIRE(orthogonality_drift(m) < 1e-9);
            REQUIRE(m.determinant() > 0.0);
        }
    }
}

TEST_CASE("clamping totality near the manifold") {
    std::mt19937_64 rng(31);
    for (int i = 0; i < 500; ++i) {
        Mat3 r = random_rotation(rng);
        r += 1e-10 * random_matrix(rng);  // within the orthogonality tolerance
        const double a = rotation_angle(r);
        REQUIRE(std::isfinite(a));
        REQUIRE(a >= 0.0);
        REQUIRE(a <= kPi);
    }
}

TEST_CASE("retraction is first-order along tangent directions") {
    // || G(w + eps T) - (w + eps T) || should shrink like eps^2; the fitted
    // log-log slope over eps in {1e-2 .. 1e-5} must be >= 1.9.
    std::mt19937_64 rng(37);
    const std::vector<double> eps = {1e-2, 1e-3, 1e-4, 1e-5};
    for (int trial = 0; trial < 10; ++trial) {
        const Mat3 w = random_rotation(rng);
        const Mat3 t = w * random_skew(rng);
        std::vector<double> residual;
        for (const double e : eps) {
            const Mat3 stepped = w + e * t;
            residual.push_back((project_to_rotation(stepped) - stepped).norm());
        }
        REQUIRE(loglog_slope(eps, residual) >= 1.9);
    }
}
