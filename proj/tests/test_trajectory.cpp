#include "doctest.h"

#include <cstdio>
#include <filesystem>

#include "gpff/trajectory.hpp"

using namespace gpff;

namespace {

constexpr double kTs = 1e-3;

Reference unit_move(double duration = 0.12, int order = 3, double ts = kTs) {
    return polynomial_reference(Vector::Zero(1), Vector::Ones(1), duration, ts, order);
}

}  // namespace

TEST_CASE("constant reference when start equals end") {
    const auto r = polynomial_reference(Vector::Constant(1, 0.3), Vector::Constant(1, 0.3), 0.05,
                                        kTs, 3);
    CHECK((r.samples.array() - 0.3).abs().maxCoeff() == 0.0);
}

TEST_CASE("profile hits its endpoints and is rest-to-rest") {
    for (int order : {2, 3}) {
        const auto r = unit_move(0.1, order);
        CHECK(r.length() >= 4);
        CHECK(r.samples(0, 0) == 0.0);
        CHECK(r.samples(r.length() - 1, 0) == doctest::Approx(1.0).epsilon(1e-12));
        // first two and last two samples equal, exactly
        CHECK(r.samples(0, 0) == r.samples(1, 0));
        CHECK(r.samples(r.length() - 1, 0) == r.samples(r.length() - 2, 0));
        // monotone increasing between them
        for (int k = 1; k < r.length(); ++k) CHECK(r.samples(k, 0) >= r.samples(k - 1, 0));
    }
}

TEST_CASE("jerk-limited profile has an exact midpoint sample") {
    const auto r = unit_move(0.1, 3);
    const int center = r.motion_start + (r.motion_length - 4) / 2;
    CHECK(r.samples(center, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("integrating the acceleration column recovers the displacement") {
    // duration 0.1 s at Ts = 1e-4: double cumulative sum of the backward-difference
    // acceleration must reproduce the unit end displacement.
    const auto r = unit_move(0.1, 3, 1e-4);
    const Vector acc = second_backward_difference(r.samples.col(0), 1e-4);
    double velocity = 0.0, displacement = 0.0;
    for (Eigen::Index k = 0; k < acc.size(); ++k) {
        velocity += acc(k) * 1e-4;
        displacement += velocity * 1e-4;
    }
    CHECK(displacement == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("too short durations are rejected") {
    CHECK_THROWS_AS(unit_move(3.0 * kTs, 3), ConfigError);
    CHECK_THROWS_AS(unit_move(6.0 * kTs, 3), ConfigError);  // below 4 jerk samples + rest
    CHECK_THROWS_AS(unit_move(0.1, 4), ConfigError);
    CHECK_THROWS_AS(unit_move(0.1, 1), ConfigError);
}

TEST_CASE("multi-axis references scale per axis") {
    Vector start(2), end(2);
    start << 0.0, 1.0;
    end << 0.01, 1.0;  // second axis parked
    const auto r = polynomial_reference(start, end, 0.08, kTs, 3);
    CHECK(r.axis_count() == 2);
    CHECK(r.samples(r.length() - 1, 0) == doctest::Approx(0.01));
    CHECK((r.samples.col(1).array() - 1.0).abs().maxCoeff() == 0.0);
}

TEST_CASE("velocity column of a ramp is one after the padded start") {
    Reference r;
    r.sample_time = kTs;
    r.samples.resize(32, 1);
    for (int k = 0; k < 32; ++k) r.samples(k, 0) = k * kTs;
    r.start = Vector::Zero(1);
    r.end = Vector::Constant(1, 31 * kTs);

    const auto basis = build_basis(r, {BasisDescriptor::velocity()});
    CHECK(basis.columns(0, 0) == 0.0);  // padding r(-1) = r(0)
    for (int k = 1; k < 32; ++k) CHECK(basis.columns(k, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("acceleration column of a quadratic is the analytic second difference") {
    Reference r;
    r.sample_time = kTs;
    r.samples.resize(48, 1);
    for (int k = 0; k < 48; ++k) r.samples(k, 0) = 0.5 * k * k * kTs * kTs;
    r.start = Vector::Zero(1);
    r.end = r.samples.row(47).transpose();

    const auto basis = build_basis(r, {BasisDescriptor::acceleration()});
    for (int k = 2; k < 48; ++k) CHECK(basis.columns(k, 0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("constant reference produces all-zero difference columns") {
    const auto r = polynomial_reference(Vector::Constant(1, 2.0), Vector::Constant(1, 2.0), 0.05,
                                        kTs, 3);
    const auto basis = build_basis(
        r, {BasisDescriptor::velocity(), BasisDescriptor::acceleration()});
    CHECK(basis.columns.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("basis map is linear in the parameters") {
    const auto r = unit_move();
    const auto basis = build_basis(
        r, {BasisDescriptor::acceleration(), BasisDescriptor::velocity()});
    Vector t1(2), t2(2);
    t1 << 1.3, -0.4;
    t2 << -0.2, 2.2;
    const Vector sum = basis.feedforward(t1 + t2);
    const Vector parts = basis.feedforward(t1) + basis.feedforward(t2);
    const double scale = std::max(1.0, parts.cwiseAbs().maxCoeff());
    CHECK((sum - parts).cwiseAbs().maxCoeff() < 1e-14 * scale);
}

TEST_CASE("acceleration-scaled basis reproduces mass feedforward") {
    const auto r = unit_move();
    const auto basis = build_basis(
        r, {BasisDescriptor::acceleration(), BasisDescriptor::velocity()});
    Vector theta(2);
    theta << 1.0, 0.0;
    const Vector f = basis.feedforward(theta);
    const Vector rdd = second_backward_difference(r.samples.col(0), kTs);
    CHECK((f - rdd).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("rest-to-rest references give basis columns that start and end at zero") {
    const auto r = unit_move();
    const auto basis = build_basis(r, {BasisDescriptor::velocity(), BasisDescriptor::acceleration(),
                                       BasisDescriptor::sign_velocity()});
    const int n = r.length();
    for (Eigen::Index c = 0; c < basis.columns.cols(); ++c) {
        CHECK(basis.columns(0, c) == 0.0);
        CHECK(basis.columns(1, c) == 0.0);
        CHECK(basis.columns(n - 1, c) == 0.0);
    }
}

TEST_CASE("basis descriptor errors") {
    const auto r = unit_move();
    CHECK_THROWS_AS(build_basis(r, {}), ConfigError);
    CHECK_THROWS_AS(parse_basis_kind("jerk"), ConfigError);
    CHECK_THROWS_AS(BasisDescriptor::custom("broken", nullptr), ConfigError);
    CHECK_THROWS_AS(build_basis(r, {BasisDescriptor::velocity()}, 3), ConfigError);
}

TEST_CASE("sign of velocity is ternary and follows the move direction") {
    const auto r = polynomial_reference(Vector::Ones(1), Vector::Zero(1), 0.08, kTs, 3);
    const auto basis = build_basis(r, {BasisDescriptor::sign_velocity()});
    CHECK(basis.columns.col(0).minCoeff() == -1.0);
    CHECK(basis.columns.col(0).maxCoeff() == 0.0);
}

TEST_CASE("reference CSV round trip") {
    const auto r = unit_move(0.06);
    const std::string path =
        (std::filesystem::temp_directory_path() / "gpff_reference_roundtrip.csv").string();
    write_reference_csv(path, r);
    const Reference back = read_reference_csv(path);
    CHECK(back.sample_time == doctest::Approx(r.sample_time).epsilon(1e-12));
    CHECK(back.length() == r.length());
    CHECK((back.samples - r.samples).cwiseAbs().maxCoeff() == 0.0);
    std::remove(path.c_str());
}
