#include "sdhnn/attractor.hpp"
#include "sdhnn/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace sdhnn;

namespace {

constexpr double kDt = 1e-3;

HistorySegment constant(double a, double b, double dt = kDt) {
    Vector v(2);
    v << a, b;
    return HistorySegment::constant(v, 0.1, dt);
}

NetworkParams linear_only() {
    NetworkParams p = benchmark_network();
    p.H.setZero();
    p.B.setZero();
    p.Sigma.setZero();
    return p;
}

} // namespace

TEST_CASE("pullback with a single initial segment has zero diameter") {
    const BrownianPath path = sample_path(2, kDt, -4.2, 0.0, 1);
    const PullbackRun run = pullback_endpoints(benchmark_network(), path, {1.0, 2.0, 4.0}, {constant(1, 2)}, kDt);
    CHECK(run.diameters == std::vector<double>{0.0, 0.0, 0.0});
    CHECK(run.endpoints.size() == 3);
    CHECK(run.endpoints[0].size() == 1);
    CHECK(run.seed == 1u);
}

TEST_CASE("pullback of the linear decay") {
    const NetworkParams p = linear_only();
    const BrownianPath path = sample_path(2, kDt, -4.2, 0.0, 1);
    const std::vector<double> times{1.0, 2.0, 3.0, 4.0};
    const PullbackRun run = pullback_endpoints(p, path, times, {constant(1, 2), constant(-3, 0.5)}, kDt);
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double factor = std::pow(1.0 - 5.0 * kDt, times[i] / kDt);  // Euler's e^{-5 t}
        CHECK(run.endpoints[i][0].head()(1) == doctest::Approx(2.0 * factor).epsilon(1e-9));
        CHECK(std::abs(factor - std::exp(-5.0 * times[i])) <= 0.1 * std::exp(-5.0 * times[i]));
        if (i > 0) CHECK(run.diameters[i] / run.diameters[i - 1] == doctest::Approx(std::pow(1.0 - 5.0 * kDt, 1000)).epsilon(1e-6));
    }
}

TEST_CASE("benchmark pullback contracts the initial set") {
    const NetworkParams p = benchmark_network();
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const BrownianPath path = sample_path(2, kDt, -8.1, 0.0, seed);
        const PullbackRun run = pullback_endpoints(p, path, {2.0, 4.0, 6.0, 8.0}, {constant(0.1, 0.2), constant(10, 20)}, kDt);
        CHECK(run.diameters.back() < 1e-6);
        for (std::size_t i = 1; i < run.diameters.size(); ++i) {
            CHECK(run.diameters[i] >= 0.0);
            CHECK(run.diameters[i] <= 1.05 * run.diameters[i - 1]);
        }
    }
}

TEST_CASE("pullback needs the path to reach back far enough") {
    const BrownianPath path = sample_path(2, kDt, -2.0, 0.0, 1);
    CHECK_THROWS_AS(pullback_endpoints(benchmark_network(), path, {2.0}, {constant(1, 1)}, kDt), ConfigError);
    CHECK_THROWS_AS(pullback_endpoints(benchmark_network(), path, {1.0, 0.5}, {constant(1, 1)}, kDt), ConfigError);
    CHECK_THROWS_AS(pullback_endpoints(benchmark_network(), path, {1.0}, {}, kDt), ConfigError);
}

TEST_CASE("pulling back over omega equals running forward over theta_{-t} omega") {
    const NetworkParams p = benchmark_network();
    const BrownianPath path = sample_path(2, kDt, -3.2, 0.0, 5);
    const HistorySegment phi = constant(10, 20);
    const Trajectory back = integrate_direct(p, path, phi, kDt, 3.0, -3.0);
    const Trajectory forward = integrate_direct(p, path.shifted(-3.0), phi, kDt, 3.0);
    CHECK((back.states - forward.states).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("cocycle residuals") {
    const HistorySegment phi = constant(10, 20);
    SUBCASE("t2 = 0") {
        const BrownianPath path = sample_path(2, kDt, 0.0, 1.0, 1);
        CHECK(cocycle_residual(benchmark_network(), path, 0.5, 0.0, phi, kDt) == 0.0);
    }
    SUBCASE("no noise") {
        NetworkParams p = benchmark_network();
        p.Sigma.setZero();
        const BrownianPath path = sample_path(2, kDt, 0.0, 2.0, 1);
        CHECK(cocycle_residual(p, path, 1.0, 1.0, phi, kDt) < 1e-12);
    }
    SUBCASE("benchmark") {
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            const BrownianPath path = sample_path(2, kDt, 0.0, 2.0, seed);
            for (auto [t1, t2] : {std::pair{0.5, 0.5}, std::pair{0.3, 0.7}, std::pair{1.0, 1.0}}) {
                CHECK(cocycle_residual(benchmark_network(), path, t1, t2, phi, kDt) < 1e-10);
            }
        }
    }
}

TEST_CASE("Wong-Zakai gap table") {
    constexpr double dt = 1.0 / 800.0;
    const std::vector<HistorySegment> initials{constant(0.1, 0.2, dt), constant(10, 20, dt), constant(-5, 3, dt)};
    SUBCASE("no noise: only round-off separates the routes") {
        NetworkParams p = benchmark_network();
        p.Sigma.setZero();
        const BrownianPath path = sample_path(2, dt, 0.0, 1.0, 1);
        for (const auto& g : wong_zakai_gap(p, path, {10, 20, 40, 80}, 1.0, initials, dt)) CHECK(g.gap < 1e-8);
    }
    SUBCASE("benchmark: gaps shrink as k doubles, smallest at 1/k = dt") {
        const BrownianPath path = sample_path(2, dt, 0.0, 1.0, 1);
        const auto gaps = wong_zakai_gap(benchmark_network(), path, {10, 20, 40, 80, 800}, 1.0, initials, dt);
        REQUIRE(gaps.size() == 5);
        for (std::size_t i = 1; i < 4; ++i) CHECK(gaps[i].gap <= 1.05 * gaps[i - 1].gap);
        CHECK(gaps[3].gap * 2.0 < gaps[0].gap);
        for (std::size_t i = 0; i < 4; ++i) CHECK(gaps[4].gap <= gaps[i].gap);
    }
}

TEST_CASE("stationary point") {
    SUBCASE("linear noise-free system: the origin") {
        const NetworkParams p = linear_only();
        const BrownianPath path = sample_path(2, kDt, -12.1, 0.0, 1);
        const StationaryEstimate zero = stationary_point(p, path, {4.0, 8.0, 12.0}, kDt);
        CHECK(zero.estimate.norm() == 0.0);
        const HistorySegment start = constant(10, 20);
        const StationaryEstimate far = stationary_point(p, path, {4.0, 8.0, 12.0}, kDt, &start);
        CHECK(far.estimate.norm() < 1e-20);
    }
    SUBCASE("benchmark") {
        const NetworkParams p = benchmark_network();
        const BrownianPath path = sample_path(2, kDt, -12.1, 1.0, 1);
        const StationaryEstimate est = stationary_point(p, path, {4.0, 8.0, 12.0}, kDt);
        REQUIRE(est.cauchy_residuals.size() == 2);
        CHECK(est.cauchy_residuals[1] < 1e-6);
        CHECK(est.converging);
        CHECK(est.warnings.empty());

        // Invariance: Phi(1, omega) gamma*(omega) ~ gamma*(theta_1 omega).
        const Trajectory forward = integrate_direct(p, path, est.estimate, kDt, 1.0);
        const StationaryEstimate later = stationary_point(p, path.shifted(1.0), {4.0, 8.0, 12.0}, kDt);
        CHECK(segment_distance(end_segment(forward, 1.0), later.estimate) < 1e-4);
    }
    SUBCASE("growing residuals raise a warning, not an error") {
        // Rotating coupling with saturation: a limit cycle, not a fixed point.
        NetworkParams p = benchmark_network();
        p.C = Matrix::Identity(2, 2) * 0.1;
        p.H << 1.0, 3.0, -3.0, 1.0;
        const BrownianPath path = sample_path(2, kDt, -10.1, 0.0, 1);
        const HistorySegment start = constant(0.5, -0.5);
        const StationaryEstimate est = stationary_point(p, path, {2.0, 4.0, 6.0, 8.0, 10.0}, kDt, &start);
        CHECK_FALSE(est.converging);
        CHECK_FALSE(est.warnings.empty());
    }
}

TEST_CASE("attraction rate") {
    SUBCASE("linear decay: slope -5") {
        constexpr double dt = 5e-4;
        const BrownianPath path = sample_path(2, dt, 0.0, 5.0, 1);
        const AttractionRate r = attraction_rate(linear_only(), path, constant(1, 2, dt), constant(10, 20, dt), 5.0, dt);
        REQUIRE(r.slope.has_value());
        CHECK(std::abs(*r.slope + 5.0) <= 0.01);
        CHECK(r.r_squared > 0.999);
    }
    SUBCASE("benchmark") {
        const BrownianPath path = sample_path(2, kDt, 0.0, 8.0, 1);
        const AttractionRate r = attraction_rate(benchmark_network(), path, constant(0.1, 0.2), constant(10, 20), 8.0, kDt);
        REQUIRE(r.slope.has_value());
        CHECK(*r.slope < 0.0);
        CHECK(r.r_squared > 0.99);
        CHECK(r.times.size() == r.points);
        CHECK(r.times.front() == doctest::Approx(1.0));
    }
    SUBCASE("identical inputs") {
        const BrownianPath path = sample_path(2, kDt, 0.0, 2.0, 1);
        const AttractionRate r = attraction_rate(benchmark_network(), path, constant(1, 1), constant(1, 1), 2.0, kDt);
        CHECK(r.identical);
        CHECK_FALSE(r.slope.has_value());
    }
}
