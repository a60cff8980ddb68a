#include "sdhnn/errors.hpp"
#include "sdhnn/integrator.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace sdhnn;

namespace {

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

NetworkParams decay_only() {
    NetworkParams p = benchmark_network();
    p.H.setZero();
    p.B.setZero();
    p.Sigma.setZero();
    return p;
}

NetworkParams noise_free() {
    NetworkParams p = benchmark_network();
    p.Sigma.setZero();
    return p;
}

HistorySegment constant(double a, double b, double dt, double tau = 0.1) {
    return HistorySegment::constant(vec2(a, b), tau, dt);
}

} // namespace

TEST_CASE("exact decay: Euler error within 2 c^2 dt") {
    constexpr double dt = 1e-3;
    const NetworkParams p = decay_only();
    const BrownianPath path = sample_path(2, dt, 0.0, 1.0, 1);
    const Trajectory traj = integrate_direct(p, path, constant(1.0, 1.0, dt), dt, 1.0);
    const Vector u1 = traj.state_at(1.0);
    const double exact = std::exp(-5.0);
    for (Eigen::Index j = 0; j < 2; ++j) CHECK(std::abs(u1(j) - exact) / exact <= 2.0 * 25.0 * dt);
}

TEST_CASE("exact decay: first-order convergence") {
    const NetworkParams p = decay_only();
    std::vector<double> logs_dt, logs_err;
    for (double dt : {4e-3, 2e-3, 1e-3, 5e-4}) {
        const BrownianPath path = sample_path(2, dt, 0.0, 1.0, 1);
        const Trajectory traj = integrate_direct(p, path, constant(1.0, 1.0, dt), dt, 1.0);
        const double err = std::abs(traj.state_at(1.0)(0) - std::exp(-5.0)) / std::exp(-5.0);
        logs_dt.push_back(std::log(dt));
        logs_err.push_back(std::log(err));
    }
    CHECK(oracle::fitted_slope(logs_dt, logs_err) >= 0.95);
}

TEST_CASE("benchmark trajectory decays to the origin") {
    constexpr double dt = 1e-3;
    const NetworkParams p = benchmark_network();
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const BrownianPath path = sample_path(2, dt, 0.0, 5.0, seed);
        const Trajectory traj = integrate_direct(p, path, constant(0.1, 0.2, dt), dt, 5.0);
        CHECK(traj.state_at(5.0).cwiseAbs().maxCoeff() < 1e-2);
    }
}

TEST_CASE("noise-free drift converges to the RK4 delay oracle at first order") {
    // Explicit Euler's global error here is dominated by the fast decay:
    // about dt * c * |phi(0)| / (2e) at t = 1/c. The RK4 reference is
    // accurate to ~1e-8 at these steps, so it serves as the exact solution.
    const NetworkParams p = noise_free();
    const Vector head = vec2(0.1, 0.2);
    std::vector<double> logs_dt, logs_err;
    for (double dt : {2e-3, 1e-3, 5e-4}) {
        const int steps = static_cast<int>(std::lround(2.0 / dt));
        const BrownianPath path = sample_path(2, dt, 0.0, 2.0, 1);
        const Trajectory traj = integrate_direct(p, path, HistorySegment::constant(head, 0.1, dt), dt, 2.0);
        const Matrix ref = oracle::rk4_dde(p.C, p.H, p.B, p.delays, head, dt, steps);
        double sup = 0.0;
        for (int i = 0; i <= steps; ++i) sup = std::max(sup, (traj.states.col(traj.history_nodes + i) - ref.col(i)).norm());
        CHECK(sup <= dt * 5.0 * head.norm() / (2.0 * std::exp(1.0)) * 1.1);
        logs_dt.push_back(std::log(dt));
        logs_err.push_back(std::log(sup));
    }
    CHECK(oracle::fitted_slope(logs_dt, logs_err) >= 0.95);
}

TEST_CASE("trajectory layout and history prefix") {
    constexpr double dt = 1e-3;
    const NetworkParams p = benchmark_network();
    const BrownianPath path = sample_path(2, dt, 0.0, 1.0, 4);
    Matrix hist(2, 101);
    for (int k = 0; k <= 100; ++k) hist.col(k) = vec2(std::sin(k * 0.1), std::cos(k * 0.1));
    const HistorySegment phi(dt, hist);
    const Trajectory traj = integrate_direct(p, path, phi, dt, 1.0);
    CHECK(traj.node_count() == 1101);
    CHECK(traj.states.leftCols(101) == hist);
    CHECK(traj.time_at(0) == doctest::Approx(-0.1));
    CHECK(traj.t_end() == doctest::Approx(1.0));
    CHECK(traj.state_at(0.0) == phi.head());
    CHECK(traj.states.allFinite());
    CHECK_THROWS_AS(traj.column_of(0.0005), DomainError);
    CHECK_THROWS_AS(traj.column_of(1.5), DomainError);
}

TEST_CASE("delayed reads are plain grid reads") {
    constexpr double dt = 1e-3;
    NetworkParams p = benchmark_network();
    p.delays = {0.1, 0.05};
    const BrownianPath path = sample_path(2, dt, 0.0, 0.5, 6);
    const HistorySegment phi = constant(0.4, -0.3, dt);
    const Trajectory traj = integrate_direct(p, path, phi, dt, 0.5);
    // Replay one step by hand from the stored columns.
    for (std::int64_t col : {100, 140, 160, 555}) {
        const Vector u = traj.states.col(col);
        Vector delayed(2);
        delayed << traj.states(0, col - 100), traj.states(1, col - 50);
        const Vector drift = -p.C * u + p.H * u.array().tanh().matrix() + p.B * delayed.array().tanh().matrix();
        Vector dw(2);
        dw << path.increment(0, col - 100), path.increment(1, col - 100);
        const Vector next = u + dt * drift + p.Sigma * u.cwiseProduct(dw);
        CHECK((next - traj.states.col(col + 1)).norm() <= 1e-15 * (1.0 + next.norm()));
    }
}

TEST_CASE("integration is deterministic") {
    constexpr double dt = 1e-3;
    const NetworkParams p = benchmark_network();
    const BrownianPath a = sample_path(2, dt, 0.0, 2.0, 99);
    const BrownianPath b = sample_path(2, dt, 0.0, 2.0, 99);
    const Trajectory ta = integrate_direct(p, a, constant(10.0, 20.0, dt), dt, 2.0);
    const Trajectory tb = integrate_direct(p, b, constant(10.0, 20.0, dt), dt, 2.0);
    CHECK(ta.states == tb.states);
}

TEST_CASE("grid misalignment and divergence") {
    constexpr double dt = 1e-3;
    const NetworkParams p = benchmark_network();
    const BrownianPath path = sample_path(2, dt, 0.0, 1.0, 1);
    CHECK_THROWS_AS(integrate_direct(p, path, constant(1, 1, dt), dt, 0.9995), ConfigError);
    CHECK_THROWS_AS(integrate_direct(p, path, constant(1, 1, dt), dt, 2.0), ConfigError);
    CHECK_THROWS_AS(integrate_direct(p, path, constant(1, 1, 2e-3), dt, 1.0), ConfigError);
    const BrownianPath coarse = sample_path(2, 2e-3, 0.0, 1.0, 1);
    CHECK_THROWS_AS(integrate_direct(p, coarse, constant(1, 1, dt), dt, 1.0), ConfigError);

    // sigma sqrt(dt) ~ 32: each Euler-Maruyama step multiplies |u| by |1 + 32 Z|.
    NetworkParams wild = benchmark_network();
    wild.Sigma = Matrix::Identity(2, 2) * 1000.0;
    CHECK_THROWS_AS(integrate_direct(wild, path, constant(1, 1, dt), dt, 1.0), DivergenceError);
}

TEST_CASE("conjugated route") {
    constexpr double dt = 1e-3;
    SUBCASE("zero noise reduces to the drift ODE") {
        const NetworkParams p = noise_free();
        const BrownianPath path = sample_path(2, dt, 0.0, 2.0, 1);
        const LinearFlow flow = build_flow(p, path, 0.0, 2.0);
        const Trajectory direct = integrate_direct(p, path, constant(10, 20, dt), dt, 2.0);
        const Trajectory conj = integrate_conjugated(p, flow, constant(10, 20, dt), dt, 2.0);
        CHECK((direct.states - conj.states).cwiseAbs().maxCoeff() < 1e-10);
        CHECK(conj.route == Route::Conjugated);
    }
    SUBCASE("initial head is kept exactly") {
        const NetworkParams p = benchmark_network();
        const BrownianPath path = sample_path(2, dt, 0.0, 1.0, 2);
        const LinearFlow flow = build_flow(p, path, 0.0, 1.0);
        const Trajectory conj = integrate_conjugated(p, flow, constant(0.1, 0.2, dt), dt, 1.0);
        CHECK(conj.state_at(0.0) == vec2(0.1, 0.2));
    }
    SUBCASE("flow must cover the horizon") {
        const NetworkParams p = benchmark_network();
        const BrownianPath path = sample_path(2, dt, 0.0, 1.0, 2);
        const LinearFlow flow = build_flow(p, path, 0.0, 0.5);
        CHECK_THROWS_AS(integrate_conjugated(p, flow, constant(0.1, 0.2, dt), dt, 1.0), ConfigError);
    }
}

TEST_CASE("direct and conjugated routes converge to each other") {
    const NetworkParams p = benchmark_network();
    const BrownianPath fine = sample_path(2, 1e-3, 0.0, 1.0, 7);
    std::vector<double> logs_dt, logs_gap;
    for (std::int64_t factor : {4, 2, 1}) {
        const double dt = 1e-3 * static_cast<double>(factor);
        const BrownianPath path = fine.coarsened(factor);
        const HistorySegment phi = constant(10, 20, dt);
        const Trajectory direct = integrate_direct(p, path, phi, dt, 1.0);
        const Trajectory conj = integrate_conjugated(p, build_flow(p, path, 0.0, 1.0), phi, dt, 1.0);
        logs_dt.push_back(std::log(dt));
        logs_gap.push_back(std::log((direct.states - conj.states).colwise().norm().maxCoeff()));
    }
    CHECK(oracle::fitted_slope(logs_dt, logs_gap) >= 0.4);
}

TEST_CASE("Wong-Zakai route") {
    constexpr double dt = 1e-3;
    SUBCASE("zero noise: identical to the drift ODE for every k") {
        const NetworkParams p = noise_free();
        const BrownianPath path = sample_path(2, dt, 0.0, 1.0, 1);
        const Trajectory direct = integrate_direct(p, path, constant(0.1, 0.2, dt), dt, 1.0);
        for (std::int64_t k : {10, 20, 50}) {
            const Trajectory wz = integrate_wong_zakai(p, path, k, constant(0.1, 0.2, dt), dt, 1.0);
            CHECK((wz.states - direct.states).cwiseAbs().maxCoeff() < 1e-10);
            CHECK(wz.route == Route::WongZakai);
            CHECK(wz.k == k);
        }
    }
    SUBCASE("incompatible k") {
        const NetworkParams p = benchmark_network();
        const BrownianPath path = sample_path(2, dt, 0.0, 1.0, 1);
        CHECK_THROWS_AS(integrate_wong_zakai(p, path, 80, constant(0.1, 0.2, dt), dt, 1.0), ConfigError);
    }
}

TEST_CASE("end segments") {
    constexpr double dt = 1e-3;
    const NetworkParams p = benchmark_network();
    const BrownianPath path = sample_path(2, dt, 0.0, 1.0, 1);
    const HistorySegment phi = constant(0.1, 0.2, dt);
    const Trajectory traj = integrate_direct(p, path, phi, dt, 1.0);
    CHECK(end_segment(traj, 0.0).values() == phi.values());
    const HistorySegment seg = end_segment(traj, 0.6);
    CHECK(seg.head() == traj.state_at(0.6));
    CHECK(seg.node(0) == traj.state_at(0.5));
    CHECK_THROWS_AS(end_segment(traj, -0.05), DomainError);

    Trajectory flat;
    flat.step = dt;
    flat.history_nodes = 100;
    flat.states = Matrix::Constant(2, 301, 0.7);
    CHECK(end_segment(flat, 0.15).values() == Matrix::Constant(2, 101, 0.7));
}

TEST_CASE("trajectory CSV") {
    constexpr double dt = 0.01;
    const NetworkParams p = benchmark_network();
    const BrownianPath path = sample_path(2, dt, 0.0, 0.1, 1);
    const Trajectory traj = integrate_direct(p, path, constant(0.1, 0.2, dt), dt, 0.1);
    std::ostringstream all;
    write_trajectory_csv(traj, all);
    std::string text = all.str();
    CHECK(text.rfind("t,u_1,u_2\n-0.1,0.1,0.2\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 21);

    std::ostringstream strided;
    write_trajectory_csv(traj, strided, 3);
    text = strided.str();
    // Nodes 0, 3, ..., 18 plus the final node 20.
    CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 7 + 1);
    CHECK(text.find("\n0.1,") != std::string::npos);
    CHECK_THROWS_AS(write_trajectory_csv(traj, strided, 0), ConfigError);
}
