#include "sdhnn/conditions.hpp"
#include "sdhnn/errors.hpp"
#include "sdhnn/integrator.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace sdhnn;

namespace {

constexpr double kDt = 1e-3;

SpectralResult spectrum_with_constants(const NetworkParams& p) {
    SpectralResult r = dominant_roots(p, default_search_box(p));
    const double horizon = std::ceil(std::max(10.0, 12.0 / -r.abscissa));
    attach(r, decay_constants(r.abscissa, fundamental_solution(p, horizon, kDt)));
    return r;
}

LinearFlow flow_for(const NetworkParams& p, std::uint64_t seed = 1) {
    const BrownianPath path = sample_path(p.n(), kDt, -20.0, 20.0, seed);
    return build_flow(p, path, -20.0, 20.0);
}

ConditionReport report_for(const NetworkParams& p, const ConditionOptions& options = {}) {
    return compute_constants(p, spectrum_with_constants(p), flow_for(p), kDt, options);
}

} // namespace

TEST_CASE("benchmark parameters satisfy both conditions") {
    const ConditionReport r = report_for(benchmark_network());
    CHECK(r.rho == doctest::Approx(oracle::kBenchmarkRho).epsilon(1e-12));
    CHECK(r.lemma6_ok);
    CHECK(r.theorem6_ok);
    CHECK(r.c_norm == doctest::Approx(5.0));
    CHECK(r.L_f == 1.0);
    CHECK(r.M == 1.0);
    CHECK(r.tau == doctest::Approx(0.1));
    CHECK(r.c0 == doctest::Approx(r.K0 * std::exp(r.gamma * r.tau)));
    CHECK(r.c0 >= std::exp(r.gamma * r.tau));
    CHECK(r.c1 == doctest::Approx((r.h_norm * r.L_f + r.b_norm * r.L_gtilde) * std::exp(-r.rho * r.tau / 2)));
    CHECK(r.c1 >= 0.0);
    CHECK(r.lemma6_margins.first == doctest::Approx(-(r.c1 + r.rho / 2)));
    CHECK(r.lemma6_margins.second == doctest::Approx(r.c1 + r.rho / 2 + r.gamma));
    CHECK(r.theorem6_value == doctest::Approx(theorem6_value(r.rho, r.L_v, r.coupling(), r.tau)));
    CHECK(r.lambda_abs.has_value());
    CHECK(r.T_B.has_value());
    CHECK(r.provenance.seed == 1u);
    CHECK(r.provenance.flow_t_min == -20.0);
    CHECK(r.provenance.dt == kDt);
    CHECK(r.L_gtilde_paper == doctest::Approx(0.0).epsilon(1e-12));
    CHECK_FALSE(r.used_paper_lgtilde);
}

TEST_CASE("delay 2 breaks the contraction criterion") {
    const ConditionReport r = report_for(benchmark_network(2.0));
    CHECK(r.tau == 2.0);
    CHECK_FALSE(r.theorem6_ok);
    CHECK(r.theorem6_value > 0.0);
}

TEST_CASE("no coupling: c1 = 0 and the absorbing condition holds") {
    NetworkParams p = benchmark_network();
    p.H.setZero();
    p.B.setZero();
    const ConditionReport r = report_for(p);
    CHECK(r.c1 == 0.0);
    CHECK(r.lemma6_ok);
    CHECK(check_lemma6(r).ok);
}

TEST_CASE("contraction criterion arithmetic") {
    const double v = theorem6_value(-0.1, 1.0, 0.01, 2.0);
    CHECK(std::abs(v - oracle::kTheorem6Example) < 1e-14);

    // tau >= 1 and |first term| < tau - 1.
    CHECK(theorem6_value(-0.4, 1.0, 0.0, 1.5) > 0.0);

    // Bisection on tau for rho = -2, L_v * coupling = 1: the expression is
    // -1 + tau - 1 + 1 = tau - 1, so the root is tau = 1 exactly.
    double lo = 0.0, hi = 2.0, mid = 1.0;
    for (int i = 0; i < 60; ++i) {
        mid = 0.5 * (lo + hi);
        const double value = theorem6_value(-2.0, 1.0, 1.0, mid);
        if (value == 0.0) break;
        (value < 0.0 ? lo : hi) = mid;
    }
    ConditionReport boundary;
    boundary.rho = -2.0;
    boundary.L_v = 1.0;
    boundary.h_norm = 1.0;
    boundary.L_f = 1.0;
    boundary.tau = mid;
    REQUIRE(theorem6_value(-2.0, 1.0, 1.0, mid) == 0.0);
    CHECK_FALSE(check_theorem6(boundary).ok);
}

TEST_CASE("absorbing bracket and entry") {
    SUBCASE("c1 = 0: closed form") {
        const double c0 = 1.5, gamma = 4.0, rho = -4.4;
        for (double t : {0.0, 0.1, 1.0}) {
            CHECK(absorbing_bracket(c0, 0.0, rho, gamma, t) == doctest::Approx(c0 * std::exp(-gamma * t)));
        }
        const AbsorbingEntry e = absorbing_entry(c0, 0.0, rho, gamma);
        CHECK(e.lambda_abs == doctest::Approx(c0 * std::exp(-gamma * e.T_B)).epsilon(1e-14));
        CHECK(absorbing_bracket(c0, 0.0, rho, gamma, e.T_B) < 1.0);
        CHECK(absorbing_bracket(c0, 0.0, rho, gamma, e.T_B - 1e-3) >= 1.0);
    }
    SUBCASE("the bracket vanishes at infinity") {
        const double c0 = 1.5, c1 = 0.96, rho = -4.48, gamma = 4.03;
        CHECK(absorbing_bracket(c0, c1, rho, gamma, 50.0) < 1e-10);
        CHECK(absorbing_bracket(c0, c1, rho, gamma, 10.0) < absorbing_bracket(c0, c1, rho, gamma, 2.0));
    }
    SUBCASE("violated condition") {
        CHECK_THROWS_AS(absorbing_entry(1.0, 5.0, -1.0, 0.9), ConditionNotSatisfiedError);
    }
}

TEST_CASE("absorbing radius bounds pullback endpoints") {
    const NetworkParams p = benchmark_network();
    const ConditionReport r = report_for(p);
    Vector head(2);
    head << 10.0, 20.0;
    const HistorySegment phi = HistorySegment::constant(head, p.tau(), kDt);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const BrownianPath path = sample_path(2, kDt, -8.1, 0.0, seed);
        const LinearFlow flow = build_flow(p, path, -8.1, 0.0);
        const double radius = absorbing_radius(r, phi.norm(), estimate_bound(flow));
        const Trajectory traj = integrate_direct(p, path, phi, kDt, 8.0, -8.0);
        CHECK(end_segment(traj, 0.0).norm() <= radius);
    }
    ConditionReport failing = r;
    failing.lemma6_ok = false;
    failing.lambda_abs.reset();
    CHECK_THROWS_AS(absorbing_radius(failing, 1.0, 1.0), ConditionNotSatisfiedError);
}

TEST_CASE("scaling B up never helps") {
    bool seen_false = false;
    double previous_c1 = -1.0;
    for (double s : {1.0, 1.5, 2.0, 3.0, 5.0, 8.0}) {
        NetworkParams p = benchmark_network();
        p.B *= s;
        const ConditionReport r = report_for(p);
        CHECK(r.c1 >= previous_c1);
        previous_c1 = r.c1;
        if (seen_false) CHECK_FALSE(r.lemma6_ok);
        seen_false = seen_false || !r.lemma6_ok;
    }
    CHECK(seen_false);
}

TEST_CASE("closed-form variant of L_g-tilde") {
    ConditionOptions options;
    options.use_paper_lgtilde = true;
    const ConditionReport r = report_for(benchmark_network(), options);
    CHECK(r.used_paper_lgtilde);
    CHECK(r.coupling() == doctest::Approx(r.h_norm * r.L_f));
    CHECK(r.c1 == doctest::Approx(r.h_norm * r.L_f * std::exp(-r.rho * r.tau / 2)));
}

TEST_CASE("reports are deterministic and serialisable") {
    const ConditionReport a = report_for(benchmark_network());
    const ConditionReport b = report_for(benchmark_network());
    CHECK(to_json(a).dump() == to_json(b).dump());
    const nlohmann::json j = to_json(a);
    for (const char* key : {"rho", "gamma", "K0", "K1", "c_norm", "h_norm", "b_norm", "L_f", "L_g", "L_gtilde",
                            "L_gtilde_paper", "M", "L_v", "c0", "c1", "lemma6_ok", "lemma6_margins",
                            "theorem6_value", "theorem6_ok", "lambda_abs", "T_B", "provenance"}) {
        CHECK_MESSAGE(j.contains(key), key);
    }
    CHECK(j["provenance"]["seed"] == 1);
    CHECK(j["provenance"].contains("search_box"));
}

TEST_CASE("contraction expression stays finite over a parameter grid") {
    for (double rho : {-10.0, -4.48, -1.0, -0.01}) {
        for (double lv : {1.0, 1.1, 2.0}) {
            for (double coupling : {0.0, 0.5, 2.0}) {
                for (double tau : {0.01, 0.1, 1.0, 2.0}) {
                    const double v = theorem6_value(rho, lv, coupling, tau);
                    const double dv = (theorem6_value(rho + 1e-6, lv, coupling, tau) - v) / 1e-6;
                    CHECK(std::isfinite(v));
                    CHECK(std::isfinite(dv));
                }
            }
        }
    }
}

TEST_CASE("preconditions of compute_constants") {
    const NetworkParams p = benchmark_network();
    const LinearFlow flow = flow_for(p);

    SpectralResult bare = dominant_roots(p, default_search_box(p));
    CHECK_THROWS_AS(compute_constants(p, bare, flow, kDt), ConfigError);

    SpectralResult unstable = spectrum_with_constants(p);
    unstable.abscissa = 0.5;
    CHECK_THROWS_AS(compute_constants(p, unstable, flow, kDt), UnstableLinearizationError);

    Matrix nodes = Matrix::Zero(2, 3);
    const BrownianPath imported = BrownianPath::from_values(kDt, -kDt, nodes);
    const LinearFlow seedless = build_flow(p, imported, -kDt, kDt);
    CHECK_THROWS_AS(compute_constants(p, spectrum_with_constants(p), seedless, kDt), ConfigError);
}
