#include "sdhnn/conditions.hpp"

#include "sdhnn/errors.hpp"

#include <fmt/format.h>

#include <cmath>

namespace sdhnn {

double ConditionReport::coupling() const {
    return h_norm * L_f + b_norm * (used_paper_lgtilde ? L_gtilde_paper : L_gtilde);
}

Lemma6Check check_lemma6(double c1, double rho, double gamma) {
    Lemma6Check out;
    out.margins = {-(c1 + rho / 2.0), c1 + rho / 2.0 + gamma};
    out.ok = out.margins.first > 0.0 && out.margins.second > 0.0;
    return out;
}

Lemma6Check check_lemma6(const ConditionReport& report) { return check_lemma6(report.c1, report.rho, report.gamma); }

double theorem6_value(double rho, double L_v, double coupling, double tau) {
    return (rho / 2.0) * std::exp(rho / 2.0 + L_v * coupling) + tau - 1.0;
}

Theorem6Check check_theorem6(const ConditionReport& report) {
    Theorem6Check out;
    out.value = theorem6_value(report.rho, report.L_v, report.coupling(), report.tau);
    out.ok = out.value < 0.0;
    return out;
}

double absorbing_bracket(double c0, double c1, double rho, double gamma, double t) {
    const double a = c1 + rho / 2.0;
    const double denom = a + gamma;
    const double decay = std::exp(-gamma * t);
    if (denom == 0.0) return c0 * decay + c0 * c1 * t * decay;
    return c0 * decay + c0 * c1 * (std::exp(a * t) - decay) / denom;
}

AbsorbingEntry absorbing_entry(double c0, double c1, double rho, double gamma) {
    if (!check_lemma6(c1, rho, gamma).ok) {
        throw ConditionNotSatisfiedError("absorbing condition c1 + rho/2 < 0 < c1 + rho/2 + gamma does not hold");
    }
    constexpr double h = 1e-3;
    constexpr std::int64_t max_steps = 10'000'000;
    AbsorbingEntry out;
    std::int64_t i = 0;
    for (; i <= max_steps; ++i) {
        if (absorbing_bracket(c0, c1, rho, gamma, static_cast<double>(i) * h) < 1.0) break;
    }
    if (i > max_steps) throw ConditionNotSatisfiedError("absorbing bracket stays above 1 up to t = 1e4");
    out.T_B = static_cast<double>(i) * h;
    out.lambda_abs = absorbing_bracket(c0, c1, rho, gamma, out.T_B);
    const double lo = std::max(out.T_B, h);
    constexpr int points = 2000;
    for (int k = 1; k <= points; ++k) {
        const double t = lo * std::pow(10.0, 6.0 * k / points);
        out.lambda_abs = std::max(out.lambda_abs, absorbing_bracket(c0, c1, rho, gamma, t));
    }
    return out;
}

ConditionReport compute_constants(const NetworkParams& params, const SpectralResult& spectral, const LinearFlow& flow,
                                  double dt, const ConditionOptions& options) {
    if (!(spectral.abscissa < 0.0)) {
        throw UnstableLinearizationError(
            fmt::format("spectral abscissa {} is not negative; constants are undefined", spectral.abscissa));
    }
    if (!spectral.gamma || !spectral.K0 || !spectral.K1) {
        throw ConfigError("spectral result carries no decay constants (gamma, K0, K1)");
    }
    if (!flow.provenance().seed) throw ConfigError("L_v needs a seeded path for provenance");

    ConditionReport r;
    r.rho = spectral.abscissa;
    r.gamma = *spectral.gamma;
    r.K0 = *spectral.K0;
    r.K1 = *spectral.K1;
    r.c_norm = spectral_norm(params.C);
    r.h_norm = spectral_norm(params.H);
    r.b_norm = spectral_norm(params.B);
    r.L_f = params.activation.lipschitz_f();
    r.L_g = params.activation.lipschitz_g();
    r.L_gtilde = params.activation.lipschitz_g_tilde();
    r.L_gtilde_paper = params.activation.lipschitz_g_tilde_formula();
    r.used_paper_lgtilde = options.use_paper_lgtilde;
    r.M = params.activation.bound();
    r.L_v = flow.bound_estimate();
    r.tau = params.tau();
    r.c0 = r.K0 * std::exp(r.gamma * r.tau);
    r.c1 = r.coupling() * std::exp(-r.rho * r.tau / 2.0);

    const auto lemma = check_lemma6(r);
    r.lemma6_ok = lemma.ok;
    r.lemma6_margins = lemma.margins;
    const auto thm = check_theorem6(r);
    r.theorem6_ok = thm.ok;
    r.theorem6_value = thm.value;
    if (r.lemma6_ok) {
        const auto entry = absorbing_entry(r.c0, r.c1, r.rho, r.gamma);
        r.T_B = entry.T_B;
        r.lambda_abs = entry.lambda_abs;
    }
    r.provenance = ReportProvenance{flow.provenance().seed, flow.t_min(), flow.t_max(), dt, spectral.search_box};
    return r;
}

double absorbing_radius(const ConditionReport& report, double phi_norm, double flow_norm) {
    if (!report.lemma6_ok || !report.lambda_abs) {
        throw ConditionNotSatisfiedError("absorbing radius needs c1 + rho/2 < 0 < c1 + rho/2 + gamma");
    }
    return *report.lambda_abs * phi_norm * flow_norm;
}

nlohmann::json to_json(const ConditionReport& r) {
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    const auto& p = r.provenance;
    return {
        {"rho", r.rho},
        {"gamma", r.gamma},
        {"K0", r.K0},
        {"K1", r.K1},
        {"c_norm", r.c_norm},
        {"h_norm", r.h_norm},
        {"b_norm", r.b_norm},
        {"L_f", r.L_f},
        {"L_g", r.L_g},
        {"L_gtilde", r.L_gtilde},
        {"L_gtilde_paper", r.L_gtilde_paper},
        {"used_paper_lgtilde", r.used_paper_lgtilde},
        {"M", r.M},
        {"L_v", r.L_v},
        {"tau", r.tau},
        {"c0", r.c0},
        {"c1", r.c1},
        {"lemma6_ok", r.lemma6_ok},
        {"lemma6_margins", {r.lemma6_margins.first, r.lemma6_margins.second}},
        {"theorem6_value", r.theorem6_value},
        {"theorem6_ok", r.theorem6_ok},
        {"lambda_abs", opt(r.lambda_abs)},
        {"T_B", opt(r.T_B)},
        {"provenance",
         {{"seed", p.seed ? nlohmann::json(*p.seed) : nlohmann::json(nullptr)},
          {"flow_horizon", {p.flow_t_min, p.flow_t_max}},
          {"dt", p.dt},
          {"search_box",
           {{"re_min", p.search_box.re_min},
            {"re_max", p.search_box.re_max},
            {"im_min", p.search_box.im_min},
            {"im_max", p.search_box.im_max}}}}},
    };
}

} // namespace sdhnn
