#pragma once

#include "sdhnn/linear_flow.hpp"
#include "sdhnn/model.hpp"
#include "sdhnn/spectral.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <utility>

namespace sdhnn {

struct ConditionOptions {
    /// Use L_g - |L| instead of the sampled sup |Dg - L| for L_g_tilde.
    bool use_paper_lgtilde = false;
};

struct ReportProvenance {
    std::optional<std::uint64_t> seed;  // seed of the path behind L_v
    double flow_t_min = 0.0;
    double flow_t_max = 0.0;
    double dt = 0.0;
    SearchBox search_box;
};

/// Every constant entering the absorbing-set and contraction criteria.
struct ConditionReport {
    double rho = 0.0;
    double gamma = 0.0;
    double K0 = 0.0;
    double K1 = 0.0;
    double c_norm = 0.0;  // |C|_2
    double h_norm = 0.0;  // |H|_2
    double b_norm = 0.0;  // |B|_2
    double L_f = 0.0;
    double L_g = 0.0;
    double L_gtilde = 0.0;        // sampled sup |Dg - L|
    double L_gtilde_paper = 0.0;  // L_g - |L|
    bool used_paper_lgtilde = false;
    double M = 0.0;
    double L_v = 0.0;
    double tau = 0.0;
    double c0 = 0.0;  // K0 e^{gamma tau}
    double c1 = 0.0;  // (h L_f + b L_gtilde) e^{-rho tau / 2}
    bool lemma6_ok = false;
    std::pair<double, double> lemma6_margins{0.0, 0.0};
    double theorem6_value = 0.0;
    bool theorem6_ok = false;
    std::optional<double> lambda_abs;
    std::optional<double> T_B;
    ReportProvenance provenance;

    /// h L_f + b L_gtilde with the selected L_gtilde variant.
    double coupling() const;
};

/// Requires `spectral` to carry decay constants (see attach()) and the
/// flow to carry a seed. Throws UnstableLinearizationError when rho >= 0.
ConditionReport compute_constants(const NetworkParams& params, const SpectralResult& spectral, const LinearFlow& flow,
                                  double dt, const ConditionOptions& options = {});

struct Lemma6Check {
    bool ok = false;
    std::pair<double, double> margins;  // (-(c1 + rho/2), c1 + rho/2 + gamma)
};

struct Theorem6Check {
    bool ok = false;
    double value = 0.0;
};

Lemma6Check check_lemma6(double c1, double rho, double gamma);
Lemma6Check check_lemma6(const ConditionReport& report);

/// (rho/2) exp(rho/2 + L_v * coupling) + tau - 1; the criterion holds
/// when this is strictly negative.
double theorem6_value(double rho, double L_v, double coupling, double tau);
Theorem6Check check_theorem6(const ConditionReport& report);

/// c0 e^{-gamma t} + c0 c1 (e^{(c1 + rho/2) t} - e^{-gamma t}) / (c1 + rho/2 + gamma).
double absorbing_bracket(double c0, double c1, double rho, double gamma, double t);

struct AbsorbingEntry {
    double T_B = 0.0;        // first t on the 1e-3 grid with bracket < 1
    double lambda_abs = 0.0; // sup of the bracket over t >= T_B (log-spaced grid)
};

/// Throws ConditionNotSatisfiedError unless the absorbing condition holds.
AbsorbingEntry absorbing_entry(double c0, double c1, double rho, double gamma);

/// lambda_abs * phi_norm * flow_norm.
double absorbing_radius(const ConditionReport& report, double phi_norm, double flow_norm);

nlohmann::json to_json(const ConditionReport& report);

} // namespace sdhnn
