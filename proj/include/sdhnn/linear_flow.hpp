#pragma once

#include "sdhnn/model.hpp"
#include "sdhnn/noise.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace sdhnn {

enum class FlowMode {
    ExactDiagonal,   // v_jj(t) = exp(sigma_jj W_j(t) - sigma_jj^2 t / 2)
    NumericGeneral,  // Euler-Maruyama on dv = Sigma (v <> dw), Ito form
    WongZakai,       // explicit Euler on the corrected ODE driven by (W^k)'
};

enum class FlowRequest { Auto, ExactDiagonal, NumericGeneral };

/// Where a flow (and therefore an L_v estimate) came from.
struct FlowProvenance {
    std::optional<std::uint64_t> seed;
    double t_min = 0.0;
    double t_max = 0.0;
    double step = 0.0;
    std::optional<std::int64_t> wong_zakai_k;
};

/// Fundamental matrix v(t) of the noise-only linear equation and its
/// inverse, sampled at the path's grid nodes.
class LinearFlow {
public:
    FlowMode mode() const { return mode_; }
    double step() const { return step_; }
    std::int64_t first_node() const { return first_node_; }
    std::int64_t last_node() const { return first_node_ + static_cast<std::int64_t>(forward_.size()) - 1; }
    double t_min() const { return static_cast<double>(first_node()) * step_; }
    double t_max() const { return static_cast<double>(last_node()) * step_; }
    std::size_t dim() const { return static_cast<std::size_t>(forward_.front().rows()); }

    const Matrix& at_node(std::int64_t node) const;
    const Matrix& inverse_at_node(std::int64_t node) const;
    /// Node index of a grid-aligned t inside the horizon.
    std::int64_t node_of(double t) const;

    /// L_v: max over nodes of |v(t)|_2.
    double bound_estimate() const { return bound_; }
    const FlowProvenance& provenance() const { return provenance_; }

private:
    friend LinearFlow build_flow(const NetworkParams&, const BrownianPath&, double, double, FlowRequest);
    friend LinearFlow build_wong_zakai_flow(const NetworkParams&, const WongZakaiView&, double);
    void finish(bool check_conditioning);

    FlowMode mode_ = FlowMode::ExactDiagonal;
    double step_ = 0.0;
    std::int64_t first_node_ = 0;
    std::vector<Matrix> forward_;
    std::vector<Matrix> inverse_;
    double bound_ = 1.0;
    FlowProvenance provenance_;
};

/// Builds v on [t_begin, t_end] (grid aligned, containing 0) from the
/// path. Auto picks the closed form when Sigma is diagonal. The numeric
/// mode integrates forward from 0 and so needs t_begin = 0. Throws
/// FlowDegenerateError if some v(t) has condition number above 1e12.
LinearFlow build_flow(const NetworkParams& params, const BrownianPath& path, double t_begin, double t_end,
                      FlowRequest request = FlowRequest::Auto);

/// Approximate flow v^k on [0, t_end]: explicit Euler on
///   dv/dt = Sigma diag((W^k)'(t)) v - 1/2 Sigma diag(sigma_jj) v,
/// i.e. the Wong-Zakai ODE with the Ito-Stratonovich correction.
LinearFlow build_wong_zakai_flow(const NetworkParams& params, const WongZakaiView& driver, double t_end);

/// v(t) x, or v(t)^{-1} x when `inverse` is set.
Vector flow_apply(const LinearFlow& flow, double t, const Vector& x, bool inverse);

double estimate_bound(const LinearFlow& flow);

/// CSV with header t,norm_v,norm_v_inv,log_det_v.
void write_flow_diagnostics_csv(const LinearFlow& flow, std::ostream& out);

} // namespace sdhnn
