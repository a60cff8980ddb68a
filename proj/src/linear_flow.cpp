#include "sdhnn/linear_flow.hpp"

#include "sdhnn/csv.hpp"
#include "sdhnn/errors.hpp"
#include "sdhnn/grid.hpp"

#include <fmt/format.h>

#include <cmath>
#include <ostream>

namespace sdhnn {

namespace {

constexpr double kMaxCondition = 1e12;

double condition_number(const Matrix& m) {
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& s = svd.singularValues();
    const double smin = s(s.size() - 1);
    return smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
}

void require_noise_dims(const NetworkParams& params, std::size_t components) {
    if (components != params.n()) {
        throw ConfigError(fmt::format("noise has {} components, the network has {}", components, params.n()));
    }
}

} // namespace

const Matrix& LinearFlow::at_node(std::int64_t node) const {
    if (node < first_node() || node > last_node()) {
        throw DomainError(fmt::format("flow node {} outside [{}, {}]", node, first_node(), last_node()));
    }
    return forward_[static_cast<std::size_t>(node - first_node_)];
}

const Matrix& LinearFlow::inverse_at_node(std::int64_t node) const {
    if (node < first_node() || node > last_node()) {
        throw DomainError(fmt::format("flow node {} outside [{}, {}]", node, first_node(), last_node()));
    }
    return inverse_[static_cast<std::size_t>(node - first_node_)];
}

std::int64_t LinearFlow::node_of(double t) const {
    const auto k = grid_count(t, step_);
    if (!k) throw ConfigError(fmt::format("t = {} is not on the flow grid (step {})", t, step_));
    if (*k < first_node() || *k > last_node()) {
        throw DomainError(fmt::format("t = {} outside the flow horizon [{}, {}]", t, t_min(), t_max()));
    }
    return *k;
}

void LinearFlow::finish(bool check_conditioning) {
    bound_ = 0.0;
    for (std::size_t i = 0; i < forward_.size(); ++i) {
        const Matrix& v = forward_[i];
        if (!v.allFinite()) {
            throw FlowDegenerateError(fmt::format("linear flow is not finite at t = {}",
                                                  static_cast<double>(first_node_ + static_cast<std::int64_t>(i)) * step_));
        }
        if (check_conditioning) {
            const double cond = condition_number(v);
            if (!(cond <= kMaxCondition)) {
                throw FlowDegenerateError(fmt::format(
                    "linear flow is singular at t = {} (condition number {:g})",
                    static_cast<double>(first_node_ + static_cast<std::int64_t>(i)) * step_, cond));
            }
        }
        bound_ = std::max(bound_, spectral_norm(v));
    }
    if (!check_conditioning) return;
    inverse_.clear();
    inverse_.reserve(forward_.size());
    for (const Matrix& v : forward_) inverse_.push_back(v.partialPivLu().inverse());
}

LinearFlow build_flow(const NetworkParams& params, const BrownianPath& path, double t_begin, double t_end,
                      FlowRequest request) {
    require_noise_dims(params, path.components());
    if (!(t_begin <= 0.0 && t_end >= 0.0)) throw ConfigError("flow horizon must contain t = 0");
    if (!path.covers(t_begin, t_end)) {
        throw ConfigError(fmt::format("path window [{}, {}] does not cover the flow horizon [{}, {}]",
                                      path.t_min(), path.t_max(), t_begin, t_end));
    }
    const std::int64_t first = path.node_of(t_begin);
    const std::int64_t last = path.node_of(t_end);
    const auto n = static_cast<Eigen::Index>(params.n());
    const Matrix& sigma = params.Sigma;

    FlowMode mode = FlowMode::ExactDiagonal;
    switch (request) {
    case FlowRequest::Auto:
        mode = params.sigma_is_diagonal() ? FlowMode::ExactDiagonal : FlowMode::NumericGeneral;
        break;
    case FlowRequest::ExactDiagonal:
        if (!params.sigma_is_diagonal()) throw ConfigError("exact-diagonal flow requires a diagonal Sigma");
        break;
    case FlowRequest::NumericGeneral:
        mode = FlowMode::NumericGeneral;
        break;
    }

    LinearFlow flow;
    flow.mode_ = mode;
    flow.step_ = path.step();
    flow.first_node_ = first;
    flow.provenance_ = FlowProvenance{path.seed(), t_begin, t_end, path.step(), std::nullopt};
    flow.forward_.reserve(static_cast<std::size_t>(last - first + 1));

    if (mode == FlowMode::ExactDiagonal) {
        flow.inverse_.reserve(static_cast<std::size_t>(last - first + 1));
        for (std::int64_t k = first; k <= last; ++k) {
            const double t = static_cast<double>(k) * flow.step_;
            Matrix v = Matrix::Zero(n, n);
            Matrix vinv = Matrix::Zero(n, n);
            for (Eigen::Index j = 0; j < n; ++j) {
                const double s = sigma(j, j);
                const double exponent =
                    k == 0 ? 0.0 : s * path.node_value(static_cast<std::size_t>(j), k) - 0.5 * s * s * t;
                v(j, j) = std::exp(exponent);
                vinv(j, j) = std::exp(-exponent);
            }
            flow.forward_.push_back(std::move(v));
            flow.inverse_.push_back(std::move(vinv));
        }
        flow.finish(false);
        return flow;
    }

    if (first != 0) throw ConfigError("numeric flow integrates forward from t = 0; t_begin must be 0");
    Matrix v = Matrix::Identity(n, n);
    Vector dw(n);
    flow.forward_.push_back(v);
    for (std::int64_t cell = 0; cell < last; ++cell) {
        for (Eigen::Index j = 0; j < n; ++j) dw(j) = path.increment(static_cast<std::size_t>(j), cell);
        v += sigma * dw.asDiagonal() * v;
        flow.forward_.push_back(v);
    }
    flow.finish(true);
    return flow;
}

LinearFlow build_wong_zakai_flow(const NetworkParams& params, const WongZakaiView& driver, double t_end) {
    const BrownianPath& path = driver.path();
    require_noise_dims(params, path.components());
    if (!path.covers(0.0, t_end)) throw ConfigError("path does not cover the Wong-Zakai horizon");
    const std::int64_t last = path.node_of(t_end);
    const auto n = static_cast<Eigen::Index>(params.n());
    const double dt = path.step();
    const Matrix& sigma = params.Sigma;
    const Matrix correction = 0.5 * sigma * sigma.diagonal().asDiagonal();

    LinearFlow flow;
    flow.mode_ = FlowMode::WongZakai;
    flow.step_ = dt;
    flow.first_node_ = 0;
    flow.provenance_ = FlowProvenance{path.seed(), 0.0, t_end, dt, driver.k()};
    flow.forward_.reserve(static_cast<std::size_t>(last + 1));

    Matrix v = Matrix::Identity(n, n);
    Vector slope(n);
    flow.forward_.push_back(v);
    for (std::int64_t cell = 0; cell < last; ++cell) {
        for (Eigen::Index j = 0; j < n; ++j) slope(j) = driver.derivative_on_cell(static_cast<std::size_t>(j), cell);
        v += dt * (sigma * slope.asDiagonal() * v - correction * v);
        flow.forward_.push_back(v);
    }
    flow.finish(true);
    return flow;
}

Vector flow_apply(const LinearFlow& flow, double t, const Vector& x, bool inverse) {
    const std::int64_t k = flow.node_of(t);
    return inverse ? Vector(flow.inverse_at_node(k) * x) : Vector(flow.at_node(k) * x);
}

double estimate_bound(const LinearFlow& flow) { return flow.bound_estimate(); }

void write_flow_diagnostics_csv(const LinearFlow& flow, std::ostream& out) {
    write_csv_row(out, {"t", "norm_v", "norm_v_inv", "log_det_v"});
    for (std::int64_t k = flow.first_node(); k <= flow.last_node(); ++k) {
        const Matrix& v = flow.at_node(k);
        write_csv_row(out, {format_real(static_cast<double>(k) * flow.step()), format_real(spectral_norm(v)),
                            format_real(spectral_norm(flow.inverse_at_node(k))),
                            format_real(std::log(std::abs(v.determinant())))});
    }
}

} // namespace sdhnn
