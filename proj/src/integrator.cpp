#include "sdhnn/integrator.hpp"

#include "sdhnn/csv.hpp"
#include "sdhnn/errors.hpp"
#include "sdhnn/grid.hpp"

#include <fmt/format.h>

#include <cmath>
#include <ostream>

namespace sdhnn {

namespace {

constexpr double kDivergenceNorm = 1e12;

/// Drift -C u + H f(u) + B g(delayed) with scratch buffers.
class Drift {
public:
    explicit Drift(const NetworkParams& p)
        : p_(p), f_(static_cast<Eigen::Index>(p.n())), g_(static_cast<Eigen::Index>(p.n())) {}

    void operator()(const Vector& u, const Vector& delayed, Vector& out) {
        p_.activation.apply(Which::F, u, f_);
        p_.activation.apply(Which::G, delayed, g_);
        out.noalias() = -(p_.C * u);
        out.noalias() += p_.H * f_;
        out.noalias() += p_.B * g_;
    }

private:
    const NetworkParams& p_;
    Vector f_;
    Vector g_;
};

struct Setup {
    std::int64_t history_nodes = 0;
    std::int64_t steps = 0;
    std::vector<std::int64_t> delays;
};

Setup prepare(const NetworkParams& params, const HistorySegment& phi, double dt, double horizon) {
    require_valid(params, dt);
    Setup s;
    s.delays = delay_offsets(params, dt);
    const auto hist = grid_count(params.tau(), dt);
    s.history_nodes = *hist;
    const auto steps = grid_count(horizon, dt);
    if (!steps || *steps < 0) throw ConfigError(fmt::format("horizon {} is not a multiple of dt = {}", horizon, dt));
    s.steps = *steps;
    if (phi.dim() != params.n()) throw ConfigError("initial segment dimension does not match n");
    if (std::abs(phi.step() - dt) > 1e-9 * dt) {
        throw ConfigError(fmt::format("initial segment step {} differs from dt = {}", phi.step(), dt));
    }
    if (static_cast<std::int64_t>(phi.node_count()) != s.history_nodes + 1) {
        throw ConfigError(fmt::format("initial segment has {} nodes, expected tau/dt + 1 = {}", phi.node_count(),
                                      s.history_nodes + 1));
    }
    return s;
}

Trajectory start_trajectory(const Setup& s, const HistorySegment& phi, double dt, double t_start, Route route) {
    Trajectory traj;
    traj.step = dt;
    traj.t_start = t_start;
    traj.history_nodes = s.history_nodes;
    traj.route = route;
    traj.states.resize(phi.values().rows(), s.history_nodes + 1 + s.steps);
    traj.states.leftCols(s.history_nodes + 1) = phi.values();
    return traj;
}

void gather_delayed(const Matrix& states, std::int64_t column, const std::vector<std::int64_t>& delays,
                    Vector& out) {
    for (std::size_t j = 0; j < delays.size(); ++j) {
        const auto row = static_cast<Eigen::Index>(j);
        out(row) = states(row, column - delays[j]);
    }
}

void guard(const Vector& u, double t) {
    const double norm = u.norm();
    if (!(norm <= kDivergenceNorm)) {
        throw DivergenceError(fmt::format("state norm {:g} exceeded {:g} at t = {}", norm, kDivergenceNorm, t));
    }
}

} // namespace

std::string route_name(Route r) {
    switch (r) {
    case Route::Direct: return "direct";
    case Route::Conjugated: return "conjugated";
    case Route::WongZakai: return "wong-zakai";
    }
    return "unknown";
}

std::int64_t Trajectory::column_of(double t) const {
    const auto rel = grid_count(t - t_start, step);
    if (!rel) throw DomainError(fmt::format("t = {} is not on the trajectory grid", t));
    const std::int64_t col = *rel + history_nodes;
    if (col < 0 || col >= node_count()) {
        throw DomainError(fmt::format("t = {} outside the trajectory [{}, {}]", t, time_at(0), t_end()));
    }
    return col;
}

Trajectory integrate_direct(const NetworkParams& params, const BrownianPath& path, const HistorySegment& phi,
                            double dt, double horizon, double t_start) {
    const Setup s = prepare(params, phi, dt, horizon);
    if (path.components() != params.n()) throw ConfigError("noise components must equal n");
    if (std::abs(path.step() - dt) > 1e-12 * dt) {
        throw ConfigError(fmt::format("path step {} must equal dt = {}", path.step(), dt));
    }
    if (!path.covers(t_start, t_start + horizon)) {
        throw ConfigError(fmt::format("path window [{}, {}] does not cover [{}, {}]; extend the path", path.t_min(),
                                      path.t_max(), t_start, t_start + horizon));
    }
    const std::int64_t first_cell = path.node_of(t_start);

    Trajectory traj = start_trajectory(s, phi, dt, t_start, Route::Direct);
    const auto n = static_cast<Eigen::Index>(params.n());
    Drift drift(params);
    Vector u(n), delayed(n), f(n), dw(n), next(n);
    for (std::int64_t i = 0; i < s.steps; ++i) {
        const std::int64_t col = s.history_nodes + i;
        u = traj.states.col(col);
        gather_delayed(traj.states, col, s.delays, delayed);
        drift(u, delayed, f);
        for (Eigen::Index j = 0; j < n; ++j) dw(j) = path.increment(static_cast<std::size_t>(j), first_cell + i);
        next = u + dt * f + params.Sigma * u.cwiseProduct(dw);
        guard(next, traj.time_at(col + 1));
        traj.states.col(col + 1) = next;
    }
    return traj;
}

Trajectory integrate_conjugated(const NetworkParams& params, const LinearFlow& flow, const HistorySegment& phi,
                                double dt, double horizon) {
    const Setup s = prepare(params, phi, dt, horizon);
    if (flow.dim() != params.n()) throw ConfigError("flow dimension must equal n");
    if (std::abs(flow.step() - dt) > 1e-12 * dt) {
        throw ConfigError(fmt::format("flow step {} must equal dt = {}", flow.step(), dt));
    }
    if (flow.first_node() > 0 || flow.last_node() < s.steps) {
        throw ConfigError(fmt::format("flow horizon [{}, {}] does not cover [0, {}]", flow.t_min(), flow.t_max(), horizon));
    }

    Trajectory traj = start_trajectory(s, phi, dt, 0.0, Route::Conjugated);
    const auto n = static_cast<Eigen::Index>(params.n());
    Drift drift(params);
    Vector conj = phi.head();  // v(0) = I
    Vector u(n), delayed(n), f(n), next(n);
    for (std::int64_t i = 0; i < s.steps; ++i) {
        const std::int64_t col = s.history_nodes + i;
        u = traj.states.col(col);
        gather_delayed(traj.states, col, s.delays, delayed);
        drift(u, delayed, f);
        conj += dt * (flow.inverse_at_node(i) * f);
        next = flow.at_node(i + 1) * conj;
        guard(next, traj.time_at(col + 1));
        traj.states.col(col + 1) = next;
    }
    return traj;
}

Trajectory integrate_wong_zakai(const NetworkParams& params, const BrownianPath& path, std::int64_t k,
                                const HistorySegment& phi, double dt, double horizon) {
    if (std::abs(path.step() - dt) > 1e-12 * dt) {
        throw ConfigError(fmt::format("path step {} must equal dt = {}", path.step(), dt));
    }
    const LinearFlow flow = build_wong_zakai_flow(params, wong_zakai(path, k), horizon);
    Trajectory traj = integrate_conjugated(params, flow, phi, dt, horizon);
    traj.route = Route::WongZakai;
    traj.k = k;
    return traj;
}

HistorySegment end_segment(const Trajectory& traj, double t) {
    const std::int64_t col = traj.column_of(t);
    if (col < traj.history_nodes) {
        throw DomainError(fmt::format("not enough history before t = {} for a full segment", t));
    }
    return HistorySegment(traj.step, traj.states.middleCols(col - traj.history_nodes, traj.history_nodes + 1));
}

void write_trajectory_csv(const Trajectory& traj, std::ostream& out, std::int64_t stride) {
    if (stride < 1) throw ConfigError("CSV stride must be positive");
    const auto n = traj.states.rows();
    std::vector<std::string> row;
    row.emplace_back("t");
    for (Eigen::Index j = 0; j < n; ++j) row.push_back(fmt::format("u_{}", j + 1));
    write_csv_row(out, row);
    const std::int64_t last = traj.node_count() - 1;
    auto emit = [&](std::int64_t col) {
        row.clear();
        row.push_back(format_real(traj.time_at(col)));
        for (Eigen::Index j = 0; j < n; ++j) row.push_back(format_real(traj.states(j, col)));
        write_csv_row(out, row);
    };
    for (std::int64_t col = 0; col <= last; col += stride) emit(col);
    if (last % stride != 0) emit(last);
}

} // namespace sdhnn
