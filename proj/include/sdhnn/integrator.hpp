#pragma once

#include "sdhnn/linear_flow.hpp"
#include "sdhnn/model.hpp"
#include "sdhnn/noise.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace sdhnn {

enum class Route { Direct, Conjugated, WongZakai };

std::string route_name(Route r);

/// States on the uniform grid t_start - tau, ..., t_end. Column p of
/// `states` sits at time t_start + (p - history_nodes) * step; the first
/// history_nodes + 1 columns are the initial segment.
struct Trajectory {
    double step = 0.0;
    double t_start = 0.0;
    std::int64_t history_nodes = 0;
    Matrix states;
    Route route = Route::Direct;
    std::optional<std::int64_t> k;

    std::int64_t node_count() const { return static_cast<std::int64_t>(states.cols()); }
    double time_at(std::int64_t column) const {
        return t_start + static_cast<double>(column - history_nodes) * step;
    }
    double t_end() const { return time_at(node_count() - 1); }
    /// Column of a grid-aligned time; throws DomainError when off-grid or outside.
    std::int64_t column_of(double t) const;
    Vector state_at(double t) const { return states.col(column_of(t)); }
};

/// Euler-Maruyama for
///   du = [-C u + H f(u) + B g(u_delayed)] dt + Sigma (u <> dW)
/// starting at t_start with history phi. Noise increments are read from
/// the path cells starting at t_start, so the path step must equal dt.
/// Throws DivergenceError once |u| exceeds 1e12.
Trajectory integrate_direct(const NetworkParams& params, const BrownianPath& path, const HistorySegment& phi,
                            double dt, double horizon, double t_start = 0.0);

/// Path-frozen explicit Euler on the conjugated equation
///   d(u~)/dt = v(t)^{-1} [-C v u~ + H f(v u~) + B g(u_delayed)],
/// returning u = v(t) u~. `flow` must start at 0 on the dt grid and reach
/// `horizon`.
Trajectory integrate_conjugated(const NetworkParams& params, const LinearFlow& flow, const HistorySegment& phi,
                                double dt, double horizon);

/// Conjugated route driven by the Wong-Zakai flow v^k built from W^k.
Trajectory integrate_wong_zakai(const NetworkParams& params, const BrownianPath& path, std::int64_t k,
                                const HistorySegment& phi, double dt, double horizon);

/// The tau-window of the trajectory ending at t.
HistorySegment end_segment(const Trajectory& traj, double t);

/// CSV with header t,u_1,...,u_n; every `stride`-th node counted from the
/// first history node, plus the final node.
void write_trajectory_csv(const Trajectory& traj, std::ostream& out, std::int64_t stride = 1);

} // namespace sdhnn
