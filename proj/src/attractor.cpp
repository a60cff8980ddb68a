#include "sdhnn/attractor.hpp"

#include "sdhnn/errors.hpp"
#include "sdhnn/grid.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace sdhnn {

namespace {

double diameter(const std::vector<HistorySegment>& segments) {
    double d = 0.0;
    for (std::size_t a = 0; a < segments.size(); ++a) {
        for (std::size_t b = a + 1; b < segments.size(); ++b) d = std::max(d, segment_distance(segments[a], segments[b]));
    }
    return d;
}

void require_pullback_window(const BrownianPath& path, double t, double tau) {
    if (!path.covers(-t - tau, 0.0)) {
        throw ConfigError(fmt::format("path window [{}, {}] does not reach back to {}; extend the path", path.t_min(),
                                      path.t_max(), -t - tau));
    }
}

HistorySegment pullback_endpoint(const NetworkParams& params, const BrownianPath& path, double t,
                                 const HistorySegment& phi, double dt) {
    const Trajectory traj = integrate_direct(params, path, phi, dt, t, -t);
    return end_segment(traj, 0.0);
}

} // namespace

PullbackRun pullback_endpoints(const NetworkParams& params, const BrownianPath& path,
                               const std::vector<double>& pullback_times,
                               const std::vector<HistorySegment>& initial_set, double dt) {
    if (initial_set.empty()) throw ConfigError("pullback needs at least one initial segment");
    for (std::size_t i = 1; i < pullback_times.size(); ++i) {
        if (!(pullback_times[i] > pullback_times[i - 1])) throw ConfigError("pullback times must increase");
    }
    PullbackRun run;
    run.pullback_times = pullback_times;
    run.initial_set = initial_set;
    run.seed = path.seed();
    for (double t : pullback_times) {
        require_pullback_window(path, t, params.tau());
        std::vector<HistorySegment> ends;
        ends.reserve(initial_set.size());
        for (const auto& phi : initial_set) ends.push_back(pullback_endpoint(params, path, t, phi, dt));
        run.diameters.push_back(diameter(ends));
        run.endpoints.push_back(std::move(ends));
    }
    return run;
}

double cocycle_residual(const NetworkParams& params, const BrownianPath& path, double t1, double t2,
                        const HistorySegment& phi, double dt) {
    const Trajectory whole = integrate_direct(params, path, phi, dt, t1 + t2);
    const Trajectory first = integrate_direct(params, path, phi, dt, t1);
    const BrownianPath shifted = path.shifted(t1);
    const Trajectory second = integrate_direct(params, shifted, end_segment(first, t1), dt, t2);

    const std::int64_t offset = whole.column_of(t1) - second.history_nodes;
    double residual = 0.0;
    for (std::int64_t col = 0; col < second.node_count(); ++col) {
        residual = std::max(residual, (second.states.col(col) - whole.states.col(col + offset)).norm());
    }
    return residual;
}

std::vector<WongZakaiGap> wong_zakai_gap(const NetworkParams& params, const BrownianPath& path,
                                         const std::vector<std::int64_t>& ks, double horizon,
                                         const std::vector<HistorySegment>& initials, double dt) {
    std::vector<Trajectory> reference;
    reference.reserve(initials.size());
    for (const auto& phi : initials) reference.push_back(integrate_direct(params, path, phi, dt, horizon));

    std::vector<WongZakaiGap> out;
    for (std::int64_t k : ks) {
        double gap = 0.0;
        for (std::size_t i = 0; i < initials.size(); ++i) {
            const Trajectory approx = integrate_wong_zakai(params, path, k, initials[i], dt, horizon);
            gap = std::max(gap, (approx.states - reference[i].states).colwise().norm().maxCoeff());
        }
        out.push_back({k, gap});
    }
    return out;
}

StationaryEstimate stationary_point(const NetworkParams& params, const BrownianPath& path,
                                    const std::vector<double>& times, double dt, const HistorySegment* start) {
    if (times.empty()) throw ConfigError("stationary point needs at least one pullback time");
    const HistorySegment zero = HistorySegment::zero(params.n(), params.tau(), dt);
    const HistorySegment& phi = start != nullptr ? *start : zero;
    const PullbackRun run = pullback_endpoints(params, path, times, {phi}, dt);

    StationaryEstimate out;
    out.times = times;
    out.estimate = run.endpoints.back().front();
    for (std::size_t i = 1; i < times.size(); ++i) {
        out.cauchy_residuals.push_back(segment_distance(run.endpoints[i].front(), run.endpoints[i - 1].front()));
    }
    for (std::size_t i = 1; i < out.cauchy_residuals.size(); ++i) {
        if (out.cauchy_residuals[i] > 1.05 * out.cauchy_residuals[i - 1]) out.converging = false;
    }
    if (!out.converging) {
        out.warnings.emplace_back("Cauchy residuals do not decrease; the attractor may not be a single point");
    }
    return out;
}

AttractionRate attraction_rate(const NetworkParams& params, const BrownianPath& path, const HistorySegment& phi,
                               const HistorySegment& psi, double horizon, double dt) {
    AttractionRate out;
    if (segment_distance(phi, psi) == 0.0) {
        out.identical = true;
        return out;
    }
    const Trajectory a = integrate_direct(params, path, phi, dt, horizon);
    const Trajectory b = integrate_direct(params, path, psi, dt, horizon);
    const std::int64_t window = a.history_nodes;
    const Eigen::RowVectorXd pointwise = (a.states - b.states).colwise().norm();

    constexpr double t_from = 1.0;
    std::vector<double> ts;
    std::vector<double> logs;
    for (std::int64_t col = window; col < a.node_count(); ++col) {
        const double t = a.time_at(col);
        if (t < t_from - 1e-12) continue;
        const double d = pointwise.segment(col - window, window + 1).maxCoeff();
        if (d < 1e-14) break;
        ts.push_back(t);
        logs.push_back(std::log(d));
    }
    out.points = ts.size();
    out.times = ts;
    out.log_distances = logs;
    if (ts.size() < 2) return out;
    out.fit_end = ts.back();

    const double count = static_cast<double>(ts.size());
    double mt = 0.0, ml = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        mt += ts[i];
        ml += logs[i];
    }
    mt /= count;
    ml /= count;
    double stt = 0.0, stl = 0.0, sll = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        stt += (ts[i] - mt) * (ts[i] - mt);
        stl += (ts[i] - mt) * (logs[i] - ml);
        sll += (logs[i] - ml) * (logs[i] - ml);
    }
    out.slope = stl / stt;
    out.r_squared = sll > 0.0 ? (stl * stl) / (stt * sll) : 1.0;
    return out;
}

} // namespace sdhnn
