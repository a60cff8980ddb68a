#pragma once

#include "sdhnn/integrator.hpp"
#include "sdhnn/model.hpp"
#include "sdhnn/noise.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sdhnn {

/// Endpoints U(t_n, theta_{-t_n} omega, phi) for every pullback time and
/// initial segment, obtained by integrating over [-t_n, 0] on the path.
struct PullbackRun {
    std::vector<double> pullback_times;
    std::vector<HistorySegment> initial_set;
    std::vector<std::vector<HistorySegment>> endpoints;  // [time][initial]
    std::vector<double> diameters;                       // max pairwise sup-distance
    std::optional<std::uint64_t> seed;
};

PullbackRun pullback_endpoints(const NetworkParams& params, const BrownianPath& path,
                               const std::vector<double>& pullback_times,
                               const std::vector<HistorySegment>& initial_set, double dt);

/// Sup-distance between the single run to t1 + t2 and the run restarted at
/// t1 from its end segment on the shifted path theta_{t1} omega.
double cocycle_residual(const NetworkParams& params, const BrownianPath& path, double t1, double t2,
                        const HistorySegment& phi, double dt);

struct WongZakaiGap {
    std::int64_t k = 0;
    double gap = 0.0;
};

/// For each k, max over initial segments and nodes t <= horizon of the
/// difference between the Wong-Zakai and the direct trajectory.
std::vector<WongZakaiGap> wong_zakai_gap(const NetworkParams& params, const BrownianPath& path,
                                         const std::vector<std::int64_t>& ks, double horizon,
                                         const std::vector<HistorySegment>& initials, double dt);

struct StationaryEstimate {
    HistorySegment estimate;                // endpoint at the largest pullback time
    std::vector<double> times;
    std::vector<double> cauchy_residuals;   // distance between successive endpoints
    bool converging = true;                 // residuals non-increasing within 5%
    std::vector<std::string> warnings;
};

/// Pullback limit estimate of the random fixed point. Starts from the zero
/// segment unless `start` is given.
StationaryEstimate stationary_point(const NetworkParams& params, const BrownianPath& path,
                                    const std::vector<double>& times, double dt,
                                    const HistorySegment* start = nullptr);

struct AttractionRate {
    std::optional<double> slope;  // empty when the inputs coincide or too few points
    double r_squared = 0.0;
    std::size_t points = 0;
    double fit_end = 0.0;  // last t used (the fit stops before distances underflow 1e-14)
    bool identical = false;
    std::vector<double> times;          // samples entering the fit
    std::vector<double> log_distances;
};

/// Least-squares slope of log |U(t, omega, phi) - U(t, omega, psi)| over [1, horizon].
AttractionRate attraction_rate(const NetworkParams& params, const BrownianPath& path, const HistorySegment& phi,
                               const HistorySegment& psi, double horizon, double dt);

} // namespace sdhnn
