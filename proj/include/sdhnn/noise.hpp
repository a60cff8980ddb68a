#pragma once

#include "sdhnn/model.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>

namespace sdhnn {

/// Two-sided m-component Wiener path sampled on a uniform grid of step
/// `step()`. W(0) = 0 exactly; node values are signed prefix sums of the
/// stored increments.
///
/// A path is a cheap view over shared immutable storage: shifted() moves
/// the origin by an index offset, so theta_t omega reads the very same
/// increments as omega.
class BrownianPath {
public:
    /// Independent N(0, step) increments for every component and cell of
    /// [t_min, t_max]. Forward and backward cells come from two separate
    /// streams seeded from `seed`, so widening the range never changes
    /// values already sampled.
    static BrownianPath sample(std::size_t components, double step, double t_min, double t_max,
                               std::uint64_t seed);

    /// Path given by its node values (column k at t_min + k*step). The node
    /// at t = 0 must be zero. Such paths carry no seed.
    static BrownianPath from_values(double step, double t_min, const Matrix& values);

    std::size_t components() const;
    double step() const;
    std::optional<std::uint64_t> seed() const;

    /// First/last node index in this view's coordinates (node k is t = k*step).
    std::int64_t first_node() const;
    std::int64_t last_node() const;
    double t_min() const { return static_cast<double>(first_node()) * step(); }
    double t_max() const { return static_cast<double>(last_node()) * step(); }
    bool covers(double a, double b) const;

    /// Node index of a grid-aligned time; throws ConfigError otherwise.
    std::int64_t node_of(double t) const;

    double node_value(std::size_t component, std::int64_t node) const;

    /// W(cell+1) - W(cell), read straight from storage.
    double increment(std::size_t component, std::int64_t cell) const;

    /// Prefix-sum value at nodes, linear interpolation inside a cell.
    double value(std::size_t component, double t) const;

    /// theta_t: s -> W(t + s) - W(t). `t` must be grid aligned.
    BrownianPath shifted(double t) const;
    BrownianPath shifted_nodes(std::int64_t nodes) const;

    /// Same path on a wider window (re-sampled deterministically from the
    /// seed). Throws ConfigError for seedless paths.
    BrownianPath extended(double t_min, double t_max) const;

    /// Path on the grid factor*step whose increments are sums of `factor`
    /// consecutive fine increments, aligned at t = 0.
    BrownianPath coarsened(std::int64_t factor) const;

private:
    struct Storage;
    BrownianPath(std::shared_ptr<const Storage> storage, std::int64_t offset);

    std::shared_ptr<const Storage> storage_;
    std::int64_t offset_ = 0;
};

/// Convenience wrapper around BrownianPath::sample.
BrownianPath sample_path(std::size_t components, double step, double t_min, double t_max,
                         std::uint64_t seed);
double path_value(const BrownianPath& path, std::size_t component, double t);
BrownianPath shift(const BrownianPath& path, double t);

/// Piecewise-linear interpolant W^k of a path on the knots j/k.
class WongZakaiView {
public:
    WongZakaiView(BrownianPath parent, std::int64_t k);

    std::int64_t k() const { return k_; }
    /// Path cells per knot interval, (1/k)/step.
    std::int64_t cells_per_knot() const { return cells_per_knot_; }
    const BrownianPath& path() const { return parent_; }

    double value(std::size_t component, double t) const;
    /// k [W((j+1)/k) - W(j/k)] on [j/k, (j+1)/k).
    double derivative(std::size_t component, double t) const;
    /// Derivative on the path cell [cell*step, (cell+1)*step).
    double derivative_on_cell(std::size_t component, std::int64_t cell) const;

private:
    double knot_value(std::size_t component, std::int64_t knot) const;
    double knot_slope(std::size_t component, std::int64_t knot) const;

    BrownianPath parent_;
    std::int64_t k_;
    std::int64_t cells_per_knot_;
};

WongZakaiView wong_zakai(const BrownianPath& path, std::int64_t k);

/// CSV with header t,W_1,...,W_m and one row per node.
void write_path_csv(const BrownianPath& path, std::ostream& out);
BrownianPath read_path_csv(std::istream& in);

} // namespace sdhnn
