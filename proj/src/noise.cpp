#include "sdhnn/noise.hpp"

#include "sdhnn/csv.hpp"
#include "sdhnn/errors.hpp"
#include "sdhnn/grid.hpp"

#include <fmt/format.h>

#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <string>

namespace sdhnn {

struct BrownianPath::Storage {
    std::size_t m = 0;
    double step = 0.0;
    std::optional<std::uint64_t> seed;
    std::int64_t back_cells = 0;  // cells on [t_min, 0]
    std::int64_t fwd_cells = 0;   // cells on [0, t_max]
    std::vector<double> increments;  // (cell + back_cells) * m + component
    std::vector<double> values;      // (node + back_cells) * m + component

    double inc(std::size_t c, std::int64_t cell) const {
        return increments[static_cast<std::size_t>(cell + back_cells) * m + c];
    }
    double val(std::size_t c, std::int64_t node) const {
        return values[static_cast<std::size_t>(node + back_cells) * m + c];
    }

    void accumulate() {
        values.assign(static_cast<std::size_t>(back_cells + fwd_cells + 1) * m, 0.0);
        auto at = [&](std::int64_t node, std::size_t c) -> double& {
            return values[static_cast<std::size_t>(node + back_cells) * m + c];
        };
        for (std::size_t c = 0; c < m; ++c) {
            for (std::int64_t k = 0; k < fwd_cells; ++k) at(k + 1, c) = at(k, c) + inc(c, k);
            for (std::int64_t k = 0; k > -back_cells; --k) at(k - 1, c) = at(k, c) - inc(c, k - 1);
        }
    }
};

BrownianPath::BrownianPath(std::shared_ptr<const Storage> storage, std::int64_t offset)
    : storage_(std::move(storage)), offset_(offset) {}

namespace {

std::int64_t aligned_nodes(double t, double step, const char* what) {
    const auto c = grid_count(t, step);
    if (!c) throw ConfigError(fmt::format("{} = {} is not a multiple of the path step {}", what, t, step));
    return *c;
}

std::mt19937_64 stream_engine(std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                      stream};
    return std::mt19937_64(seq);
}

} // namespace

BrownianPath BrownianPath::sample(std::size_t components, double step, double t_min, double t_max,
                                  std::uint64_t seed) {
    if (components == 0) throw ConfigError("path needs at least one component");
    if (!(step > 0.0)) throw ConfigError("path step must be positive");
    if (!(t_min <= 0.0 && t_max >= 0.0)) throw ConfigError("path window must contain t = 0");
    const std::int64_t back = -aligned_nodes(t_min, step, "t_min");
    const std::int64_t fwd = aligned_nodes(t_max, step, "t_max");

    auto s = std::make_shared<Storage>();
    s->m = components;
    s->step = step;
    s->seed = seed;
    s->back_cells = back;
    s->fwd_cells = fwd;
    s->increments.resize(static_cast<std::size_t>(back + fwd) * components);

    const double scale = std::sqrt(step);
    {
        auto eng = stream_engine(seed, 0);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::int64_t cell = 0; cell < fwd; ++cell) {
            for (std::size_t c = 0; c < components; ++c) {
                s->increments[static_cast<std::size_t>(cell + back) * components + c] = scale * normal(eng);
            }
        }
    }
    {
        auto eng = stream_engine(seed, 1);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (std::int64_t cell = -1; cell >= -back; --cell) {
            for (std::size_t c = 0; c < components; ++c) {
                s->increments[static_cast<std::size_t>(cell + back) * components + c] = scale * normal(eng);
            }
        }
    }
    s->accumulate();
    return BrownianPath(std::move(s), 0);
}

BrownianPath BrownianPath::from_values(double step, double t_min, const Matrix& values) {
    if (!(step > 0.0)) throw ConfigError("path step must be positive");
    if (values.rows() < 1 || values.cols() < 1) throw ConfigError("path needs at least one node");
    const std::int64_t back = -aligned_nodes(t_min, step, "t_min");
    const std::int64_t fwd = static_cast<std::int64_t>(values.cols()) - 1 - back;
    if (back < 0 || fwd < 0) throw ConfigError("path window must contain t = 0");

    auto s = std::make_shared<Storage>();
    s->m = static_cast<std::size_t>(values.rows());
    s->step = step;
    s->back_cells = back;
    s->fwd_cells = fwd;
    s->values.resize(static_cast<std::size_t>(values.cols()) * s->m);
    for (Eigen::Index k = 0; k < values.cols(); ++k) {
        for (std::size_t c = 0; c < s->m; ++c) {
            s->values[static_cast<std::size_t>(k) * s->m + c] = values(static_cast<Eigen::Index>(c), k);
        }
    }
    for (std::size_t c = 0; c < s->m; ++c) {
        if (s->val(c, 0) != 0.0) throw ConfigError("imported path must vanish at t = 0");
    }
    s->increments.resize(static_cast<std::size_t>(back + fwd) * s->m);
    for (std::int64_t cell = -back; cell < fwd; ++cell) {
        for (std::size_t c = 0; c < s->m; ++c) {
            s->increments[static_cast<std::size_t>(cell + back) * s->m + c] =
                s->val(c, cell + 1) - s->val(c, cell);
        }
    }
    return BrownianPath(std::move(s), 0);
}

std::size_t BrownianPath::components() const { return storage_->m; }
double BrownianPath::step() const { return storage_->step; }
std::optional<std::uint64_t> BrownianPath::seed() const { return storage_->seed; }
std::int64_t BrownianPath::first_node() const { return -storage_->back_cells - offset_; }
std::int64_t BrownianPath::last_node() const { return storage_->fwd_cells - offset_; }

bool BrownianPath::covers(double a, double b) const {
    const double tol = 1e-9 * step();
    return a >= t_min() - tol && b <= t_max() + tol;
}

std::int64_t BrownianPath::node_of(double t) const {
    const std::int64_t k = aligned_nodes(t, step(), "time");
    if (k < first_node() || k > last_node()) {
        throw ConfigError(fmt::format("t = {} outside the path window [{}, {}]", t, t_min(), t_max()));
    }
    return k;
}

double BrownianPath::node_value(std::size_t component, std::int64_t node) const {
    if (component >= components() || node < first_node() || node > last_node()) {
        throw DomainError(fmt::format("path node {} / component {} out of range", node, component));
    }
    if (offset_ == 0) return storage_->val(component, node);
    return storage_->val(component, node + offset_) - storage_->val(component, offset_);
}

double BrownianPath::increment(std::size_t component, std::int64_t cell) const {
    if (component >= components() || cell < first_node() || cell >= last_node()) {
        throw DomainError(fmt::format("path cell {} / component {} out of range", cell, component));
    }
    return storage_->inc(component, cell + offset_);
}

double BrownianPath::value(std::size_t component, double t) const {
    if (!(t >= t_min() - 1e-12 && t <= t_max() + 1e-12)) {
        throw DomainError(fmt::format("t = {} outside the path window [{}, {}]", t, t_min(), t_max()));
    }
    const double pos = t / step();
    const double nearest = std::round(pos);
    if (std::abs(pos - nearest) <= 1e-9 * std::max(1.0, std::abs(pos))) {
        return node_value(component, static_cast<std::int64_t>(nearest));
    }
    const auto lo = static_cast<std::int64_t>(std::floor(pos));
    const double w = pos - static_cast<double>(lo);
    return (1.0 - w) * node_value(component, lo) + w * node_value(component, lo + 1);
}

BrownianPath BrownianPath::shifted(double t) const {
    return shifted_nodes(aligned_nodes(t, step(), "shift"));
}

BrownianPath BrownianPath::shifted_nodes(std::int64_t nodes) const {
    if (nodes < first_node() || nodes > last_node()) {
        throw ConfigError(fmt::format("shift by {} nodes leaves the path window", nodes));
    }
    return BrownianPath(storage_, offset_ + nodes);
}

BrownianPath BrownianPath::extended(double t_min, double t_max) const {
    if (!storage_->seed) throw ConfigError("cannot extend a path that carries no seed");
    const double shift_t = static_cast<double>(offset_) * step();
    const double root_min = std::min(t_min + shift_t, static_cast<double>(-storage_->back_cells) * step());
    const double root_max = std::max(t_max + shift_t, static_cast<double>(storage_->fwd_cells) * step());
    const double lo = std::min(0.0, std::floor(root_min / step() + 1e-9) * step());
    const double hi = std::max(0.0, std::ceil(root_max / step() - 1e-9) * step());
    BrownianPath root = sample(components(), step(), lo, hi, *storage_->seed);
    return BrownianPath(root.storage_, offset_);
}

BrownianPath BrownianPath::coarsened(std::int64_t factor) const {
    if (factor < 1) throw ConfigError("coarsening factor must be positive");
    const std::int64_t lo = -floor_div(-first_node(), factor);  // ceil(first/factor)
    const std::int64_t hi = floor_div(last_node(), factor);
    if (lo > 0 || hi < 0) throw ConfigError("coarsened path window must contain t = 0");

    auto s = std::make_shared<Storage>();
    s->m = components();
    s->step = step() * static_cast<double>(factor);
    s->seed = storage_->seed;
    s->back_cells = -lo;
    s->fwd_cells = hi;
    s->increments.resize(static_cast<std::size_t>(hi - lo) * s->m);
    for (std::int64_t cell = lo; cell < hi; ++cell) {
        for (std::size_t c = 0; c < s->m; ++c) {
            double sum = 0.0;
            for (std::int64_t j = 0; j < factor; ++j) sum += increment(c, cell * factor + j);
            s->increments[static_cast<std::size_t>(cell - lo) * s->m + c] = sum;
        }
    }
    s->accumulate();
    return BrownianPath(std::move(s), 0);
}

BrownianPath sample_path(std::size_t components, double step, double t_min, double t_max,
                         std::uint64_t seed) {
    return BrownianPath::sample(components, step, t_min, t_max, seed);
}

double path_value(const BrownianPath& path, std::size_t component, double t) {
    return path.value(component, t);
}

BrownianPath shift(const BrownianPath& path, double t) { return path.shifted(t); }

// ---------------------------------------------------------------------------
// WongZakaiView

WongZakaiView::WongZakaiView(BrownianPath parent, std::int64_t k) : parent_(std::move(parent)), k_(k) {
    if (k_ < 1) throw ConfigError("Wong-Zakai mesh parameter k must be positive");
    const auto cells = grid_count(1.0 / static_cast<double>(k_), parent_.step());
    if (!cells || *cells < 1) {
        throw ConfigError(
            fmt::format("Wong-Zakai mesh 1/{} is not a multiple of the path step {}", k_, parent_.step()));
    }
    cells_per_knot_ = *cells;
}

double WongZakaiView::knot_value(std::size_t component, std::int64_t knot) const {
    return parent_.node_value(component, knot * cells_per_knot_);
}

double WongZakaiView::knot_slope(std::size_t component, std::int64_t knot) const {
    return static_cast<double>(k_) * (knot_value(component, knot + 1) - knot_value(component, knot));
}

double WongZakaiView::value(std::size_t component, double t) const {
    const double x = t * static_cast<double>(k_);
    const double nearest = std::round(x);
    if (std::abs(x - nearest) <= 1e-9 * std::max(1.0, std::abs(x))) {
        return knot_value(component, static_cast<std::int64_t>(nearest));
    }
    const auto j = static_cast<std::int64_t>(std::floor(x));
    const double a = knot_value(component, j);
    return a + (x - static_cast<double>(j)) * (knot_value(component, j + 1) - a);
}

double WongZakaiView::derivative(std::size_t component, double t) const {
    const double x = t * static_cast<double>(k_);
    const double nearest = std::round(x);
    std::int64_t j = static_cast<std::int64_t>(std::floor(x));
    if (std::abs(x - nearest) <= 1e-9 * std::max(1.0, std::abs(x))) j = static_cast<std::int64_t>(nearest);
    return knot_slope(component, j);
}

double WongZakaiView::derivative_on_cell(std::size_t component, std::int64_t cell) const {
    return knot_slope(component, floor_div(cell, cells_per_knot_));
}

WongZakaiView wong_zakai(const BrownianPath& path, std::int64_t k) { return WongZakaiView(path, k); }

// ---------------------------------------------------------------------------
// CSV

void write_path_csv(const BrownianPath& path, std::ostream& out) {
    std::vector<std::string> row;
    row.emplace_back("t");
    for (std::size_t c = 0; c < path.components(); ++c) row.push_back(fmt::format("W_{}", c + 1));
    write_csv_row(out, row);
    for (std::int64_t k = path.first_node(); k <= path.last_node(); ++k) {
        row.clear();
        row.push_back(format_real(static_cast<double>(k) * path.step()));
        for (std::size_t c = 0; c < path.components(); ++c) row.push_back(format_real(path.node_value(c, k)));
        write_csv_row(out, row);
    }
}

BrownianPath read_path_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("path CSV is empty");
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "t") throw ConfigError("path CSV header must be t,W_1,...,W_m");
    for (std::size_t c = 1; c < header.size(); ++c) {
        if (header[c] != fmt::format("W_{}", c)) throw ConfigError("path CSV header must be t,W_1,...,W_m");
    }
    const std::size_t m = header.size() - 1;
    std::vector<double> times;
    std::vector<std::vector<double>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != m + 1) throw ConfigError(fmt::format("path CSV line {}: wrong field count", line_no));
        times.push_back(parse_real(fields[0]));
        std::vector<double> r(m);
        for (std::size_t c = 0; c < m; ++c) r[c] = parse_real(fields[c + 1]);
        rows.push_back(std::move(r));
    }
    if (times.size() < 2) throw ConfigError("path CSV needs at least two rows");
    const double step = times[1] - times[0];
    for (std::size_t i = 1; i < times.size(); ++i) {
        if (std::abs((times[i] - times[0]) - step * static_cast<double>(i)) > 1e-9 * std::max(1.0, std::abs(times[i]))) {
            throw ConfigError("path CSV times are not uniformly spaced");
        }
    }
    Matrix values(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t c = 0; c < m; ++c) {
            values(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(i)) = rows[i][c];
        }
    }
    return BrownianPath::from_values(step, times[0], values);
}

} // namespace sdhnn
