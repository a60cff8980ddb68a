#include "sdhnn/model.hpp"

#include "sdhnn/errors.hpp"
#include "sdhnn/grid.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace sdhnn {

double spectral_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    if (m.isDiagonal(0.0)) return m.diagonal().cwiseAbs().maxCoeff();
    Eigen::JacobiSVD<Matrix> svd(m);
    return svd.singularValues()(0);
}

// ---------------------------------------------------------------------------
// ActivationTable

namespace {

std::size_t cell_of(const ActivationTable& t, double at) {
    if (t.x.size() < 2) throw ConfigError("activation table needs at least two nodes");
    if (!(at >= t.x.front() && at <= t.x.back())) {
        throw DomainError(fmt::format("activation table evaluated at {} outside [{}, {}]", at,
                                      t.x.front(), t.x.back()));
    }
    auto it = std::upper_bound(t.x.begin(), t.x.end(), at);
    std::size_t hi = static_cast<std::size_t>(it - t.x.begin());
    if (hi >= t.x.size()) hi = t.x.size() - 1;
    return hi - 1;
}

void check_table(const ActivationTable& t, const char* name) {
    if (t.x.size() != t.y.size()) {
        throw ConfigError(fmt::format("activation table {}: x and y differ in length", name));
    }
    if (t.x.size() < 2) throw ConfigError(fmt::format("activation table {}: fewer than 2 nodes", name));
    for (std::size_t i = 1; i < t.x.size(); ++i) {
        if (!(t.x[i] > t.x[i - 1])) {
            throw ConfigError(fmt::format("activation table {}: abscissae not increasing", name));
        }
    }
    if (!(t.x.front() <= 0.0 && t.x.back() >= 0.0)) {
        throw ConfigError(fmt::format("activation table {}: range must contain 0", name));
    }
}

} // namespace

double ActivationTable::eval(double at) const {
    const std::size_t c = cell_of(*this, at);
    const double w = (at - x[c]) / (x[c + 1] - x[c]);
    if (w == 0.0) return y[c];
    if (w == 1.0) return y[c + 1];
    return (1.0 - w) * y[c] + w * y[c + 1];
}

double ActivationTable::slope(double at) const {
    const std::size_t c = cell_of(*this, at);
    return (y[c + 1] - y[c]) / (x[c + 1] - x[c]);
}

// ---------------------------------------------------------------------------
// ActivationSpec

ActivationSpec ActivationSpec::tanh(std::size_t n) {
    ActivationSpec s;
    s.kind_ = Kind::Tanh;
    s.lipschitz_f_ = 1.0;
    s.lipschitz_g_ = 1.0;
    s.bound_ = 1.0;
    s.linear_part_ = Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    s.finish();
    return s;
}

ActivationSpec ActivationSpec::table(ActivationTable f, ActivationTable g, double lipschitz_f,
                                     double lipschitz_g, double bound, std::size_t n,
                                     const Matrix* linear_part) {
    check_table(f, "f");
    check_table(g, "g");
    if (!(lipschitz_f >= 0.0) || !(lipschitz_g >= 0.0)) {
        throw ConfigError("Lipschitz constants must be non-negative");
    }
    if (!(bound > 0.0)) throw ConfigError("activation bound M must be positive");

    ActivationSpec s;
    s.kind_ = Kind::Table;
    s.table_f_ = std::move(f);
    s.table_g_ = std::move(g);
    s.lipschitz_f_ = lipschitz_f;
    s.lipschitz_g_ = lipschitz_g;
    s.bound_ = bound;

    if (std::abs(s.table_f_.eval(0.0)) > 1e-12 || std::abs(s.table_g_.eval(0.0)) > 1e-12) {
        throw ConfigError("activations must vanish at 0 (f(0) = g(0) = 0)");
    }

    const auto dim = static_cast<Eigen::Index>(n);
    if (linear_part != nullptr) {
        if (linear_part->rows() != dim || linear_part->cols() != dim) {
            throw ConfigError("linear_part must be n x n");
        }
        s.linear_part_ = *linear_part;
    } else {
        const double h = 1e-7;
        const double lo = std::max(-h, s.table_g_.x.front());
        const double hi = std::min(h, s.table_g_.x.back());
        const double slope0 = (s.table_g_.eval(hi) - s.table_g_.eval(lo)) / (hi - lo);
        s.linear_part_ = slope0 * Matrix::Identity(dim, dim);
    }

    // Cross-check the declared constants on the tables' own nodes.
    auto check = [&](const ActivationTable& t, double lip, const char* name) {
        double max_slope = 0.0;
        double max_abs = 0.0;
        for (std::size_t i = 0; i + 1 < t.x.size(); ++i) {
            max_slope = std::max(max_slope, std::abs((t.y[i + 1] - t.y[i]) / (t.x[i + 1] - t.x[i])));
        }
        for (double v : t.y) max_abs = std::max(max_abs, std::abs(v));
        if (max_slope > lip * (1.0 + 1e-12)) {
            s.warnings_.push_back(fmt::format(
                "declared Lipschitz constant of {} ({}) is below the sampled slope {}", name, lip,
                max_slope));
        }
        if (max_abs > bound * (1.0 + 1e-12)) {
            s.warnings_.push_back(
                fmt::format("declared bound M = {} is exceeded by {} (|{}| = {})", bound, name, name,
                            max_abs));
        }
    };
    check(s.table_f_, lipschitz_f, "f");
    check(s.table_g_, lipschitz_g, "g");
    s.finish();
    return s;
}

void ActivationSpec::finish() {
    // Range of g' over the dense sample of [-10, 10] (clipped to the table).
    double lo = -10.0;
    double hi = 10.0;
    if (kind_ == Kind::Table) {
        lo = std::max(lo, table_g_.x.front());
        hi = std::min(hi, table_g_.x.back());
    }
    constexpr int samples = 10001;
    double dmin = std::numeric_limits<double>::infinity();
    double dmax = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
        const double x = lo + (hi - lo) * static_cast<double>(i) / (samples - 1);
        const double d = derivative(x, Which::G);
        dmin = std::min(dmin, d);
        dmax = std::max(dmax, d);
    }

    // |diag(d) - L| is convex in d, so its maximum over the box
    // [dmin, dmax]^n sits on a vertex.
    const Eigen::Index n = linear_part_.rows();
    double sup = 0.0;
    if (linear_part_.isDiagonal(0.0)) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const double l = linear_part_(j, j);
            sup = std::max({sup, std::abs(dmin - l), std::abs(dmax - l)});
        }
    } else if (n <= 10) {
        const std::uint32_t vertices = 1u << n;
        Matrix d = Matrix::Zero(n, n);
        for (std::uint32_t mask = 0; mask < vertices; ++mask) {
            for (Eigen::Index j = 0; j < n; ++j) d(j, j) = (mask >> j) & 1u ? dmax : dmin;
            sup = std::max(sup, spectral_norm(d - linear_part_));
        }
    } else {
        sup = std::max(std::abs(dmin), std::abs(dmax)) + spectral_norm(linear_part_);
        warnings_.push_back("L_g_tilde for non-diagonal L with n > 10 uses a triangle-inequality bound");
    }
    lipschitz_g_tilde_ = sup;
}

double ActivationSpec::scalar(double x, Which which) const {
    if (kind_ == Kind::Tanh) return std::tanh(x);
    return which == Which::F ? table_f_.eval(x) : table_g_.eval(x);
}

double ActivationSpec::derivative(double x, Which which) const {
    if (kind_ == Kind::Tanh) {
        const double t = std::tanh(x);
        return 1.0 - t * t;
    }
    return which == Which::F ? table_f_.slope(x) : table_g_.slope(x);
}

void ActivationSpec::apply(Which which, const Vector& in, Vector& out) const {
    if (kind_ == Kind::Tanh) {
        out = in.array().tanh();
        return;
    }
    const ActivationTable& t = which == Which::F ? table_f_ : table_g_;
    for (Eigen::Index j = 0; j < in.size(); ++j) out(j) = t.eval(in(j));
}

Vector evaluate_activation(const ActivationSpec& spec, const Vector& x, Which which) {
    Vector out(x.size());
    spec.apply(which, x, out);
    return out;
}

// ---------------------------------------------------------------------------
// NetworkParams

double NetworkParams::tau() const {
    return delays.empty() ? 0.0 : *std::max_element(delays.begin(), delays.end());
}

bool NetworkParams::sigma_is_diagonal() const { return Sigma.isDiagonal(0.0); }

NetworkParams benchmark_network(double delay) {
    NetworkParams p;
    p.C = Vector::Constant(2, 5.0).asDiagonal();
    p.H.resize(2, 2);
    p.H << 0.2, 0.1, 0.3, 0.1;
    p.B.resize(2, 2);
    p.B << -0.3, 0.2, 0.1, 0.3;
    p.Sigma = Matrix::Zero(2, 2);
    p.Sigma(0, 0) = 0.01;
    p.Sigma(1, 1) = 0.02;
    p.delays = {delay, delay};
    p.activation = ActivationSpec::tanh(2);
    return p;
}

std::string ValidationReport::summary() const {
    std::string out;
    for (const auto& s : issues) {
        if (!out.empty()) out += "; ";
        out += s;
    }
    return out;
}

ValidationReport validate_params(const NetworkParams& p, double dt) {
    ValidationReport r;
    const auto n = static_cast<Eigen::Index>(p.n());
    if (n == 0) {
        r.issues.emplace_back("state dimension n must be positive");
        return r;
    }
    auto check_dims = [&](const Matrix& m, const char* name) {
        if (m.rows() != n || m.cols() != n) {
            r.issues.push_back(fmt::format("{} is {}x{}, expected {}x{}", name, m.rows(), m.cols(), n, n));
            return false;
        }
        if (!m.allFinite()) r.issues.push_back(fmt::format("{} has non-finite entries", name));
        return true;
    };
    if (check_dims(p.C, "C")) {
        if (!p.C.isDiagonal(0.0)) r.issues.emplace_back("C must be diagonal");
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!(p.C(i, i) > 0.0)) {
                r.issues.push_back(fmt::format("C[{}][{}] = {} must be positive", i, i, p.C(i, i)));
            }
        }
    }
    check_dims(p.H, "H");
    check_dims(p.B, "B");
    check_dims(p.Sigma, "Sigma");
    if (p.activation.linear_part().rows() != n) {
        r.issues.emplace_back("activation dimension does not match n");
    }
    if (static_cast<Eigen::Index>(p.delays.size()) != n) {
        r.issues.push_back(fmt::format("expected {} delays, got {}", n, p.delays.size()));
    }
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        r.issues.push_back(fmt::format("dt = {} must be positive", dt));
    }
    for (std::size_t j = 0; j < p.delays.size(); ++j) {
        const double d = p.delays[j];
        if (!(d > 0.0) || !std::isfinite(d)) {
            r.issues.push_back(fmt::format("delay {} = {} must be positive", j + 1, d));
            continue;
        }
        if (dt > 0.0) {
            const auto count = grid_count(d, dt);
            if (!count || *count < 1) {
                r.issues.push_back(
                    fmt::format("delay {} = {} is not a positive integer multiple of dt = {}", j + 1, d, dt));
            }
        }
    }
    return r;
}

void require_valid(const NetworkParams& p, double dt) {
    const auto r = validate_params(p, dt);
    if (!r.ok()) throw ConfigError("invalid parameters: " + r.summary());
}

std::vector<std::int64_t> delay_offsets(const NetworkParams& p, double dt) {
    std::vector<std::int64_t> out;
    out.reserve(p.delays.size());
    for (double d : p.delays) {
        const auto c = grid_count(d, dt);
        if (!c || *c < 1) throw ConfigError(fmt::format("delay {} is not a multiple of dt = {}", d, dt));
        out.push_back(*c);
    }
    return out;
}

// ---------------------------------------------------------------------------
// HistorySegment

HistorySegment::HistorySegment(double step, Matrix values) : step_(step), values_(std::move(values)) {
    if (!(step_ > 0.0)) throw ConfigError("segment step must be positive");
    if (values_.cols() < 1 || values_.rows() < 1) throw ConfigError("segment must hold at least one node");
}

HistorySegment HistorySegment::constant(const Vector& head, double span, double step) {
    const auto count = grid_count(span, step);
    if (!count || *count < 0) {
        throw ConfigError(fmt::format("segment span {} is not a multiple of step {}", span, step));
    }
    Matrix values = head.replicate(1, static_cast<Eigen::Index>(*count + 1));
    return HistorySegment(step, std::move(values));
}

HistorySegment HistorySegment::zero(std::size_t n, double span, double step) {
    return constant(Vector::Zero(static_cast<Eigen::Index>(n)), span, step);
}

Vector HistorySegment::eval(double s) const {
    const double sp = span();
    if (!(s >= -sp && s <= 0.0)) {
        throw DomainError(fmt::format("segment evaluated at s = {} outside [{}, 0]", s, -sp));
    }
    const double pos = (s + sp) / step_;
    const double nearest = std::round(pos);
    const Eigen::Index last = values_.cols() - 1;
    if (std::abs(pos - nearest) <= 1e-9 * std::max(1.0, pos)) {
        return values_.col(std::min<Eigen::Index>(static_cast<Eigen::Index>(nearest), last));
    }
    auto lo = static_cast<Eigen::Index>(std::floor(pos));
    lo = std::clamp<Eigen::Index>(lo, 0, last - 1);
    const double w = pos - static_cast<double>(lo);
    return (1.0 - w) * values_.col(lo) + w * values_.col(lo + 1);
}

double HistorySegment::norm() const { return values_.colwise().norm().maxCoeff(); }

HistorySegment HistorySegment::scaled(double alpha) const { return HistorySegment(step_, alpha * values_); }

double segment_distance(const HistorySegment& a, const HistorySegment& b) {
    if (a.values().rows() != b.values().rows() || a.values().cols() != b.values().cols()) {
        throw ConfigError("segments live on different grids");
    }
    return (a.values() - b.values()).colwise().norm().maxCoeff();
}

} // namespace sdhnn
