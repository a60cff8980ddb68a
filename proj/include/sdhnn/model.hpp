#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace sdhnn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Spectral (operator 2-) norm.
double spectral_norm(const Matrix& m);

enum class Which { F, G };

/// Scalar activation sampled on increasing abscissae; evaluated by linear
/// interpolation and undefined outside [x.front(), x.back()].
struct ActivationTable {
    std::vector<double> x;
    std::vector<double> y;

    double eval(double at) const;
    double slope(double at) const;
};

/// Componentwise activations f and g with their global constants.
///
/// `linear_part` is the matrix L in the split g = L + g_tilde. The
/// Lipschitz constant of g_tilde is estimated numerically as
/// sup |Dg(x) - L| over a dense sample of [-10, 10]; the closed form
/// L_g - |L| is kept alongside for comparison.
class ActivationSpec {
public:
    enum class Kind { Tanh, Table };

    static ActivationSpec tanh(std::size_t n);

    /// Tabulated activations with user-declared constants. The constants
    /// are cross-checked by sampling; mismatches end up in warnings().
    /// Throws ConfigError when f(0) or g(0) is not 0.
    static ActivationSpec table(ActivationTable f, ActivationTable g, double lipschitz_f,
                                double lipschitz_g, double bound, std::size_t n,
                                const Matrix* linear_part = nullptr);

    Kind kind() const { return kind_; }
    std::size_t dim() const { return static_cast<std::size_t>(linear_part_.rows()); }
    double lipschitz_f() const { return lipschitz_f_; }
    double lipschitz_g() const { return lipschitz_g_; }
    double bound() const { return bound_; }
    const Matrix& linear_part() const { return linear_part_; }
    double lipschitz_g_tilde() const { return lipschitz_g_tilde_; }
    double lipschitz_g_tilde_formula() const { return lipschitz_g_ - spectral_norm(linear_part_); }
    const std::vector<std::string>& warnings() const { return warnings_; }
    const ActivationTable& table_f() const { return table_f_; }
    const ActivationTable& table_g() const { return table_g_; }

    double scalar(double x, Which which) const;
    double derivative(double x, Which which) const;

    /// out_j = act(in_j). `out` must already have the right size.
    void apply(Which which, const Vector& in, Vector& out) const;

private:
    void finish();

    Kind kind_ = Kind::Tanh;
    double lipschitz_f_ = 1.0;
    double lipschitz_g_ = 1.0;
    double bound_ = 1.0;
    Matrix linear_part_;
    double lipschitz_g_tilde_ = 0.0;
    ActivationTable table_f_;
    ActivationTable table_g_;
    std::vector<std::string> warnings_;
};

Vector evaluate_activation(const ActivationSpec& spec, const Vector& x, Which which);

/// du = [-C u + H f(u) + B g(u(t - tau))] dt + Sigma (u <> dw), where the
/// delayed argument reads component j at t - delays[j].
struct NetworkParams {
    Matrix C;
    Matrix H;
    Matrix B;
    Matrix Sigma;
    std::vector<double> delays;
    ActivationSpec activation;

    std::size_t n() const { return static_cast<std::size_t>(C.rows()); }
    double tau() const;
    bool sigma_is_diagonal() const;
};

/// Two-neuron tanh network with delays 0.1 used throughout the examples:
/// C = diag(5,5), H = [[0.2,0.1],[0.3,0.1]], B = [[-0.3,0.2],[0.1,0.3]],
/// Sigma = diag(0.01, 0.02).
NetworkParams benchmark_network(double delay = 0.1);

struct ValidationReport {
    std::vector<std::string> issues;
    bool ok() const { return issues.empty(); }
    std::string summary() const;
};

/// Checks every structural invariant plus "each delay is a positive
/// integer multiple of dt".
ValidationReport validate_params(const NetworkParams& p, double dt);

/// Throws ConfigError listing every issue.
void require_valid(const NetworkParams& p, double dt);

/// Delays expressed in grid nodes. Throws ConfigError if a delay is not a
/// multiple of dt.
std::vector<std::int64_t> delay_offsets(const NetworkParams& p, double dt);

/// An element of C([-span, 0], R^n) sampled on a uniform grid. Column k of
/// values() is the node at s = -span + k * step; the last column is the
/// head (s = 0). Between nodes the segment is linear.
class HistorySegment {
public:
    HistorySegment() = default;
    HistorySegment(double step, Matrix values);

    static HistorySegment constant(const Vector& head, double span, double step);
    static HistorySegment zero(std::size_t n, double span, double step);

    double step() const { return step_; }
    std::size_t dim() const { return static_cast<std::size_t>(values_.rows()); }
    std::size_t node_count() const { return static_cast<std::size_t>(values_.cols()); }
    double span() const { return step_ * static_cast<double>(node_count() - 1); }
    const Matrix& values() const { return values_; }
    Vector node(std::size_t k) const { return values_.col(static_cast<Eigen::Index>(k)); }
    Vector head() const { return values_.col(values_.cols() - 1); }

    /// Value at s in [-span, 0]; throws DomainError outside.
    Vector eval(double s) const;

    /// sup over nodes of the Euclidean norm.
    double norm() const;

    HistorySegment scaled(double alpha) const;

private:
    double step_ = 0.0;
    Matrix values_;
};

/// Sup-norm distance between two segments on the same grid.
double segment_distance(const HistorySegment& a, const HistorySegment& b);

} // namespace sdhnn
