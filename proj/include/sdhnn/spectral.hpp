#pragma once

#include "sdhnn/linear_flow.hpp"
#include "sdhnn/model.hpp"

#include <json.hpp>

#include <complex>
#include <optional>
#include <vector>

namespace sdhnn {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;

/// Rectangle in the complex plane; roots are searched with Im >= 0 and
/// mirrored.
struct SearchBox {
    double re_min = 0.0;
    double re_max = 0.0;
    double im_min = 0.0;
    double im_max = 0.0;

    bool contains(Complex z, double slack = 1e-9) const {
        return z.real() >= re_min - slack && z.real() <= re_max + slack && z.imag() >= im_min - slack &&
               z.imag() <= im_max + slack;
    }
};

/// Re in [-3 |C|, 1], Im in [0, 50 / tau].
SearchBox default_search_box(const NetworkParams& params);

/// Delta(lambda) = lambda I + C - K diag(exp(-lambda tau_j)).
/// For the network, K = B L with L the linear part of g.
struct CharacteristicFunction {
    Matrix C;
    Matrix K;
    std::vector<double> delays;

    static CharacteristicFunction of(const NetworkParams& params);

    ComplexMatrix matrix(Complex lambda) const;
    /// I + K diag(tau_j exp(-lambda tau_j)).
    ComplexMatrix derivative(Complex lambda) const;
    Complex determinant(Complex lambda) const;
    /// d det / d lambda: the sum over columns k of det(Delta with column k
    /// replaced by column k of Delta').
    Complex determinant_derivative(Complex lambda) const;
};

ComplexMatrix characteristic_matrix(const NetworkParams& params, Complex lambda);

struct CharacteristicRoot {
    Complex value;
    double residual = 0.0;
    int multiplicity = 1;  // winding number of det on a small circle around the root
};

struct RootSearchOptions {
    int starts_re = 40;
    int starts_im = 40;
    int max_iterations = 100;
    double step_tolerance = 1e-13;
    double max_residual = 1e-9;
    double dedup_distance = 1e-6;
};

struct SpectralResult {
    std::vector<CharacteristicRoot> roots;  // sorted by real, then imaginary part
    double abscissa = 0.0;
    SearchBox search_box;
    std::optional<double> gamma;
    std::optional<double> K0;
    std::optional<double> K1;
};

/// Newton's method from a grid of starts in the box; converged roots are
/// deduplicated and closed under conjugation. Throws EmptySpectrumError
/// if no root is found in the box.
SpectralResult dominant_roots(const CharacteristicFunction& chr, const SearchBox& box,
                              const RootSearchOptions& options = {});
SpectralResult dominant_roots(const NetworkParams& params, const SearchBox& box,
                              const RootSearchOptions& options = {});

/// Matrix solution of dS/dt = -C S + B L S_delayed with S(0) = I and
/// S = 0 before 0 (explicit Euler, row j delayed by tau_j).
struct FundamentalSolution {
    double step = 0.0;
    std::vector<Matrix> values;  // node i at t = i * step

    double horizon() const { return step * static_cast<double>(values.size() - 1); }
};

FundamentalSolution fundamental_solution(const NetworkParams& params, double horizon, double dt);

struct DecayConstants {
    double gamma = 0.0;
    double K0 = 1.0;
    double K1 = 1.0;
};

/// gamma = gamma_fraction * (-rho), K1 = max |S(t)| e^{-rho t / 2},
/// K0 = max(1, max |S(t)| e^{gamma t}). Throws
/// UnstableLinearizationError when rho >= 0; the solution must reach
/// t >= 10 / (-rho).
DecayConstants decay_constants(double rho, const FundamentalSolution& S, double gamma_fraction = 0.9);

void attach(SpectralResult& result, const DecayConstants& constants);

/// Spread of the frozen-coefficient abscissa
///   det[lambda I + C - v(t)^{-1} B L diag(v_jj(t - tau_j) e^{-lambda tau_j})]
/// over sampled times of an exact-diagonal flow.
struct FrozenSpread {
    double min_abscissa = 0.0;
    double max_abscissa = 0.0;
    std::size_t samples = 0;
};

FrozenSpread frozen_spectrum_spread(const NetworkParams& params, const LinearFlow& flow,
                                    const std::vector<double>& times, const SearchBox& box);

nlohmann::json to_json(const SpectralResult& result);

} // namespace sdhnn
