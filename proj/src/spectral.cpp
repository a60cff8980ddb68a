#include "sdhnn/spectral.hpp"

#include "sdhnn/errors.hpp"
#include "sdhnn/grid.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace sdhnn {

SearchBox default_search_box(const NetworkParams& params) {
    return SearchBox{-3.0 * spectral_norm(params.C), 1.0, 0.0, 50.0 / params.tau()};
}

CharacteristicFunction CharacteristicFunction::of(const NetworkParams& params) {
    return CharacteristicFunction{params.C, params.B * params.activation.linear_part(), params.delays};
}

ComplexMatrix CharacteristicFunction::matrix(Complex lambda) const {
    const Eigen::Index n = C.rows();
    ComplexMatrix m = C.cast<Complex>();
    m.diagonal().array() += lambda;
    for (Eigen::Index j = 0; j < n; ++j) {
        const Complex e = std::exp(-lambda * delays[static_cast<std::size_t>(j)]);
        m.col(j) -= K.col(j).cast<Complex>() * e;
    }
    return m;
}

ComplexMatrix CharacteristicFunction::derivative(Complex lambda) const {
    const Eigen::Index n = C.rows();
    ComplexMatrix m = ComplexMatrix::Identity(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double tau = delays[static_cast<std::size_t>(j)];
        m.col(j) += K.col(j).cast<Complex>() * (tau * std::exp(-lambda * tau));
    }
    return m;
}

Complex CharacteristicFunction::determinant(Complex lambda) const { return matrix(lambda).determinant(); }

Complex CharacteristicFunction::determinant_derivative(Complex lambda) const {
    const ComplexMatrix m = matrix(lambda);
    const ComplexMatrix d = derivative(lambda);
    Complex sum(0.0, 0.0);
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
        ComplexMatrix replaced = m;
        replaced.col(k) = d.col(k);
        sum += replaced.determinant();
    }
    return sum;
}

ComplexMatrix characteristic_matrix(const NetworkParams& params, Complex lambda) {
    return CharacteristicFunction::of(params).matrix(lambda);
}

namespace {

std::optional<Complex> newton(const CharacteristicFunction& chr, Complex z, const RootSearchOptions& opt) {
    for (int it = 0; it < opt.max_iterations; ++it) {
        const Complex d = chr.determinant(z);
        const Complex dd = chr.determinant_derivative(z);
        if (d == Complex(0.0, 0.0)) return z;
        if (std::abs(dd) == 0.0 || !std::isfinite(std::abs(dd))) return std::nullopt;
        const Complex step = d / dd;
        z -= step;
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return std::nullopt;
        if (std::abs(step) <= opt.step_tolerance * std::max(1.0, std::abs(z))) return z;
    }
    return std::nullopt;
}

int multiplicity(const CharacteristicFunction& chr, Complex z, double radius) {
    constexpr int points = 256;
    double total = 0.0;
    Complex previous = chr.determinant(z + radius);
    for (int k = 1; k <= points; ++k) {
        const Complex current = chr.determinant(z + std::polar(radius, 2.0 * M_PI * k / points));
        total += std::arg(current / previous);
        previous = current;
    }
    return std::max(1, static_cast<int>(std::lround(total / (2.0 * M_PI))));
}

bool root_less(const CharacteristicRoot& a, const CharacteristicRoot& b) {
    if (a.value.real() != b.value.real()) return a.value.real() < b.value.real();
    return a.value.imag() < b.value.imag();
}

} // namespace

SpectralResult dominant_roots(const CharacteristicFunction& chr, const SearchBox& box,
                              const RootSearchOptions& opt) {
    if (!(box.re_max > box.re_min) || !(box.im_max >= box.im_min)) throw ConfigError("degenerate search box");
    std::vector<CharacteristicRoot> found;
    for (int a = 0; a < opt.starts_re; ++a) {
        for (int b = 0; b < opt.starts_im; ++b) {
            const double re = box.re_min + (box.re_max - box.re_min) * a / std::max(1, opt.starts_re - 1);
            const double im = box.im_min + (box.im_max - box.im_min) * b / std::max(1, opt.starts_im - 1);
            auto z = newton(chr, Complex(re, im), opt);
            if (!z) continue;
            if (z->imag() < 0.0) *z = std::conj(*z);
            if (std::abs(z->imag()) < 1e-8) {
                // Polish on the real axis: real coefficients keep Newton real.
                auto real_root = newton(chr, Complex(z->real(), 0.0), opt);
                if (real_root && std::abs(*real_root - *z) < 1e-6) z = Complex(real_root->real(), 0.0);
            }
            if (!box.contains(*z)) continue;
            const double residual = std::abs(chr.determinant(*z));
            if (!(residual < opt.max_residual)) continue;
            found.push_back({*z, residual});
        }
    }
    std::sort(found.begin(), found.end(), root_less);

    std::vector<CharacteristicRoot> unique;
    for (const auto& r : found) {
        const bool dup = std::any_of(unique.begin(), unique.end(), [&](const CharacteristicRoot& u) {
            return std::abs(u.value - r.value) < opt.dedup_distance;
        });
        if (!dup) unique.push_back(r);
    }
    if (unique.empty()) {
        throw EmptySpectrumError(fmt::format(
            "no characteristic root found in Re [{}, {}] x Im [{}, {}]; widen the search box", box.re_min,
            box.re_max, box.im_min, box.im_max));
    }

    for (auto& r : unique) {
        double radius = 1e-3;
        for (const auto& other : unique) {
            if (&other != &r) radius = std::min(radius, 0.5 * std::abs(other.value - r.value));
        }
        if (r.value.imag() > 0.0) radius = std::min(radius, 0.5 * r.value.imag());
        r.multiplicity = multiplicity(chr, r.value, radius);
    }

    SpectralResult result;
    result.search_box = box;
    for (const auto& r : unique) {
        result.roots.push_back(r);
        if (r.value.imag() > 0.0) result.roots.push_back({std::conj(r.value), r.residual, r.multiplicity});
    }
    std::sort(result.roots.begin(), result.roots.end(), root_less);
    result.abscissa = result.roots.front().value.real();
    for (const auto& r : result.roots) result.abscissa = std::max(result.abscissa, r.value.real());
    return result;
}

SpectralResult dominant_roots(const NetworkParams& params, const SearchBox& box, const RootSearchOptions& options) {
    return dominant_roots(CharacteristicFunction::of(params), box, options);
}

FundamentalSolution fundamental_solution(const NetworkParams& params, double horizon, double dt) {
    require_valid(params, dt);
    const auto delays = delay_offsets(params, dt);
    const auto steps = grid_count(horizon, dt);
    if (!steps || *steps < 0) throw ConfigError(fmt::format("horizon {} is not a multiple of dt = {}", horizon, dt));
    const Eigen::Index n = static_cast<Eigen::Index>(params.n());
    const Matrix K = params.B * params.activation.linear_part();

    FundamentalSolution S;
    S.step = dt;
    S.values.reserve(static_cast<std::size_t>(*steps + 1));
    S.values.push_back(Matrix::Identity(n, n));
    Matrix delayed(n, n);
    for (std::int64_t i = 0; i < *steps; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const std::int64_t src = i - delays[static_cast<std::size_t>(j)];
            if (src >= 0) {
                delayed.row(j) = S.values[static_cast<std::size_t>(src)].row(j);
            } else {
                delayed.row(j).setZero();
            }
        }
        const Matrix& cur = S.values.back();
        Matrix next = cur + dt * (-params.C * cur + K * delayed);
        const double norm = next.norm();
        if (!(norm <= 1e12)) {
            throw DivergenceError(fmt::format("fundamental solution diverged at t = {}", static_cast<double>(i + 1) * dt));
        }
        S.values.push_back(std::move(next));
    }
    return S;
}

DecayConstants decay_constants(double rho, const FundamentalSolution& S, double gamma_fraction) {
    if (!(rho < 0.0)) {
        throw UnstableLinearizationError(
            fmt::format("spectral abscissa {} is not negative; decay constants are undefined", rho));
    }
    if (!(gamma_fraction > 0.0 && gamma_fraction < 1.0)) throw ConfigError("gamma fraction must lie in (0, 1)");
    if (S.horizon() < 10.0 / (-rho) * (1.0 - 1e-9)) {
        throw ConfigError(fmt::format("fundamental solution reaches t = {}, need at least 10/(-rho) = {}",
                                      S.horizon(), 10.0 / (-rho)));
    }
    DecayConstants out;
    out.gamma = gamma_fraction * (-rho);
    out.K0 = 1.0;
    out.K1 = 0.0;
    for (std::size_t i = 0; i < S.values.size(); ++i) {
        const double t = S.step * static_cast<double>(i);
        const double norm = spectral_norm(S.values[i]);
        out.K1 = std::max(out.K1, norm * std::exp(-rho * t / 2.0));
        out.K0 = std::max(out.K0, norm * std::exp(out.gamma * t));
    }
    return out;
}

void attach(SpectralResult& result, const DecayConstants& constants) {
    result.gamma = constants.gamma;
    result.K0 = constants.K0;
    result.K1 = constants.K1;
}

FrozenSpread frozen_spectrum_spread(const NetworkParams& params, const LinearFlow& flow,
                                    const std::vector<double>& times, const SearchBox& box) {
    if (flow.mode() != FlowMode::ExactDiagonal) {
        throw ConfigError("frozen-coefficient spectra need an exact-diagonal flow");
    }
    const auto offsets = delay_offsets(params, flow.step());
    const Matrix K = params.B * params.activation.linear_part();
    FrozenSpread spread;
    spread.min_abscissa = std::numeric_limits<double>::infinity();
    spread.max_abscissa = -std::numeric_limits<double>::infinity();
    for (double t : times) {
        const std::int64_t node = flow.node_of(t);
        Vector scale(K.cols());
        for (Eigen::Index j = 0; j < K.cols(); ++j) {
            scale(j) = flow.at_node(node - offsets[static_cast<std::size_t>(j)])(j, j);
        }
        CharacteristicFunction chr{params.C, flow.inverse_at_node(node) * K * scale.asDiagonal(), params.delays};
        const SpectralResult r = dominant_roots(chr, box);
        spread.min_abscissa = std::min(spread.min_abscissa, r.abscissa);
        spread.max_abscissa = std::max(spread.max_abscissa, r.abscissa);
        ++spread.samples;
    }
    return spread;
}

nlohmann::json to_json(const SpectralResult& result) {
    nlohmann::json roots = nlohmann::json::array();
    for (const auto& r : result.roots) {
        roots.push_back({{"re", r.value.real()},
                         {"im", r.value.imag()},
                         {"residual", r.residual},
                         {"multiplicity", r.multiplicity}});
    }
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    return {
        {"roots", roots},
        {"abscissa", result.abscissa},
        {"gamma", opt(result.gamma)},
        {"K0", opt(result.K0)},
        {"K1", opt(result.K1)},
        {"search_box",
         {{"re_min", result.search_box.re_min},
          {"re_max", result.search_box.re_max},
          {"im_min", result.search_box.im_min},
          {"im_max", result.search_box.im_max}}},
    };
}

} // namespace sdhnn
