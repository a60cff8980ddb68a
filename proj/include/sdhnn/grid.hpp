#pragma once

#include <cmath>
#include <cstdint>
#include <optional>

namespace sdhnn {

/// Number of steps of size `step` that exactly tile `length`, if any.
/// Accepts floating-point noise up to 1e-9 relative to the ratio.
inline std::optional<std::int64_t> grid_count(double length, double step) {
    if (!(step > 0.0) || !std::isfinite(length)) return std::nullopt;
    const double ratio = length / step;
    const double nearest = std::round(ratio);
    if (std::abs(ratio - nearest) > 1e-9 * std::max(1.0, std::abs(ratio))) return std::nullopt;
    return static_cast<std::int64_t>(nearest);
}

/// Floor division that rounds towards negative infinity.
inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

} // namespace sdhnn
