#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace ww {

// round() as the generated SQL does it: half away from zero at n decimals.
// Shared by the direct feature builder and the query evaluator so both
// produce bit-identical cells.
inline double round_decimals(double v, int n) {
    double scale = std::pow(10.0, n);
    return std::round(v * scale) / scale;
}

// OLS slope of y over x; empty when fewer than two distinct x. Centered
// sums keep collinear inputs exact.
inline std::optional<double> ols_slope(const std::vector<std::pair<double, double>>& pts) {
    std::size_t n = pts.size();
    if (n < 2) return std::nullopt;
    double xm = 0, ym = 0;
    for (auto [x, y] : pts) {
        xm += x;
        ym += y;
    }
    xm /= static_cast<double>(n);
    ym /= static_cast<double>(n);
    double sxy = 0, sxx = 0;
    for (auto [x, y] : pts) {
        sxy += (x - xm) * (y - ym);
        sxx += (x - xm) * (x - xm);
    }
    if (sxx == 0) return std::nullopt;  // all timestamps equal
    return sxy / sxx;
}

inline double median_inplace(std::vector<double>& v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace ww
