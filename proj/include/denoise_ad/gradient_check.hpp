#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "denoise_ad/errors.hpp"
#include "denoise_ad/matrix.hpp"

namespace denoise_ad {

// Central-difference gradient of a scalar function of a matrix. Test oracle
// for the analytic backward pass; not used on any production path.
template <typename F>
Matrix numeric_gradient(F&& f, const Matrix& x, double eps) {
    if (!(eps > 0.0)) {
        throw ConfigError("numeric_gradient: eps must be positive");
    }
    Matrix grad(x.rows(), x.cols());
    Matrix probe = x;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + eps;
        const double fp = f(probe);
        probe[i] = saved - eps;
        const double fm = f(probe);
        probe[i] = saved;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw OracleError("numeric_gradient: non-finite evaluation at entry " +
                              std::to_string(i));
        }
        grad[i] = (fp - fm) / (2.0 * eps);
    }
    return grad;
}

// Relative error with a floor so near-zero entries compare on absolute terms.
inline double relative_error(double a, double b, double floor = 1e-3) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

inline double max_relative_error(const Matrix& a, const Matrix& b, double floor = 1e-3) {
    if (!a.same_shape(b)) {
        throw ShapeError("max_relative_error: shapes " + a.shape_str() + " and " +
                         b.shape_str() + " differ");
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, relative_error(a[i], b[i], floor));
    }
    return worst;
}

} // namespace denoise_ad
