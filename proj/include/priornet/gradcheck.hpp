#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace priornet {

struct GradientCheckReport {
    double max_abs_error = 0.0;
    double max_rel_error = 0.0;
    std::size_t num_points_checked = 0;
    std::size_t points_skipped_near_nonsmoothness = 0;
};

// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate.
// This is the oracle every analytic gradient in the project is tested against.
inline std::vector<double> finite_difference_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& x,
    double h = 1e-5) {
    std::vector<double> grad(x.size());
    std::vector<double> probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double up = f(probe);
        probe[i] = x[i] - h;
        const double down = f(probe);
        probe[i] = x[i];
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

// rel error with a unit floor so near-zero components are judged in
// absolute terms.
inline double relative_error(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-2});
    return std::abs(a - b) / scale;
}

} // namespace priornet
