#pragma once

// Independent reference computations used to check the library. Each one
// is a direct, unoptimized evaluation of the quantity it names.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "dpsr/q_model.hpp"

namespace oracle {

/// Smallest i whose running sum of weights exceeds u.
inline std::size_t linear_find_prefix(const std::vector<double>& weights, double u) {
    double running = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        running += weights[i];
        if (running > u) {
            return i;
        }
    }
    throw std::out_of_range("u beyond total");
}

/// p_i^exponent normalized over all entries.
inline std::vector<double> power_distribution(const std::vector<double>& priorities, double exponent) {
    std::vector<double> out;
    double total = 0.0;
    for (double p : priorities) {
        out.push_back(std::pow(p, exponent));
        total += out.back();
    }
    for (double& v : out) {
        v /= total;
    }
    return out;
}

/// (n * P_i)^-beta divided by the largest such value.
inline std::vector<double> importance_weights(const std::vector<double>& priorities, double alpha, double beta) {
    const std::vector<double> probs = power_distribution(priorities, alpha);
    const double n = static_cast<double>(priorities.size());
    std::vector<double> w;
    double largest = 0.0;
    for (double p : probs) {
        w.push_back(std::pow(n * p, -beta));
        largest = std::max(largest, w.back());
    }
    for (double& v : w) {
        v /= largest;
    }
    return w;
}

/// Central differences of Q(state, action) with respect to every parameter.
inline std::vector<double> finite_difference_gradient(const dpsr::QFunction& qf, std::span<const double> state,
                                                      dpsr::Action action, double step = 1e-5) {
    std::unique_ptr<dpsr::QFunction> probe = qf.clone();
    std::vector<double> params = qf.parameters();
    std::vector<double> grad(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + step;
        probe->set_parameters(params);
        const double up = probe->q_values(state)[action];
        params[i] = saved - step;
        probe->set_parameters(params);
        const double down = probe->q_values(state)[action];
        params[i] = saved;
        grad[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

inline double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
}

}  // namespace oracle
