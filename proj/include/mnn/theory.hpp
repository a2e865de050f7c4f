#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include "mnn/distance.hpp"
#include "mnn/types.hpp"

namespace mnn {

/// Closed-form hyperparameter schedule and error-bound diagnostics. These
/// values target asymptotics; at desk-scale n several of them are far below
/// 1 and the benchmark harness tunes by cross-validation instead.
struct TheorySchedule {
    double epsilon_n = 0.0;    // n^(-(1 - beta/2)/d)
    double n_cov = 0.0;        // (n/8) (epsilon_n/2)^(d-1)
    double n_obs = 0.0;        // (1/4) rho n_cov^2
    double delta_dist = 0.0;
    double delta_noise = 0.0;
    double gamma_d = 0.0;      // (d-2)/(4d-1)
    bool admissible = false;   // beta < gamma_d
};

/// Admissibility threshold (d-2)/(4d-1); increasing in d, approaching 1/4.
inline double gamma_threshold(int d) {
    if (d < 2)
        throw std::invalid_argument("gamma_threshold: requires d >= 2");
    return static_cast<double>(d - 2) / static_cast<double>(4 * d - 1);
}

/// Bounds of the separable exponential outcome: each factor lies in
/// [e^0, e^sqrt(d)] scaled by coordinates in [-1, 1].
inline double exp_separable_b_high(int d) { return std::exp(std::sqrt(static_cast<double>(d))); }

/// Per-factor Lipschitz bound of the separable exponential outcome.
inline double exp_separable_lipschitz(int d) {
    const double rd = std::sqrt(static_cast<double>(d));
    return rd * std::exp(rd);
}

inline TheorySchedule theory_schedule(Index n, int d, double beta, double sigma,
                                      double lipschitz, double b_high, double delta,
                                      double c = 1.0) {
    if (n <= 0 || d < 2)
        throw std::invalid_argument("theory_schedule: requires n > 0 and d >= 2");
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("theory_schedule: delta outside (0, 1)");
    const double nn = static_cast<double>(n);
    const double rho = std::pow(nn, -beta);

    TheorySchedule s;
    s.epsilon_n = std::pow(nn, -(1.0 - beta / 2.0) / static_cast<double>(d));
    s.n_cov = nn / 8.0 * std::pow(s.epsilon_n / 2.0, d - 1);
    s.n_obs = 0.25 * rho * s.n_cov * s.n_cov;
    s.delta_dist = distance_error_bound(n, d, rho, delta, c);
    if (s.n_obs > 0.0) {
        s.delta_noise = 14.0 * lipschitz * b_high * s.epsilon_n +
                        std::sqrt(sigma * sigma / (2.0 * s.n_obs) * std::log(2.0 * nn * nn / delta));
    } else {
        s.delta_noise = std::numeric_limits<double>::infinity();
    }
    s.gamma_d = gamma_threshold(d);
    s.admissible = beta < s.gamma_d;
    return s;
}

}  // namespace mnn
