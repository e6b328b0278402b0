#pragma once

// Independent shooting oracle for the local equation
//   -u'' - (N-1)/r u' + eps u = u^{q-1},  u'(0) = 0, u > 0, u -> 0,
// used to cross-check the variational solver on pure-power problems.
// Bisection on u(0): overshoot crosses zero, undershoot turns back up.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "choqlab/field.hpp"

namespace choqlab {

struct ShootingResult {
    RadialField u;
    double u0 = 0.0;       // bisected peak value
    double match_radius = 0.0; // asymptotic tail glued beyond this radius
    int bisections = 0;
};

namespace detail {

struct OdeSample {
    double r, u, du;
};

enum class ShotOutcome { CrossedZero, TurnedUp, Decayed };

// Dormand-Prince 5(4) adaptive integration of
//   u'' = -(N-1)/r u' + eps u - |u|^{q-2} u.
template <class Store>
ShotOutcome integrate_shot(int dim, double q, double eps, double a, double r_max,
                           double rel_tol, Store&& store) {
    auto rhs = [&](double r, double u, double du) {
        const double f = eps * u - (u == 0.0 ? 0.0 : std::pow(std::abs(u), q - 2.0) * u);
        return -(dim - 1.0) / r * du + f;
    };
    // series start: u = a + c2 r^2, Laplacian(u)(0) = 2 N c2 = eps a - a^{q-1}
    const double c2 = (eps * a - std::pow(a, q - 1.0)) / (2.0 * dim);
    double r = 1e-6 * std::min(1.0, 1.0 / std::sqrt(std::max(eps, 1e-12)));
    double u = a + c2 * r * r;
    double du = 2.0 * c2 * r;
    double h = r;
    store(OdeSample{r, u, du});

    static const double c[7] = {0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
    static const double A[7][6] = {
        {},
        {1.0 / 5},
        {3.0 / 40, 9.0 / 40},
        {44.0 / 45, -56.0 / 15, 32.0 / 9},
        {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729},
        {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656},
        {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
    static const double b5[7] = {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192,
                                 -2187.0 / 6784, 11.0 / 84, 0};
    static const double b4[7] = {5179.0 / 57600, 0, 7571.0 / 16695, 393.0 / 640,
                                 -92097.0 / 339200, 187.0 / 2100, 1.0 / 40};

    while (r < r_max) {
        if (r + h > r_max) h = r_max - r;
        double ku[7], kdu[7];
        for (int s = 0; s < 7; ++s) {
            double us = u, dus = du;
            for (int j = 0; j < s; ++j) {
                us += h * A[s][j] * ku[j];
                dus += h * A[s][j] * kdu[j];
            }
            const double rs = r + c[s] * h;
            ku[s] = dus;
            kdu[s] = rhs(rs, us, dus);
        }
        double u5 = u, du5 = du, u4 = u, du4 = du;
        for (int s = 0; s < 7; ++s) {
            u5 += h * b5[s] * ku[s];
            du5 += h * b5[s] * kdu[s];
            u4 += h * b4[s] * ku[s];
            du4 += h * b4[s] * kdu[s];
        }
        const double scale = std::max({std::abs(u5), std::abs(du5), 1e-14 * a});
        const double err = std::max(std::abs(u5 - u4), std::abs(du5 - du4)) / scale;
        if (err > rel_tol && h > 1e-14) {
            h *= std::max(0.2, 0.9 * std::pow(rel_tol / err, 0.2));
            continue;
        }
        r += h;
        u = u5;
        du = du5;
        store(OdeSample{r, u, du});
        if (err > 0.0) h *= std::min(5.0, 0.9 * std::pow(rel_tol / err, 0.2));

        if (u <= 0.0) return ShotOutcome::CrossedZero;
        if (du > 0.0) return ShotOutcome::TurnedUp;
        if (u < 1e-12 * a) return ShotOutcome::Decayed;
    }
    return ShotOutcome::Decayed;
}

} // namespace detail

inline ShootingResult shooting_oracle(int dim, double q, double eps, GridPtr grid,
                                      double ode_tol = 1e-12) {
    const double two_star = 2.0 * dim / (dim - 2.0);
    if (!(q > 2.0) || !(q < two_star))
        throw invalid_parameter("shooting_oracle: local equation needs 2 < q < 2N/(N-2)");
    if (!(eps > 0.0)) throw invalid_parameter("shooting_oracle: eps must be positive");

    const double r_max = std::min(grid->radius(), 60.0 / std::sqrt(eps));

    // bracket the decaying initial height between turn-up and zero-crossing
    double lo = std::pow(eps, 1.0 / (q - 2.0)); // below the constant solution height
    double hi = lo;
    auto classify = [&](double a) {
        return detail::integrate_shot(dim, q, eps, a, r_max, ode_tol,
                                      [](const detail::OdeSample&) {});
    };
    int guard = 0;
    while (classify(lo) != detail::ShotOutcome::TurnedUp) {
        lo *= 0.7;
        if (++guard > 200) throw std::runtime_error("shooting_oracle: lower bracket failed");
    }
    guard = 0;
    while (classify(hi) != detail::ShotOutcome::CrossedZero) {
        hi *= 1.4;
        if (++guard > 200) throw std::runtime_error("shooting_oracle: upper bracket failed");
    }

    int bisections = 0;
    for (; bisections < 200 && (hi - lo) > 1e-15 * hi; ++bisections) {
        const double mid = 0.5 * (lo + hi);
        if (classify(mid) == detail::ShotOutcome::CrossedZero) hi = mid;
        else lo = mid;
    }
    const double a_star = 0.5 * (lo + hi);

    // final trajectory with dense samples; glue the decaying asymptote
    // u ~ C r^{-(N-1)/2} e^{-sqrt(eps) r} past the last trusted point
    std::vector<detail::OdeSample> path;
    detail::integrate_shot(dim, q, eps, a_star, r_max, ode_tol,
                           [&](const detail::OdeSample& s) { path.push_back(s); });
    // trust the trajectory while u decreases and stays positive
    std::size_t last = 0;
    for (std::size_t i = 1; i < path.size(); ++i) {
        if (path[i].u <= 0.0 || path[i].du > 0.0 || path[i].u < 1e-9 * a_star) break;
        last = i;
    }
    const double rm = path[last].r;
    const double sq = std::sqrt(eps);
    const double tail_c =
        path[last].u / (std::pow(rm, -0.5 * (dim - 1.0)) * std::exp(-sq * rm));

    auto eval = [&](double r) -> double {
        if (r >= rm) return tail_c * std::pow(r, -0.5 * (dim - 1.0)) * std::exp(-sq * r);
        if (r <= path.front().r) {
            const double c2 = (eps * a_star - std::pow(a_star, q - 1.0)) / (2.0 * dim);
            return a_star + c2 * r * r;
        }
        // cubic Hermite between stored samples
        std::size_t k = 0, hi_i = last;
        while (hi_i - k > 1) {
            const std::size_t midp = (k + hi_i) / 2;
            if (path[midp].r <= r) k = midp; else hi_i = midp;
        }
        const auto& s0 = path[k];
        const auto& s1 = path[k + 1];
        const double h = s1.r - s0.r, t = (r - s0.r) / h;
        const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
        const double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
        return h00 * s0.u + h10 * h * s0.du + h01 * s1.u + h11 * h * s1.du;
    };

    ShootingResult out;
    out.u = RadialField::sample(grid, eval);
    out.u0 = a_star;
    out.match_radius = rm;
    out.bisections = bisections;
    return out;
}

} // namespace choqlab
