#pragma once

// The generalized four-coefficient functional
//   I(u) = (a_grad/2)|grad u|_2^2 + (a_mass/2)|u|_2^2
//          - (a_choq/2p) D_p(u) - (a_pow/q)|u|_q^q
// together with its strong-form Euler-Lagrange residual, the Pohozaev
// functional, Nehari projection, the dilation path and the tau quotients.
// Every functional used by the solver and the sweeps is an instance of this
// coefficient family.

#include <cmath>
#include <functional>
#include <string>

#include "choqlab/field.hpp"
#include "choqlab/riesz.hpp"

namespace choqlab {

enum class Formulation { Frequency, LambdaForm, MuForm };

struct ProblemParams {
    int dim = 3;
    double alpha = 2.0;
    double p = 2.0;
    double q = 4.0;
    Formulation form = Formulation::Frequency;
    double value = 1.0; // eps, lambda, or mu

    ProblemParams() = default;
    ProblemParams(int N, double a, double p_, double q_, Formulation f, double v)
        : dim(N), alpha(a), p(p_), q(q_), form(f), value(v) {
        validate();
    }

    void validate() const {
        if (dim < 3) throw invalid_parameter("params: N >= 3 required");
        if (!(alpha > 0.0 && alpha < dim))
            throw invalid_parameter("params: alpha must lie in (0, N)");
        const double eps_cmp = 1e-12;
        if (p < p_lower() - eps_cmp || p > p_upper() + eps_cmp)
            throw invalid_parameter("params: p outside [(N+alpha)/N, (N+alpha)/(N-2)]");
        if (q <= 2.0 || q > two_star() + eps_cmp)
            throw invalid_parameter("params: q outside (2, 2N/(N-2)]");
        if (!(value > 0.0) || !std::isfinite(value))
            throw invalid_parameter("params: formulation parameter must be positive");
    }

    double two_star() const { return 2.0 * dim / (dim - 2.0); }
    double p_lower() const { return (dim + alpha) / dim; }
    double p_upper() const { return (dim + alpha) / (dim - 2.0); }
    // Threshold q separating the two competing rescalings.
    double q_bar() const { return 2.0 * (2.0 * p + alpha) / (2.0 + alpha); }
    double p0() const { return 1.0 + (2.0 + alpha) / dim; }
    double q0() const { return 2.0 + 4.0 / dim; }
    double lambda1() const { return (q * (2.0 + alpha) - 2.0 * (2.0 * p + alpha)) / (4.0 * (p - 1.0)); }
    double lambda2() const { return (2.0 * (2.0 * p + alpha) - q * (2.0 + alpha)) / (2.0 * (q - 2.0)); }
    // Rescaling exponents of the three critical regimes.
    double sigma_lower() const { return 4.0 / (4.0 - dim * (q - 2.0)); }
    double sigma_upper() const { return (two_star() - 2.0) / (q - 2.0); }
    double sigma_sobolev() const { return 2.0 / ((dim - 2.0) * (p - 1.0) - alpha); }

    bool p_is_lower() const { return std::abs(p - p_lower()) < 1e-12; }
    bool p_is_upper() const { return std::abs(p - p_upper()) < 1e-12; }
    bool q_is_sobolev() const { return std::abs(q - two_star()) < 1e-12; }

    // Mass coefficient of the formulation (drives the truncation radius).
    double mass_coefficient() const {
        return form == Formulation::Frequency ? value : 1.0;
    }
};

struct FunctionalCoefficients {
    double grad = 1.0, mass = 1.0, choq = 1.0, pow = 1.0;

    static FunctionalCoefficients action_frequency(double eps) { return {1.0, eps, 1.0, 1.0}; }
    static FunctionalCoefficients energy() { return {1.0, 0.0, 1.0, 1.0}; }
    static FunctionalCoefficients lambda_form(double lambda) { return {1.0, 1.0, 1.0, lambda}; }
    static FunctionalCoefficients mu_form(double mu) { return {1.0, 1.0, mu, 1.0}; }
    // Rescaled functionals of the three critical regimes.
    static FunctionalCoefficients rescaled_lower(double lambda, double sigma) {
        const double ls = std::pow(lambda, sigma);
        return {ls, 1.0, 1.0, ls};
    }
    static FunctionalCoefficients rescaled_upper(double lambda, double sigma) {
        const double ls = std::pow(lambda, sigma);
        return {1.0, ls, 1.0, ls};
    }
    static FunctionalCoefficients rescaled_sobolev(double mu, double sigma) {
        const double ms = std::pow(mu, sigma);
        return {1.0, ms, ms, 1.0};
    }

    static FunctionalCoefficients of(const ProblemParams& params) {
        switch (params.form) {
            case Formulation::Frequency: return action_frequency(params.value);
            case Formulation::LambdaForm: return lambda_form(params.value);
            case Formulation::MuForm: return mu_form(params.value);
        }
        throw invalid_parameter("unknown formulation");
    }
};

// The four quadratic/nonlinear ingredients of the functional.
struct FieldNorms {
    double grad_sq = 0.0; // |grad u|_2^2
    double mass_sq = 0.0; // |u|_2^2
    double choq = 0.0;    // D_p(u)
    double lq = 0.0;      // |u|_q^q
};

inline FieldNorms compute_norms(const RadialField& u, const RieszOperator& op,
                                double p, double q) {
    FieldNorms n;
    n.grad_sq = norm_grad_sq(u);
    n.mass_sq = norm_l2_sq(u);
    n.choq = choquard_energy(op, u, p);
    n.lq = norm_ls_pow(u, q);
    return n;
}

inline double action_value(const FieldNorms& n, const FunctionalCoefficients& c,
                           double p, double q) {
    return 0.5 * c.grad * n.grad_sq + 0.5 * c.mass * n.mass_sq -
           c.choq / (2.0 * p) * n.choq - c.pow / q * n.lq;
}

inline double action(const RadialField& u, const RieszOperator& op,
                     const FunctionalCoefficients& c, double p, double q) {
    return action_value(compute_norms(u, op, p, q), c, p, q);
}

// P(u) = (N-2)/2 a_g |grad u|^2 + N/2 a_m |u|^2
//        - (N+alpha)/2p a_c D_p(u) - N/q a_q |u|_q^q;
// vanishes on exact solutions, and equals d/dt I(u_t) at t = 1 along the
// dilation path u_t(x) = u(x/t).
inline double pohozaev_value(const FieldNorms& n, const FunctionalCoefficients& c,
                             int dim, double alpha, double p, double q) {
    return 0.5 * (dim - 2.0) * c.grad * n.grad_sq + 0.5 * dim * c.mass * n.mass_sq -
           (dim + alpha) / (2.0 * p) * c.choq * n.choq - dim / q * c.pow * n.lq;
}

inline double pohozaev(const RadialField& u, const RieszOperator& op,
                       const FunctionalCoefficients& c, double p, double q) {
    return pohozaev_value(compute_norms(u, op, p, q), c, op.grid().dim(), op.alpha(), p, q);
}

// Strong-form residual
//   r = -a_g (u'' + (N-1)/r u') + a_m u - a_c (I_a*|u|^p)|u|^{p-2}u - a_q |u|^{q-2}u,
// evaluated at interior nodes (Dirichlet end excluded), plus its L2 norm
// relative to the H1 norm of u.
struct ResidualResult {
    RadialField field;
    double relative_norm = 0.0;
};

inline ResidualResult el_residual(const RadialField& u, const RieszOperator& op,
                                  const FunctionalCoefficients& c, double p, double q) {
    const int n = u.size();
    const auto& r = u.grid().nodes();
    const int dim = u.grid().dim();
    const RadialField conv = op.apply(abs_power(u, p));
    std::vector<double> res(n, 0.0);

    auto nonlinear = [&](int i) {
        const double su_p = u[i] == 0.0 ? 0.0 : std::pow(std::abs(u[i]), p - 2.0) * u[i];
        const double su_q = u[i] == 0.0 ? 0.0 : std::pow(std::abs(u[i]), q - 2.0) * u[i];
        return c.mass * u[i] - c.choq * conv[i] * su_p - c.pow * su_q;
    };

    {
        // r -> 0: radial Laplacian of the even quadratic through the first
        // two nodes equals 2N c2.
        const double c2 = (u[1] - u[0]) / (r[1] * r[1] - r[0] * r[0]);
        res[0] = -c.grad * 2.0 * dim * c2 + nonlinear(0);
    }
    for (int i = 1; i + 1 < n; ++i) {
        const double hm = r[i] - r[i - 1], hp = r[i + 1] - r[i];
        const double upp = 2.0 * (hm * u[i + 1] + hp * u[i - 1] - (hm + hp) * u[i]) /
                           (hm * hp * (hm + hp));
        const double up = -hp / (hm * (hm + hp)) * u[i - 1] +
                          (hp - hm) / (hm * hp) * u[i] +
                          hm / (hp * (hm + hp)) * u[i + 1];
        res[i] = -c.grad * (upp + (dim - 1.0) / r[i] * up) + nonlinear(i);
    }
    res[n - 1] = 0.0; // Dirichlet end

    RadialField rf(u.grid_ptr(), std::move(res));
    const double h1 = norm_h1(u, 1.0);
    const double rel = h1 > 0.0 ? norm_l2(rf) / h1 : 0.0;
    return {std::move(rf), rel};
}

// Unique positive root of  A t^2 = C t^{2p} + D t^q  (Nehari projection).
struct NehariProjection {
    double t = 1.0;
    RadialField field;
};

inline double nehari_scale(double A, double C, double D, double p, double q) {
    if (!(A > 0.0)) throw invalid_parameter("nehari_project: quadratic part must be positive");
    if (!(C >= 0.0) || !(D >= 0.0) || C + D <= 0.0)
        throw invalid_parameter("nehari_project: no nonlinear mass to project onto");
    // g(t) = A - C t^{2p-2} - D t^{q-2} is strictly decreasing from A to -inf.
    auto g = [&](double t) {
        return A - C * std::pow(t, 2.0 * p - 2.0) - D * std::pow(t, q - 2.0);
    };
    double lo = 1e-8, hi = 1e8;
    if (!(g(lo) > 0.0) || !(g(hi) < 0.0))
        throw std::runtime_error("nehari_project: root escaped the search bracket");
    double t = 1.0;
    if (!(t > lo && t < hi)) t = std::sqrt(lo * hi);
    for (int it = 0; it < 200; ++it) {
        const double gv = g(t);
        if (gv > 0.0) lo = t; else hi = t;
        const double dg = -C * (2.0 * p - 2.0) * std::pow(t, 2.0 * p - 3.0) -
                          D * (q - 2.0) * std::pow(t, q - 3.0);
        double tn = t - gv / dg;
        if (!(tn > lo && tn < hi)) tn = 0.5 * (lo + hi);
        if (std::abs(tn - t) <= 1e-16 * t) { t = tn; break; }
        t = tn;
    }
    return t;
}

inline NehariProjection nehari_project(const RadialField& u, const RieszOperator& op,
                                       const FunctionalCoefficients& c, double p, double q) {
    const FieldNorms n = compute_norms(u, op, p, q);
    const double A = c.grad * n.grad_sq + c.mass * n.mass_sq;
    const double C = c.choq * n.choq, D = c.pow * n.lq;
    const double t = nehari_scale(A, C, D, p, q);
    return {t, transform(u, [t](double v) { return t * v; })};
}

// Value of the functional along the dilation path u_t(x) = u(x/t); all four
// ingredients transform by known powers of t, so the path is a closed-form
// function of t and no re-integration is needed.
struct DilationPath {
    FieldNorms n;
    FunctionalCoefficients c;
    int dim;
    double alpha, p, q;

    double value(double t) const {
        return 0.5 * c.grad * std::pow(t, dim - 2.0) * n.grad_sq +
               0.5 * c.mass * std::pow(t, double(dim)) * n.mass_sq -
               c.choq / (2.0 * p) * std::pow(t, dim + alpha) * n.choq -
               c.pow / q * std::pow(t, double(dim)) * n.lq;
    }
    double derivative(double t) const {
        return 0.5 * (dim - 2.0) * c.grad * std::pow(t, dim - 3.0) * n.grad_sq +
               0.5 * dim * c.mass * std::pow(t, dim - 1.0) * n.mass_sq -
               (dim + alpha) / (2.0 * p) * c.choq * std::pow(t, dim + alpha - 1.0) * n.choq -
               dim / q * c.pow * std::pow(t, dim - 1.0) * n.lq;
    }
};

struct DilationMax {
    double t_star = 1.0;
    double value = 0.0;
};

inline DilationMax dilation_max(const RadialField& u, const RieszOperator& op,
                                const FunctionalCoefficients& c, double p, double q) {
    const FieldNorms n = compute_norms(u, op, p, q);
    const int dim = op.grid().dim();
    const double alpha = op.alpha();
    const DilationPath path{n, c, dim, alpha, p, q};

    // Boundedness above: the t^{N+alpha} coefficient must win, or the t^N
    // coefficient must already be negative.
    const double lead_choq = c.choq * n.choq;
    const double lead_n = 0.5 * c.mass * n.mass_sq - c.pow / q * n.lq;
    if (lead_choq <= 0.0 && lead_n >= 0.0)
        throw std::runtime_error("dilation_max: path is unbounded above");

    // Bracket the maximizer by golden-section, then polish with Newton on
    // the derivative.
    double lo = 1e-8, hi = 1.0;
    while (path.derivative(hi) > 0.0 && hi < 1e12) hi *= 2.0;
    if (hi >= 1e12) throw std::runtime_error("dilation_max: no maximizer in range");
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = path.value(x1), f2 = path.value(x2);
    for (int it = 0; it < 80; ++it) {
        if (f1 < f2) { a = x1; x1 = x2; f1 = f2; x2 = a + gr * (b - a); f2 = path.value(x2); }
        else { b = x2; x2 = x1; f2 = f1; x1 = b - gr * (b - a); f1 = path.value(x1); }
    }
    double t = 0.5 * (a + b);
    for (int it = 0; it < 60; ++it) {
        const double d1 = path.derivative(t);
        const double dt = 1e-8 * t;
        const double d2 = (path.derivative(t + dt) - path.derivative(t - dt)) / (2.0 * dt);
        if (!(d2 < 0.0)) break;
        const double tn = t - d1 / d2;
        if (!(tn > 0.0) || std::abs(tn - t) <= 1e-15 * t) { if (tn > 0.0) t = tn; break; }
        t = tn;
    }
    return {t, path.value(t)};
}

// tau_1 = |u|_2^2 / D_p(u), tau_2 = |grad u|_2^2 / D_p(u),
// tau_3 = |grad u|_2^2 / |u|_{2*}^{2*}.
inline double tau(const RadialField& u, const RieszOperator& op, int kind, double p) {
    switch (kind) {
        case 1: {
            const double d = choquard_energy(op, u, p);
            if (d <= 0.0) throw invalid_parameter("tau: zero denominator");
            return norm_l2_sq(u) / d;
        }
        case 2: {
            const double d = choquard_energy(op, u, p);
            if (d <= 0.0) throw invalid_parameter("tau: zero denominator");
            return norm_grad_sq(u) / d;
        }
        case 3: {
            const double ts = 2.0 * op.grid().dim() / (op.grid().dim() - 2.0);
            const double d = norm_ls_pow(u, ts);
            if (d <= 0.0) throw invalid_parameter("tau: zero denominator");
            return norm_grad_sq(u) / d;
        }
        default: throw invalid_parameter("tau: kind must be 1, 2 or 3");
    }
}

} // namespace choqlab
