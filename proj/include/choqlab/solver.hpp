#pragma once

// Ground states of the combined-nonlinearity problem by Nehari-projected
// preconditioned descent. The iteration minimizes the discrete action whose
// ingredients are exactly the quadratures reported by the norm functions, so
// the Nehari identity closes to solver tolerance in the reported norms; the
// Pohozaev and strong-form residuals then act as independent discretization
// certificates.

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "choqlab/functionals.hpp"

namespace choqlab {

struct GaussianSeed {
    double amplitude = 1.0;
    double width = 1.0;
};

struct SolverConfig {
    int max_iters = 5000;
    double tol = 1e-8;         // relative H1 residual
    double tau0 = 1.0;         // initial step
    double backtrack = 0.5;    // step shrink factor
    bool positivity_clamp = true;
    std::optional<GaussianSeed> gaussian_seed; // overrides the regime seed
    std::optional<RadialField> seed_field;     // overrides everything

    // grid controls (0 = derive from the formulation)
    int grid_nodes = 2000;
    double grid_radius = 0.0;
    double grid_grading = 2.0;

    void validate() const {
        if (!(tol > 0.0)) throw invalid_parameter("solver: tol must be positive");
        if (!(backtrack > 0.0 && backtrack < 1.0))
            throw invalid_parameter("solver: backtracking factor must lie in (0,1)");
        if (!(tau0 > 0.0)) throw invalid_parameter("solver: initial step must be positive");
        if (max_iters < 1) throw invalid_parameter("solver: max_iters must be >= 1");
    }
};

struct GroundState {
    RadialField u;
    ProblemParams params;
    FieldNorms norms;
    double m = 0.0;               // action value at u
    double energy = 0.0;          // E(u): no mass term
    double u0 = 0.0;              // extrapolated peak value
    double nehari_residual = 0.0;
    double pohozaev_residual = 0.0;
    double el_residual_norm = 0.0;
    double grad_residual = 0.0;   // variational first-order residual
    int iterations = 0;
    bool converged = false;
    double seconds = 0.0;
    std::string seed_note;
    std::vector<double> action_history;
};

namespace detail {

// Tridiagonal SPD preconditioner a_g (-Lap_fv) + a_m Id with a no-flux face
// at the origin and a Dirichlet end, symmetric in the volume inner product.
class Preconditioner {
public:
    Preconditioner(const RadialGrid& g, double a_grad, double a_mass) {
        const int n = g.size();
        const auto& r = g.nodes();
        const auto& w = g.weights();
        const double omega = g.sphere_area();
        std::vector<double> cond(n - 1);
        for (int i = 0; i + 1 < n; ++i) {
            const double face = 0.5 * (r[i] + r[i + 1]);
            cond[i] = omega * std::pow(face, g.dim() - 1) / (r[i + 1] - r[i]);
        }
        weights_ = w;
        // volume-weighted symmetric system: rows w_i (a_g Lap + a_m)_i
        diag_w_.resize(n);
        lower_w_.resize(n - 1);
        for (int i = 0; i < n; ++i) {
            double c = 0.0;
            if (i > 0) c += cond[i - 1];
            if (i + 1 < n) c += cond[i];
            diag_w_[i] = a_grad * c + a_mass * w[i];
        }
        for (int i = 0; i + 1 < n; ++i) lower_w_[i] = -a_grad * cond[i];
    }

    // Solve T x = b with x_{n-1} = 0 (Dirichlet end).
    std::vector<double> solve_dirichlet(const std::vector<double>& b) const {
        const int n = int(diag_w_.size());
        std::vector<double> d(diag_w_), rhs(n);
        for (int i = 0; i < n; ++i) rhs[i] = b[i] * weights_[i];
        const int m = n - 1; // unknowns 0..m-1
        for (int i = 1; i < m; ++i) {
            const double f = lower_w_[i - 1] / d[i - 1];
            d[i] -= f * lower_w_[i - 1];
            rhs[i] -= f * rhs[i - 1];
        }
        std::vector<double> x(n, 0.0);
        x[m - 1] = rhs[m - 1] / d[m - 1];
        for (int i = m - 2; i >= 0; --i)
            x[i] = (rhs[i] - lower_w_[i] * x[i + 1]) / d[i];
        return x;
    }

private:
    std::vector<double> weights_, lower_w_, diag_w_;
};

// Exact volume-gradient of the discrete gradient-energy
// 1/2 sum_i w_i (Du)_i^2, i.e. W^{-1} D^T W D u with the same derivative
// stencil as norm_grad.
class GradEnergyOperator {
public:
    explicit GradEnergyOperator(const RadialGrid& g) : grid_(&g) {
        const int n = g.size();
        const auto& r = g.nodes();
        rows_.resize(n);
        // row i of D: (Du)_i = sum c_k u_{j_k}
        rows_[0] = {{0, 1, -1},
                    {-2.0 * r[0] / (r[1] * r[1] - r[0] * r[0]),
                     2.0 * r[0] / (r[1] * r[1] - r[0] * r[0]), 0.0}};
        for (int i = 1; i + 1 < n; ++i) {
            const double hm = r[i] - r[i - 1], hp = r[i + 1] - r[i];
            rows_[i] = {{i - 1, i, i + 1},
                        {-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp),
                         hm / (hp * (hm + hp))}};
        }
        {
            const int i = n - 1;
            const double h1 = r[i - 1] - r[i - 2], h2 = r[i] - r[i - 1];
            rows_[i] = {{i - 2, i - 1, i},
                        {h2 / (h1 * (h1 + h2)), -(h1 + h2) / (h1 * h2),
                         (h1 + 2.0 * h2) / (h2 * (h1 + h2))}};
        }
    }

    // g += scale * W^{-1} D^T W D u
    void accumulate(const std::vector<double>& u, double scale,
                    std::vector<double>& out) const {
        const int n = int(u.size());
        const auto& w = grid_->weights();
        std::vector<double> du(n, 0.0);
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int k = 0; k < 3; ++k)
                if (rows_[i].idx[k] >= 0) s += rows_[i].coef[k] * u[rows_[i].idx[k]];
            du[i] = s * w[i];
        }
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < 3; ++k)
                if (rows_[i].idx[k] >= 0) out[rows_[i].idx[k]] += scale * rows_[i].coef[k] * du[i] / w[rows_[i].idx[k]];
    }

private:
    struct Row { int idx[3]; double coef[3]; };
    const RadialGrid* grid_;
    std::vector<Row> rows_;
};

} // namespace detail

inline GridPtr default_solver_grid(const ProblemParams& params, const SolverConfig& cfg) {
    const double radius = cfg.grid_radius > 0.0
                              ? cfg.grid_radius
                              : default_radius(params.mass_coefficient());
    return build_grid(params.dim, radius, cfg.grid_nodes, cfg.grid_grading);
}

// Regime-scaled Gaussian seed: amplitude from the predicted peak scaling of
// the frequency formulation, width from the eps^{-1/2} spatial scale.
inline GaussianSeed default_seed(const ProblemParams& params) {
    if (params.form != Formulation::Frequency) return {1.0, 1.0};
    const double eps = params.value;
    if (eps == 1.0) return {1.0, 1.0};
    const bool small = eps < 1.0;
    const bool power_side = small ? (params.q < params.q_bar()) : (params.q > params.q_bar());
    const double e_amp = power_side ? 1.0 / (params.q - 2.0)
                                    : (2.0 + params.alpha) / (4.0 * (params.p - 1.0));
    return {std::pow(eps, e_amp), 1.0 / std::sqrt(eps)};
}

inline GroundState solve_on(const RieszOperator& op, const ProblemParams& params,
                            const SolverConfig& cfg, RadialField u0_field,
                            std::string seed_note) {
    const auto t_start = std::chrono::steady_clock::now();
    cfg.validate();
    params.validate();
    const GridPtr grid = u0_field.grid_ptr();
    const int n = grid->size();
    const auto& w = grid->weights();
    const FunctionalCoefficients coeff = FunctionalCoefficients::of(params);
    const double p = params.p, q = params.q;

    const detail::Preconditioner precond(*grid, coeff.grad, coeff.mass);
    const detail::GradEnergyOperator grad_op(*grid);

    // enforce the Dirichlet end on the seed and project it onto the Nehari set
    {
        auto& v = u0_field.mutable_values();
        v[n - 1] = 0.0;
        if (cfg.positivity_clamp)
            for (auto& x : v) x = std::max(x, 0.0);
    }
    NehariProjection proj = nehari_project(u0_field, op, coeff, p, q);
    RadialField u = std::move(proj.field);

    GroundState out;
    out.params = params;
    out.seed_note = std::move(seed_note);

    FieldNorms norms = compute_norms(u, op, p, q);
    double act = action_value(norms, coeff, p, q);
    out.action_history.push_back(act);

    auto gradient = [&](const RadialField& v) {
        std::vector<double> g(n, 0.0);
        grad_op.accumulate(v.values(), coeff.grad, g);
        const RadialField conv = op.apply(abs_power(v, p));
        for (int i = 0; i < n; ++i) {
            const double vp = v[i] == 0.0 ? 0.0 : std::pow(std::abs(v[i]), p - 2.0) * v[i];
            const double vq = v[i] == 0.0 ? 0.0 : std::pow(std::abs(v[i]), q - 2.0) * v[i];
            g[i] += coeff.mass * v[i] - coeff.choq * conv[i] * vp - coeff.pow * vq;
        }
        g[n - 1] = 0.0; // Dirichlet end is not a degree of freedom
        return g;
    };

    double tau = cfg.tau0;
    int iter = 0;
    bool converged = false;
    std::vector<double> prev_u, prev_g;
    for (; iter < cfg.max_iters; ++iter) {
        const std::vector<double> g = gradient(u);
        const std::vector<double> dir = precond.solve_dirichlet(g);

        // relative first-order residual in the preconditioned (H^-1) metric
        double gd = 0.0;
        for (int i = 0; i < n; ++i) gd += w[i] * g[i] * dir[i];
        const double scale = coeff.grad * norms.grad_sq + coeff.mass * norms.mass_sq;
        const double rel = std::sqrt(std::max(gd, 0.0) / std::max(scale, 1e-300));
        out.grad_residual = rel;
        if (rel <= cfg.tol) { converged = true; break; }

        // Barzilai-Borwein step in the preconditioned metric; the monotone
        // backtracking below safeguards it.
        if (!prev_u.empty()) {
            double sy = 0.0, yy = 0.0;
            std::vector<double> dg(n);
            for (int i = 0; i < n; ++i) dg[i] = g[i] - prev_g[i];
            const std::vector<double> gdg = precond.solve_dirichlet(dg);
            for (int i = 0; i < n; ++i) {
                sy += w[i] * (u[i] - prev_u[i]) * dg[i];
                yy += w[i] * dg[i] * gdg[i];
            }
            if (sy > 0.0 && yy > 0.0) tau = std::min(std::max(sy / yy, 1e-6), 1e6);
        }
        prev_u = u.values();
        prev_g = g;

        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            std::vector<double> trial(n);
            for (int i = 0; i < n; ++i) trial[i] = u[i] - tau * dir[i];
            trial[n - 1] = 0.0;
            if (cfg.positivity_clamp)
                for (auto& x : trial) x = std::max(x, 0.0);
            RadialField tf(grid, std::move(trial));
            FieldNorms tn;
            double t_proj;
            try {
                tn = compute_norms(tf, op, p, q);
                const double A = coeff.grad * tn.grad_sq + coeff.mass * tn.mass_sq;
                const double C = coeff.choq * tn.choq, D = coeff.pow * tn.lq;
                t_proj = nehari_scale(A, C, D, p, q);
            } catch (const std::exception&) {
                tau *= cfg.backtrack;
                continue;
            }
            RadialField projected = transform(tf, [t_proj](double v) { return t_proj * v; });
            FieldNorms pn;
            pn.grad_sq = tn.grad_sq * t_proj * t_proj;
            pn.mass_sq = tn.mass_sq * t_proj * t_proj;
            pn.choq = tn.choq * std::pow(t_proj, 2.0 * p);
            pn.lq = tn.lq * std::pow(t_proj, q);
            const double trial_act = action_value(pn, coeff, p, q);
            if (trial_act < act) {
                u = std::move(projected);
                norms = pn;
                act = trial_act;
                out.action_history.push_back(act);
                accepted = true;
                break;
            }
            tau *= cfg.backtrack;
        }
        if (!accepted) break; // action differences fell below roundoff
    }

    // Gate-free polish: near the minimizer the action can no longer resolve
    // a decrease in double precision, so iterate the projected fixed-point
    // map and watch the residual itself.
    if (!converged && iter < cfg.max_iters && out.grad_residual < 1e3 * cfg.tol) {
        double prev_rel = out.grad_residual;
        int worse = 0;
        RadialField best_u = u;
        FieldNorms best_norms = norms;
        double best_rel = prev_rel;
        for (; iter < cfg.max_iters; ++iter) {
            const std::vector<double> g = gradient(u);
            const std::vector<double> dir = precond.solve_dirichlet(g);
            double gd = 0.0;
            for (int i = 0; i < n; ++i) gd += w[i] * g[i] * dir[i];
            const double scale = coeff.grad * norms.grad_sq + coeff.mass * norms.mass_sq;
            const double rel = std::sqrt(std::max(gd, 0.0) / std::max(scale, 1e-300));
            if (rel < best_rel) { best_rel = rel; best_u = u; best_norms = norms; }
            out.grad_residual = rel;
            if (rel <= cfg.tol) { converged = true; break; }
            worse = (rel > prev_rel) ? worse + 1 : 0;
            if (worse >= 4) break;
            prev_rel = rel;

            std::vector<double> trial(n);
            for (int i = 0; i < n; ++i) trial[i] = u[i] - tau * dir[i];
            trial[n - 1] = 0.0;
            if (cfg.positivity_clamp)
                for (auto& x : trial) x = std::max(x, 0.0);
            RadialField tf(grid, std::move(trial));
            try {
                const FieldNorms tn = compute_norms(tf, op, p, q);
                const double A = coeff.grad * tn.grad_sq + coeff.mass * tn.mass_sq;
                const double C = coeff.choq * tn.choq, D = coeff.pow * tn.lq;
                const double t_proj = nehari_scale(A, C, D, p, q);
                u = transform(tf, [t_proj](double v) { return t_proj * v; });
                norms.grad_sq = tn.grad_sq * t_proj * t_proj;
                norms.mass_sq = tn.mass_sq * t_proj * t_proj;
                norms.choq = tn.choq * std::pow(t_proj, 2.0 * p);
                norms.lq = tn.lq * std::pow(t_proj, q);
            } catch (const std::exception&) {
                break;
            }
        }
        if (!converged && best_rel < out.grad_residual) {
            u = std::move(best_u);
            norms = best_norms;
            out.grad_residual = best_rel;
        }
        act = action_value(norms, coeff, p, q);
    }

    out.u = std::move(u);
    out.norms = norms;
    out.m = act;
    out.energy = action_value(norms, FunctionalCoefficients::energy(), p, q);
    out.u0 = out.u.value_at_origin();
    out.iterations = iter;
    {
        const double A = coeff.grad * norms.grad_sq + coeff.mass * norms.mass_sq;
        const double C = coeff.choq * norms.choq, D = coeff.pow * norms.lq;
        out.nehari_residual = std::abs(A - C - D) / std::max(A, 1e-300);
        const double P = pohozaev_value(norms, coeff, params.dim, params.alpha, p, q);
        out.pohozaev_residual = std::abs(P) / std::max(norms.grad_sq + norms.mass_sq, 1e-300);
        out.el_residual_norm = el_residual(out.u, op, coeff, p, q).relative_norm;
    }
    out.converged = converged;
    out.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return out;
}

inline GroundState solve(const ProblemParams& params, const SolverConfig& cfg,
                         GridPtr grid = nullptr, const RieszOperator* op = nullptr) {
    params.validate();
    cfg.validate();
    if (!grid) grid = default_solver_grid(params, cfg);
    std::optional<RieszOperator> own_op;
    if (!op) {
        own_op.emplace(grid, params.alpha);
        op = &*own_op;
    }
    RadialField seed_field;
    std::string note;
    if (cfg.seed_field) {
        seed_field = cfg.seed_field->grid().same_layout(*grid)
                         ? *cfg.seed_field
                         : interpolate_to(*cfg.seed_field, grid);
        note = "seed: field";
    } else {
        const GaussianSeed s = cfg.gaussian_seed ? *cfg.gaussian_seed : default_seed(params);
        seed_field = RadialField::sample(
            grid, [&](double r) { return s.amplitude * std::exp(-0.5 * (r / s.width) * (r / s.width)); });
        note = "seed: gaussian amplitude=" + format_g17(s.amplitude) +
               " width=" + format_g17(s.width);
    }
    return solve_on(*op, params, cfg, std::move(seed_field), std::move(note));
}

// Warm-started continuation: the previous state is rescaled by the regime's
// predicted amplitude/length scaling and used as the seed.
inline std::pair<double, double> continuation_exponents(const ProblemParams& params) {
    switch (params.form) {
        case Formulation::Frequency: {
            const bool small = params.value < 1.0;
            const bool power_side =
                small ? (params.q < params.q_bar()) : (params.q > params.q_bar());
            const double e_amp = power_side
                                     ? 1.0 / (params.q - 2.0)
                                     : (2.0 + params.alpha) / (4.0 * (params.p - 1.0));
            return {e_amp, 0.5};
        }
        case Formulation::LambdaForm: {
            if (params.p_is_lower()) {
                const double s = params.sigma_lower();
                return {params.dim * s / 4.0, s / 2.0};
            }
            if (params.p_is_upper()) {
                const double s = params.sigma_upper();
                return {-1.0 / (params.q - 2.0), -s / 2.0};
            }
            return {0.0, 0.0}; // interior p: the small-lambda limit needs no rescaling
        }
        case Formulation::MuForm: {
            if (params.q_is_sobolev()) {
                const double s = params.sigma_sobolev();
                return {-(params.dim - 2.0) * s / 4.0, -s / 2.0};
            }
            return {0.0, 0.0}; // subcritical q: the small-mu limit needs no rescaling
        }
    }
    return {0.0, 0.0};
}

inline GroundState continue_branch(const GroundState& prev, const ProblemParams& params,
                                   SolverConfig cfg, GridPtr grid = nullptr,
                                   const RieszOperator* op = nullptr) {
    params.validate();
    if (params.value == prev.params.value && params.form == prev.params.form &&
        prev.converged && params.dim == prev.params.dim && params.p == prev.params.p &&
        params.q == prev.params.q && params.alpha == prev.params.alpha) {
        GroundState copy = prev;
        copy.iterations = 0;
        copy.seed_note = "seed: reused previous state";
        return copy;
    }
    const double ratio = params.value / prev.params.value;
    const auto [e_amp, e_len] = continuation_exponents(params);
    const double a = std::pow(ratio, e_amp);
    const double b = std::pow(ratio, e_len);
    cfg.seed_field = power_rescale(prev.u, a, b);
    return solve(params, cfg, std::move(grid), op);
}

} // namespace choqlab
