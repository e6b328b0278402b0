#pragma once

// Riesz potential I_alpha * f for radial f, realized as a dense kernel
// matrix with quadrature weights folded in, plus the bilinear Choquard
// energy and the sharp Hardy-Littlewood-Sobolev constant.

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <new>
#include <vector>

#include "choqlab/field.hpp"
#include "choqlab/grid.hpp"

namespace choqlab {

// A_alpha(N) = Gamma((N-a)/2) / (Gamma(a/2) pi^{N/2} 2^a).
inline double riesz_constant(int dim, double alpha) {
    if (!(alpha > 0.0) || !(alpha < dim))
        throw invalid_parameter("riesz_constant: need 0 < alpha < N");
    return std::exp(std::lgamma(0.5 * (dim - alpha)) - std::lgamma(0.5 * alpha)) /
           (std::pow(pi, 0.5 * dim) * std::pow(2.0, alpha));
}

// Sharp constant of the diagonal Hardy-Littlewood-Sobolev inequality,
// C_alpha(N) = pi^{(N-a)/2} Gamma(a/2)/Gamma((N+a)/2) (Gamma(N/2)/Gamma(N))^{-a/N}.
inline double hls_sharp_constant(int dim, double alpha) {
    if (!(alpha > 0.0) || !(alpha < dim))
        throw invalid_parameter("hls_sharp_constant: need 0 < alpha < N");
    const double lg = std::lgamma(0.5 * alpha) - std::lgamma(0.5 * (dim + alpha)) -
                      (alpha / dim) * (std::lgamma(0.5 * dim) - std::lgamma(double(dim)));
    return std::pow(pi, 0.5 * (dim - alpha)) * std::exp(lg);
}

namespace detail {

// Gauss-Legendre nodes/weights on [-1, 1] by Newton iteration.
struct GaussLegendre {
    std::vector<double> x, w;
    explicit GaussLegendre(int n) : x(n), w(n) {
        for (int i = 0; i < (n + 1) / 2; ++i) {
            double t = std::cos(pi * (i + 0.75) / (n + 0.5));
            double dp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p0 = 1.0, p1 = t;
                for (int k = 2; k <= n; ++k) {
                    const double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n * (t * p1 - p0) / (t * t - 1.0);
                const double dt = p1 / dp;
                t -= dt;
                if (std::abs(dt) < 1e-16) break;
            }
            x[i] = -t;
            x[n - 1 - i] = t;
            w[i] = w[n - 1 - i] = 2.0 / ((1.0 - t * t) * dp * dp);
        }
    }
};

inline const GaussLegendre& gl(int n) {
    static const GaussLegendre g8(8), g16(16), g64(64);
    switch (n) {
        case 8: return g8;
        case 16: return g16;
        default: return g64;
    }
}

template <class F>
double gl_integrate(F&& f, double a, double b, int order) {
    const auto& g = gl(order);
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    double s = 0.0;
    for (std::size_t i = 0; i < g.x.size(); ++i) s += g.w[i] * f(c + h * g.x[i]);
    return h * s;
}

template <class F>
double gl64_integrate(F&& f, double a, double b) {
    return gl_integrate(f, a, b, 64);
}

// Spherical mean of |r e1 - s theta|^{-(N-alpha)} over theta in S^{N-1}.
// For N = 3 there are closed forms; otherwise a Gauss-Legendre sweep in the
// polar angle with dyadic subinterval refinement near theta = 0 resolves the
// near-diagonal boundary layer.
class SphericalMeanKernel {
public:
    SphericalMeanKernel(int dim, double alpha)
        : dim_(dim), alpha_(alpha),
          angular_prefactor_(unit_sphere_area(dim - 1) / unit_sphere_area(dim)) {}

    double operator()(double r, double s) const {
        if (dim_ == 3) {
            const double sum = r + s, diff = std::abs(r - s);
            if (alpha_ == 2.0) return 1.0 / std::max(r, s);
            if (alpha_ == 1.0) return std::log(sum / diff) / (2.0 * r * s);
            return (std::pow(sum, alpha_ - 1.0) - std::pow(diff, alpha_ - 1.0)) /
                   (2.0 * r * s * (alpha_ - 1.0));
        }
        return angular(r, s);
    }

    int dim() const { return dim_; }
    double alpha() const { return alpha_; }

    // Angular quadrature path (exposed so tests can compare it against the
    // N = 3 closed form). Dyadic panels toward theta = 0 resolve the
    // near-diagonal peak of width |r-s|/max(r,s); each panel is analytic at
    // its own scale, so a fixed Gauss order per panel suffices.
    double angular(double r, double s) const {
        const double m = std::max(r, s), d = std::abs(r - s);
        const double expo = -0.5 * (dim_ - alpha_);
        auto integrand = [&](double theta) {
            const double sh = std::sin(0.5 * theta);
            const double dist2 = d * d + 4.0 * r * s * sh * sh;
            return std::pow(std::sin(theta), double(dim_ - 2)) * std::pow(dist2, expo);
        };
        int levels = 3;
        if (d < 0.05 * m) {
            const double ratio = pi * m / std::max(d, 1e-300 * m);
            levels = std::min(52, int(std::ceil(std::log2(ratio))) + 3);
        }
        // Full order on the bulk panels, reduced order on the dyadically
        // refined panels, whose integrand is analytic at the panel scale.
        double acc = gl_integrate(integrand, 0.5 * pi, pi, 64);
        double hi = 0.5 * pi;
        for (int k = 0; k < levels; ++k) {
            acc += gl_integrate(integrand, 0.5 * hi, hi, k < 3 ? 64 : 16);
            hi *= 0.5;
        }
        acc += gl_integrate(integrand, 0.0, hi, 16);
        return angular_prefactor_ * acc;
    }

private:
    int dim_;
    double alpha_;
    double angular_prefactor_;
};

} // namespace detail

// Precomputed dense kernel matrix: (I_alpha * f)(r_i) = sum_j K_ij f_j.
// The folded structure K_ij = A_alpha w_j k(r_i, r_j) with symmetric k makes
// the operator exactly self-adjoint in the volume measure. Diagonal cells
// integrate the local |r-s|^{alpha-1} singularity by refined quadrature and
// calibrate the diagonal entry so the rule is exact for locally constant
// fields.
class RieszOperator {
public:
    RieszOperator(GridPtr grid, double alpha) : grid_(std::move(grid)), alpha_(alpha) {
        const int dim = grid_->dim();
        if (!(alpha > 0.0) || !(alpha < dim))
            throw invalid_parameter("build_operator: need 0 < alpha < N");
        norm_const_ = riesz_constant(dim, alpha);
        const std::size_t n = std::size_t(grid_->size());
        try {
            matrix_.assign(n * n, 0.0);
        } catch (const std::bad_alloc&) {
            throw std::runtime_error("build_operator: kernel matrix allocation failed for M = " +
                                     std::to_string(n));
        }
        assemble();
    }

    const RadialGrid& grid() const { return *grid_; }
    GridPtr grid_ptr() const { return grid_; }
    double alpha() const { return alpha_; }
    double normalization() const { return norm_const_; }
    double entry(int i, int j) const { return matrix_[std::size_t(i) * grid_->size() + j]; }

    RadialField apply(const RadialField& f) const {
        if (&f.grid() != grid_.get() && !f.grid().same_layout(*grid_))
            throw invalid_parameter("apply: field grid does not match operator grid");
        const int n = grid_->size();
        std::vector<double> out(n, 0.0);
        for (int i = 0; i < n; ++i) {
            const double* row = matrix_.data() + std::size_t(i) * n;
            double s = 0.0;
            for (int j = 0; j < n; ++j) s += row[j] * f[j];
            out[i] = s;
        }
        return RadialField(f.grid_ptr(), std::move(out));
    }

    void save(const std::string& path) const;
    static RieszOperator load(const std::string& path, GridPtr grid);

private:
    GridPtr grid_;
    double alpha_;
    double norm_const_;
    std::vector<double> matrix_;

    struct private_tag {};
    RieszOperator(private_tag, GridPtr grid, double alpha)
        : grid_(std::move(grid)), alpha_(alpha), norm_const_(riesz_constant(grid_->dim(), alpha)) {}

    void assemble() {
        const int n = grid_->size();
        const auto& r = grid_->nodes();
        const auto& w = grid_->weights();
        detail::SphericalMeanKernel k(grid_->dim(), alpha_);

        // Symmetric point values k(r_i, r_j), stored unscaled first.
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const double v = k(r[i], r[j]);
                matrix_[std::size_t(i) * n + j] = v;
                matrix_[std::size_t(j) * n + i] = v;
            }

        // Diagonal calibration: over the quadrature cells whose span contains
        // r_i, replace the rule by an accurate refined integral so that the
        // row is exact for fields that are constant across that span.
        const double omega = grid_->sphere_area();
        for (int i = 0; i < n; ++i) {
            double near_integral = 0.0, near_rule = 0.0, self_share = 0.0;
            for (const auto& cell : grid_->cells()) {
                bool contains = false;
                for (int t = 0; t < 3; ++t) contains |= (cell.idx[t] == i);
                if (!contains || !(cell.lo <= r[i] && r[i] <= cell.hi)) continue;
                near_integral += cell_integral(k, r[i], cell.lo, cell.hi, omega);
                for (int t = 0; t < 3; ++t) {
                    if (cell.idx[t] < 0) continue;
                    if (cell.idx[t] == i) self_share += cell.share[t];
                    else near_rule += cell.share[t] * matrix_[std::size_t(i) * n + cell.idx[t]];
                }
            }
            matrix_[std::size_t(i) * n + i] = (near_integral - near_rule) / self_share;
        }

        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                matrix_[std::size_t(i) * n + j] *= norm_const_ * w[j];
    }

    // integral over [lo, hi] of k(rc, s) omega s^{N-1} ds with the integrable
    // singularity at s = rc resolved by dyadically shrinking panels.
    template <class K>
    double cell_integral(const K& k, double rc, double lo, double hi, double omega) const {
        const int dim = grid_->dim();
        auto f = [&](double s) { return k(rc, s) * omega * std::pow(s, double(dim - 1)); };
        auto one_side = [&](double a, double b, bool sing_at_a) {
            // geometric panels toward the singular endpoint
            double acc = 0.0;
            const double len = b - a;
            if (len <= 0.0) return 0.0;
            double frac = 1.0;
            for (int lev = 0; lev < 40; ++lev) {
                const double next = frac * 0.5;
                double pa, pb;
                if (sing_at_a) { pa = a + next * len; pb = a + frac * len; }
                else           { pa = b - frac * len; pb = b - next * len; }
                const double piece = detail::gl_integrate(f, pa, pb, 8);
                acc += piece;
                frac = next;
                if (std::abs(piece) < 1e-14 * std::abs(acc)) break;
            }
            return acc;
        };
        return one_side(lo, rc, false) + one_side(rc, hi, true);
    }
};

inline RieszOperator build_riesz_operator(GridPtr grid, double alpha) {
    return RieszOperator(std::move(grid), alpha);
}

// D_p(u) = integral (I_alpha * |u|^p) |u|^p.
inline double choquard_energy(const RieszOperator& op, const RadialField& u, double p) {
    if (!(p >= 1.0)) throw invalid_parameter("choquard_energy: need p >= 1");
    const RadialField up = abs_power(u, p);
    return inner(op.apply(up), up);
}

// Symmetric bilinear extension <f, g>_alpha = integral (I_alpha * f) g.
inline double choquard_pairing(const RieszOperator& op, const RadialField& f,
                               const RadialField& g) {
    return inner(op.apply(f), g);
}

// --- kernel cache ------------------------------------------------------------
// Binary layout: little-endian header (N, alpha, R, M, gamma as 8-byte
// values) followed by the row-major 8-byte float matrix.

inline void RieszOperator::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("kernel cache: cannot write " + path);
    auto put_i64 = [&os](std::int64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); };
    auto put_f64 = [&os](double v) { os.write(reinterpret_cast<const char*>(&v), 8); };
    put_i64(grid_->dim());
    put_f64(alpha_);
    put_f64(grid_->radius());
    put_i64(grid_->size());
    put_f64(grid_->grading());
    os.write(reinterpret_cast<const char*>(matrix_.data()),
             std::streamsize(matrix_.size() * sizeof(double)));
}

inline RieszOperator RieszOperator::load(const std::string& path, GridPtr grid) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("kernel cache: cannot read " + path);
    auto get_i64 = [&is] { std::int64_t v; is.read(reinterpret_cast<char*>(&v), 8); return v; };
    auto get_f64 = [&is] { double v; is.read(reinterpret_cast<char*>(&v), 8); return v; };
    const std::int64_t dim = get_i64();
    const double alpha = get_f64();
    const double radius = get_f64();
    const std::int64_t count = get_i64();
    const double gamma = get_f64();
    if (!grid) grid = build_grid(int(dim), radius, int(count), gamma);
    if (grid->dim() != dim || grid->radius() != radius || grid->size() != count ||
        grid->grading() != gamma)
        throw std::runtime_error("kernel cache: header does not match grid");
    RieszOperator op(private_tag{}, grid, alpha);
    op.matrix_.resize(std::size_t(count) * count);
    is.read(reinterpret_cast<char*>(op.matrix_.data()),
            std::streamsize(op.matrix_.size() * sizeof(double)));
    if (!is) throw std::runtime_error("kernel cache: truncated file");
    return op;
}

} // namespace choqlab
