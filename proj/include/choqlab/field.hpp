#pragma once

// Radial fields on a graded grid: norms, derivatives, dilation and
// power rescaling (both pure coordinate relabelings), interpolation and
// CSV serialization.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "choqlab/grid.hpp"

namespace choqlab {

class RadialField {
public:
    RadialField() = default;
    RadialField(GridPtr grid, std::vector<double> values)
        : grid_(std::move(grid)), values_(std::move(values)) {
        if (int(values_.size()) != grid_->size())
            throw invalid_parameter("RadialField: value count != node count");
    }

    RadialField(const RadialField& o)
        : grid_(o.grid_), values_(o.values_), deriv_(o.deriv_),
          deriv_done_(o.deriv_done_.load()) {}
    RadialField(RadialField&& o) noexcept
        : grid_(std::move(o.grid_)), values_(std::move(o.values_)),
          deriv_(std::move(o.deriv_)), deriv_done_(o.deriv_done_.load()) {}
    RadialField& operator=(const RadialField& o) {
        grid_ = o.grid_; values_ = o.values_; deriv_ = o.deriv_;
        deriv_done_.store(o.deriv_done_.load());
        return *this;
    }
    RadialField& operator=(RadialField&& o) noexcept {
        grid_ = std::move(o.grid_); values_ = std::move(o.values_);
        deriv_ = std::move(o.deriv_); deriv_done_.store(o.deriv_done_.load());
        return *this;
    }

    template <class F>
    static RadialField sample(GridPtr grid, F&& f) {
        std::vector<double> v(grid->size());
        for (int i = 0; i < grid->size(); ++i) v[i] = f(grid->node(i));
        return RadialField(std::move(grid), std::move(v));
    }

    static RadialField zeros(GridPtr grid) {
        std::vector<double> v(grid->size(), 0.0);
        return RadialField(std::move(grid), std::move(v));
    }

    const RadialGrid& grid() const { return *grid_; }
    GridPtr grid_ptr() const { return grid_; }
    int size() const { return int(values_.size()); }
    double operator[](int i) const { return values_[i]; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& mutable_values() {
        deriv_.clear();
        deriv_done_.store(false);
        return values_;
    }

    // Centered second-order differences on the graded nodes; the radial
    // symmetry condition u'(0+) = 0 enters through an even extension at the
    // first node, and a one-sided 3-point formula is used at r = R.
    const std::vector<double>& derivative() const {
        if (!deriv_done_.load(std::memory_order_acquire)) {
            compute_derivative();
            deriv_done_.store(true, std::memory_order_release);
        }
        return deriv_;
    }

    // Even-quadratic extrapolation of the peak value u(0).
    double value_at_origin() const {
        const auto& r = grid_->nodes();
        const double d = r[1] * r[1] - r[0] * r[0];
        return values_[0] - (values_[1] - values_[0]) * r[0] * r[0] / d;
    }

private:
    GridPtr grid_;
    std::vector<double> values_;
    mutable std::vector<double> deriv_;
    mutable std::atomic<bool> deriv_done_{false};

    void compute_derivative() const {
        const int n = size();
        const auto& r = grid_->nodes();
        const auto& u = values_;
        deriv_.resize(n);
        // i = 0: even extension, derivative of the even quadratic through
        // (r0,u0),(r1,u1):  p(r) = u0 + (u1-u0)(r^2-r0^2)/(r1^2-r0^2).
        deriv_[0] = 2.0 * r[0] * (u[1] - u[0]) / (r[1] * r[1] - r[0] * r[0]);
        for (int i = 1; i + 1 < n; ++i) {
            const double hm = r[i] - r[i - 1], hp = r[i + 1] - r[i];
            deriv_[i] = -hp / (hm * (hm + hp)) * u[i - 1] +
                        (hp - hm) / (hm * hp) * u[i] +
                        hm / (hp * (hm + hp)) * u[i + 1];
        }
        {
            const int i = n - 1;
            const double h1 = r[i - 1] - r[i - 2], h2 = r[i] - r[i - 1];
            deriv_[i] = h2 / (h1 * (h1 + h2)) * u[i - 2] -
                        (h1 + h2) / (h1 * h2) * u[i - 1] +
                        (h1 + 2.0 * h2) / (h2 * (h1 + h2)) * u[i];
        }
    }
};

inline RadialField zeros_like(const RadialField& f) {
    return RadialField(f.grid_ptr(), std::vector<double>(f.size(), 0.0));
}

// Pointwise map of the field values.
template <class F>
RadialField transform(const RadialField& f, F&& fn) {
    std::vector<double> v(f.size());
    for (int i = 0; i < f.size(); ++i) v[i] = fn(f[i]);
    return RadialField(f.grid_ptr(), std::move(v));
}

// |u|^p, and the sign-preserving power |u|^{s-2} u.
inline RadialField abs_power(const RadialField& f, double p) {
    return transform(f, [p](double u) { return std::pow(std::abs(u), p); });
}
inline RadialField signed_power(const RadialField& f, double s) {
    return transform(f, [s](double u) {
        return u == 0.0 ? 0.0 : std::pow(std::abs(u), s - 2.0) * u;
    });
}

inline double volume_integral(const RadialField& f) {
    const auto& w = f.grid().weights();
    double s = 0.0;
    for (int i = 0; i < f.size(); ++i) s += w[i] * f[i];
    return s;
}

inline double inner(const RadialField& f, const RadialField& g) {
    const auto& w = f.grid().weights();
    double s = 0.0;
    for (int i = 0; i < f.size(); ++i) s += w[i] * f[i] * g[i];
    return s;
}

inline double norm_l2_sq(const RadialField& f) { return inner(f, f); }
inline double norm_l2(const RadialField& f) { return std::sqrt(norm_l2_sq(f)); }

inline double norm_ls_pow(const RadialField& f, double s) {
    if (!(s >= 1.0)) throw invalid_parameter("norm: Ls needs s >= 1");
    const auto& w = f.grid().weights();
    double acc = 0.0;
    for (int i = 0; i < f.size(); ++i) acc += w[i] * std::pow(std::abs(f[i]), s);
    return acc;
}
inline double norm_ls(const RadialField& f, double s) {
    return std::pow(norm_ls_pow(f, s), 1.0 / s);
}

inline double norm_grad_sq(const RadialField& f) {
    const auto& w = f.grid().weights();
    const auto& d = f.derivative();
    double s = 0.0;
    for (int i = 0; i < f.size(); ++i) s += w[i] * d[i] * d[i];
    return s;
}
inline double norm_grad(const RadialField& f) { return std::sqrt(norm_grad_sq(f)); }

inline double norm_h1(const RadialField& f, double eps) {
    return std::sqrt(norm_grad_sq(f) + eps * norm_l2_sq(f));
}

// Dispatch used by diagnostics and the CLI.
enum class NormKind { L2, Ls, GradL2, H1 };
inline double norm(const RadialField& f, NormKind kind, double param = 0.0) {
    switch (kind) {
        case NormKind::L2: return norm_l2(f);
        case NormKind::Ls: return norm_ls(f, param);
        case NormKind::GradL2: return norm_grad(f);
        case NormKind::H1: return norm_h1(f, param);
    }
    throw invalid_parameter("norm: invalid kind");
}

// u_t(x) = u(x/t), realized by relabeling the grid (r -> t r, w -> t^N w);
// the L2 and gradient norm transformations then hold exactly in floating
// point, with no interpolation error.
inline RadialField dilate(const RadialField& f, double t) {
    if (!(t > 0.0) || !std::isfinite(t)) throw invalid_parameter("dilate: t must be positive");
    if (t == 1.0) return f;
    const RadialGrid& g = f.grid();
    auto scaled = build_grid(g.dim(), t * g.radius(), g.size(), g.grading());
    return RadialField(scaled, f.values());
}

// w(x) = a u(b x): values a*u_i placed on the grid with nodes r_i / b.
inline RadialField power_rescale(const RadialField& f, double a, double b) {
    if (!(a > 0.0) || !(b > 0.0)) throw invalid_parameter("power_rescale: need a, b > 0");
    const RadialGrid& g = f.grid();
    GridPtr target = (b == 1.0) ? f.grid_ptr()
                                : build_grid(g.dim(), g.radius() / b, g.size(), g.grading());
    std::vector<double> v(f.size());
    for (int i = 0; i < f.size(); ++i) v[i] = a * f[i];
    return RadialField(std::move(target), std::move(v));
}

// Monotone cubic (Fritsch-Carlson) interpolation, for comparing fields that
// live on different grids. Values beyond the source radius are taken as 0.
class MonotoneCubic {
public:
    explicit MonotoneCubic(const RadialField& f)
        : x_(f.grid().nodes()), y_(f.values()), m_(f.size()) {
        const int n = int(x_.size());
        std::vector<double> d(n - 1);
        for (int i = 0; i < n - 1; ++i) d[i] = (y_[i + 1] - y_[i]) / (x_[i + 1] - x_[i]);
        m_[0] = d[0];
        m_[n - 1] = d[n - 2];
        for (int i = 1; i < n - 1; ++i)
            m_[i] = (d[i - 1] * d[i] <= 0.0) ? 0.0 : 2.0 * d[i - 1] * d[i] / (d[i - 1] + d[i]);
        for (int i = 0; i < n - 1; ++i) {
            if (d[i] == 0.0) { m_[i] = m_[i + 1] = 0.0; continue; }
            const double a = m_[i] / d[i], b = m_[i + 1] / d[i];
            const double s = a * a + b * b;
            if (s > 9.0) {
                const double t = 3.0 / std::sqrt(s);
                m_[i] = t * a * d[i];
                m_[i + 1] = t * b * d[i];
            }
        }
    }

    double operator()(double x) const {
        if (x >= x_.back()) return 0.0;
        if (x <= x_.front()) {
            // even extension toward the origin
            const double d = x_[1] * x_[1] - x_[0] * x_[0];
            return y_[0] + (y_[1] - y_[0]) * (x * x - x_[0] * x_[0]) / d;
        }
        int lo = int(std::lower_bound(x_.begin(), x_.end(), x) - x_.begin()) - 1;
        const double h = x_[lo + 1] - x_[lo], t = (x - x_[lo]) / h;
        const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
        const double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
        return h00 * y_[lo] + h10 * h * m_[lo] + h01 * y_[lo + 1] + h11 * h * m_[lo + 1];
    }

private:
    std::vector<double> x_, y_, m_;
};

inline RadialField interpolate_to(const RadialField& f, GridPtr target) {
    MonotoneCubic spline(f);
    return RadialField::sample(std::move(target), [&](double r) { return spline(r); });
}

// --- CSV serialization -----------------------------------------------------
// Two-column CSV `r,value` with header `# N=<N> R=<R> M=<M> gamma=<g>`;
// 17 significant digits so the decimal round trip is bit exact.

inline std::string format_g17(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{}) throw std::runtime_error("malformed number: " + std::string(s));
    return v;
}

inline void write_field_csv(std::ostream& os, const RadialField& f) {
    const RadialGrid& g = f.grid();
    os << "# N=" << g.dim() << " R=" << format_g17(g.radius())
       << " M=" << g.size() << " gamma=" << format_g17(g.grading()) << "\n";
    os << "r,value\n";
    for (int i = 0; i < f.size(); ++i)
        os << format_g17(g.node(i)) << "," << format_g17(f[i]) << "\n";
}

inline void write_field_csv(const std::string& path, const RadialField& f) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    write_field_csv(os, f);
}

inline RadialField read_field_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("# N=", 0) != 0)
        throw std::runtime_error("field csv: missing header");
    int dim = 0, count = 0;
    double radius = 0, gamma = 0;
    {
        std::istringstream hs(line.substr(1));
        std::string tok;
        while (hs >> tok) {
            auto eq = tok.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
            if (key == "N") dim = std::stoi(val);
            else if (key == "R") radius = parse_double(val);
            else if (key == "M") count = std::stoi(val);
            else if (key == "gamma") gamma = parse_double(val);
        }
    }
    std::getline(is, line); // column header
    auto grid = build_grid(dim, radius, count, gamma);
    std::vector<double> v;
    v.reserve(count);
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw std::runtime_error("field csv: bad row");
        v.push_back(parse_double(std::string_view(line).substr(comma + 1)));
    }
    if (int(v.size()) != count) throw std::runtime_error("field csv: row count mismatch");
    return RadialField(std::move(grid), std::move(v));
}

inline RadialField read_field_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open for reading: " + path);
    return read_field_csv(is);
}

} // namespace choqlab
