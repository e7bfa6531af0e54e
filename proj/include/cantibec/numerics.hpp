#ifndef CANTIBEC_NUMERICS_HPP
#define CANTIBEC_NUMERICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cantibec/errors.hpp"

namespace cantibec::numerics {

template <int N>
constexpr double ipow(double x) {
    if constexpr (N == 0) {
        return 1.0;
    } else if constexpr (N < 0) {
        return 1.0 / ipow<-N>(x);
    } else {
        const double half = ipow<N / 2>(x);
        if constexpr (N % 2 == 0) {
            return half * half;
        } else {
            return half * half * x;
        }
    }
}

inline double ipow(double x, int n) {
    double r = 1.0;
    for (int i = 0; i < (n < 0 ? -n : n); ++i) r *= x;
    return n < 0 ? 1.0 / r : r;
}

// Bisection on a bracketed sign change. `f(lo)` and `f(hi)` must have
// opposite signs (zero at an end point is accepted).
template <class F>
double bisect(F&& f, double lo, double hi, double abs_tol, int max_iter = 200) {
    double flo = f(lo);
    if (flo == 0.0) return lo;
    const double fhi = f(hi);
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0)) {
        throw PhysicsError("non-convergence", "bisection called without a sign change");
    }
    for (int i = 0; i < max_iter; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (std::abs(hi - lo) <= abs_tol || mid == lo || mid == hi) return mid;
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    throw PhysicsError("non-convergence", "bisection exceeded its iteration budget");
}

struct Minimum {
    double x;
    double value;
};

// Golden-section search for a minimum of a unimodal function on [lo, hi].
// Terminates when the bracket is below rel_tol * (|x| + abs_floor).
template <class F>
Minimum golden_section(F&& f, double lo, double hi, double rel_tol, double abs_floor = 0.0) {
    constexpr double inv_phi = 0.6180339887498949;
    double a = lo, b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    for (int i = 0; i < 500; ++i) {
        if (std::abs(b - a) <= rel_tol * (std::abs(c) + std::abs(d) + abs_floor)) break;
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    return fc < fd ? Minimum{c, fc} : Minimum{d, fd};
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t points = 0;
};

inline LinearFit linear_regression(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) throw DomainError("linear regression needs >= 2 paired points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(n);
    my /= double(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw DomainError("linear regression with degenerate abscissa");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    fit.points = n;
    return fit;
}

// Pool-adjacent-violators: least-squares nondecreasing fit.
inline std::vector<double> isotonic_increasing(std::span<const double> y) {
    std::vector<double> level;
    std::vector<std::size_t> width;
    for (double v : y) {
        level.push_back(v);
        width.push_back(1);
        while (level.size() > 1 && level[level.size() - 2] > level.back()) {
            const std::size_t w = width[width.size() - 2] + width.back();
            const double merged =
                (level[level.size() - 2] * double(width[width.size() - 2]) +
                 level.back() * double(width.back())) / double(w);
            level.pop_back();
            width.pop_back();
            level.back() = merged;
            width.back() = w;
        }
    }
    std::vector<double> out;
    out.reserve(y.size());
    for (std::size_t i = 0; i < level.size(); ++i) out.insert(out.end(), width[i], level[i]);
    return out;
}

// Lorentzian dip: baseline - depth / (1 + ((x - center) / (fwhm/2))^2).
struct LorentzianFit {
    double center = 0.0;
    double fwhm = 0.0;
    double depth = 0.0;
    double baseline = 0.0;
    double residual = 0.0;
    bool converged = false;
};

inline double lorentzian_dip(double x, const LorentzianFit& p) {
    const double u = (x - p.center) / (0.5 * p.fwhm);
    return p.baseline - p.depth / (1.0 + u * u);
}

// Levenberg-Marquardt fit of a Lorentzian dip. Abscissa is rescaled
// internally so that the normal equations stay well conditioned.
inline LorentzianFit fit_lorentzian_dip(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    LorentzianFit out;
    if (n < 5 || y.size() != n) return out;

    const auto [xmin_it, xmax_it] = std::minmax_element(x.begin(), x.end());
    const double x0 = 0.5 * (*xmin_it + *xmax_it);
    const double xs = 0.5 * (*xmax_it - *xmin_it);
    if (!(xs > 0.0)) return out;

    const auto ymin_it = std::min_element(y.begin(), y.end());
    const auto ymax_it = std::max_element(y.begin(), y.end());
    const double ys = std::max(std::abs(*ymax_it), std::abs(*ymin_it));
    if (!(ys > 0.0) || *ymax_it == *ymin_it) return out;

    // parameters in scaled units: center, half-width, depth, baseline
    Eigen::Vector4d p;
    const std::size_t imin = std::size_t(ymin_it - y.begin());
    p << (x[imin] - x0) / xs, 0.1, (*ymax_it - *ymin_it) / ys, *ymax_it / ys;
    {
        // half-width guess from the half-depth crossing
        const double half = 0.5 * (*ymax_it + *ymin_it);
        std::size_t count = 0;
        for (double v : y) count += v < half ? 1 : 0;
        const double step = 2.0 / double(n - 1);
        p[1] = std::max(0.5 * double(count) * step, step);
    }

    auto residuals = [&](const Eigen::Vector4d& q, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
        r.resize(Eigen::Index(n));
        if (jac) jac->resize(Eigen::Index(n), 4);
        for (std::size_t i = 0; i < n; ++i) {
            const double u = ((x[i] - x0) / xs - q[0]) / q[1];
            const double den = 1.0 + u * u;
            const double model = q[3] - q[2] / den;
            r[Eigen::Index(i)] = model - y[i] / ys;
            if (jac) {
                const double dmod_du = q[2] * 2.0 * u / (den * den);
                (*jac)(Eigen::Index(i), 0) = dmod_du * (-1.0 / q[1]);
                (*jac)(Eigen::Index(i), 1) = dmod_du * (-u / q[1]);
                (*jac)(Eigen::Index(i), 2) = -1.0 / den;
                (*jac)(Eigen::Index(i), 3) = 1.0;
            }
        }
    };

    Eigen::VectorXd r;
    Eigen::MatrixXd jac;
    residuals(p, r, &jac);
    double cost = r.squaredNorm();
    double lambda = 1e-3;
    bool converged = false;
    for (int iter = 0; iter < 200; ++iter) {
        const Eigen::Matrix4d jtj = jac.transpose() * jac;
        const Eigen::Vector4d jtr = jac.transpose() * r;
        Eigen::Matrix4d a = jtj;
        for (int k = 0; k < 4; ++k) a(k, k) += lambda * std::max(jtj(k, k), 1e-12);
        const Eigen::Vector4d step = a.ldlt().solve(-jtr);
        Eigen::Vector4d trial = p + step;
        if (!(trial[1] > 0.0)) trial[1] = 0.5 * p[1];
        Eigen::VectorXd rt;
        residuals(trial, rt, nullptr);
        const double tcost = rt.squaredNorm();
        if (tcost < cost) {
            const double rel = (cost - tcost) / std::max(cost, 1e-300);
            p = trial;
            cost = tcost;
            residuals(p, r, &jac);
            lambda = std::max(lambda * 0.3, 1e-12);
            if (rel < 1e-12 || step.norm() < 1e-12) {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if (lambda > 1e12) {
                converged = true; // stationary: no downhill step left
                break;
            }
        }
    }
    out.center = x0 + p[0] * xs;
    out.fwhm = 2.0 * p[1] * xs;
    out.depth = p[2] * ys;
    out.baseline = p[3] * ys;
    out.residual = cost * ys * ys;
    out.converged = converged && std::isfinite(out.center) && out.fwhm > 0.0;
    return out;
}

// SplitMix64 finalizer, used to derive independent per-particle streams.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
    return splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

// Uniform double in (0, 1) from 53 random bits.
template <class Rng>
double uniform_open(Rng& rng) {
    return (double(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double linear_interpolate(std::span<const double> xs, std::span<const double> ys, double x) {
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t i = std::size_t(it - xs.begin());
    const double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    return ys[i - 1] + t * (ys[i] - ys[i - 1]);
}

} // namespace cantibec::numerics

#endif
