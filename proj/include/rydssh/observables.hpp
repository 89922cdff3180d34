#pragma once

// Expectation values and estimators on many-body states: occupancies,
// two-point correlators in the Z and X bases, string order, particle-number
// distributions, and Gaussian peak fitting for spectroscopy lines.
//
// Conventions: Z_i = 1 - 2 n_i (vacuum has Z = +1), X_i = b_i + b_i^+.
// String order over a chain of N sites:
//   C_string = -< Z_2 exp(i (pi/2) sum_{k=3}^{N-2} Z_k) Z_{N-1} >   (1-based sites)
// The X variant replaces every Z by X, evaluated by an exact pi/2 basis
// rotation of the state followed by the Z-string formula.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "mbcore.hpp"
#include "util.hpp"

namespace rydssh {

enum class pauli_basis { z, x };

inline Eigen::VectorXd occupancies(const Eigen::VectorXcd& psi, const fock_basis& basis) {
    Eigen::VectorXd n = Eigen::VectorXd::Zero(basis.n_sites());
    for (std::uint64_t r = 0; r < basis.dim(); ++r) {
        const double p = std::norm(psi[r]);
        if (p == 0.0) continue;
        std::uint32_t s = basis.unrank(r);
        while (s) {
            n[__builtin_ctz(s)] += p;
            s &= s - 1;
        }
    }
    return n;
}

inline Eigen::VectorXd number_distribution(const Eigen::VectorXcd& psi, const fock_basis& basis) {
    Eigen::VectorXd pn = Eigen::VectorXd::Zero(basis.n_sites() + 1);
    for (std::uint64_t r = 0; r < basis.dim(); ++r)
        pn[popcount32(basis.unrank(r))] += std::norm(psi[r]);
    return pn;
}

// exact pi/2 rotation taking the Z basis to the X basis on every site
// (per-site real rotation with U^T Z U = X); full basis only
inline Eigen::VectorXcd rotate_to_x_basis(const Eigen::VectorXcd& psi, const fock_basis& basis) {
    if (basis.sector())
        throw std::invalid_argument("rotate_to_x_basis: full basis required");
    Eigen::VectorXcd out = psi;
    const int n = basis.n_sites();
    const std::uint64_t dim = basis.dim();
    const double c = std::cos(pi / 4.0), s = std::sin(pi / 4.0);
    for (int k = 0; k < n; ++k) {
        const std::uint64_t bit = std::uint64_t(1) << k;
        for (std::uint64_t lo = 0; lo < dim; ++lo) {
            if (lo & bit) continue;
            const cplx a = out[lo], b = out[lo | bit];
            out[lo] = c * a + s * b;
            out[lo | bit] = -s * a + c * b;
        }
    }
    return out;
}

inline double correlator(const Eigen::VectorXcd& psi, const fock_basis& basis, pauli_basis obs,
                         int i, int j) {
    if (i == j) throw std::invalid_argument("correlator: need two distinct sites");
    if (obs == pauli_basis::z) {
        kahan_sum acc;
        for (std::uint64_t r = 0; r < basis.dim(); ++r) {
            const std::uint32_t s = basis.unrank(r);
            const double zi = (s >> i & 1u) ? -1.0 : 1.0;
            const double zj = (s >> j & 1u) ? -1.0 : 1.0;
            acc.add(std::norm(psi[r]) * zi * zj);
        }
        return acc.value();
    }
    if (basis.sector())
        throw std::invalid_argument("correlator: X on a sector basis is not defined");
    const std::uint64_t mask = (std::uint64_t(1) << i) | (std::uint64_t(1) << j);
    kahan_sum acc;
    for (std::uint64_t s = 0; s < basis.dim(); ++s)
        acc.add(std::real(std::conj(psi[s]) * psi[s ^ mask]));
    return acc.value();
}

inline double mean_z(const Eigen::VectorXcd& psi, const fock_basis& basis, int i) {
    kahan_sum acc;
    for (std::uint64_t r = 0; r < basis.dim(); ++r)
        acc.add(std::norm(psi[r]) * ((basis.unrank(r) >> i & 1u) ? -1.0 : 1.0));
    return acc.value();
}

inline double mean_x(const Eigen::VectorXcd& psi, const fock_basis& basis, int i) {
    if (basis.sector()) return 0.0;  // X changes particle number
    const std::uint64_t bit = std::uint64_t(1) << i;
    kahan_sum acc;
    for (std::uint64_t s = 0; s < basis.dim(); ++s)
        acc.add(std::real(std::conj(psi[s]) * psi[s ^ bit]));
    return acc.value();
}

struct correlation_map {
    pauli_basis observable;
    bool connected = false;
    Eigen::MatrixXd table;
};

inline correlation_map build_correlation_map(const Eigen::VectorXcd& psi, const fock_basis& basis,
                                             pauli_basis obs, bool connected = false) {
    const int n = basis.n_sites();
    correlation_map out{obs, connected, Eigen::MatrixXd::Zero(n, n)};
    Eigen::VectorXd single(n);
    for (int i = 0; i < n; ++i)
        single[i] = (obs == pauli_basis::z) ? mean_z(psi, basis, i) : mean_x(psi, basis, i);
    for (int i = 0; i < n; ++i) {
        out.table(i, i) = 1.0;  // Z_i^2 = X_i^2 = 1 for hard-core sites
        for (int j = i + 1; j < n; ++j) {
            double v = correlator(psi, basis, obs, i, j);
            if (connected) v -= single[i] * single[j];
            out.table(i, j) = v;
            out.table(j, i) = v;
        }
    }
    return out;
}

struct string_result {
    double value = 0.0;
    double imag_part = 0.0;  // diagnostic; > 1e-6 flags a suspect state
    bool warn = false;
};

// Z-string on the Z-diagonal distribution of psi; endpoints at 1-based sites
// 2 and N-1, the phase string runs over the interior sites 3..N-2
inline string_result string_order_z(const Eigen::VectorXcd& psi, const fock_basis& basis) {
    const int n = basis.n_sites();
    if (n < 6) throw std::invalid_argument("string_order: need at least 6 sites");
    const int a = 1, b = n - 2;  // 0-based endpoints
    static const cplx ipow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    kahan_sum_cplx acc;
    for (std::uint64_t r = 0; r < basis.dim(); ++r) {
        const double p = std::norm(psi[r]);
        if (p == 0.0) continue;
        const std::uint32_t s = basis.unrank(r);
        const double za = (s >> a & 1u) ? -1.0 : 1.0;
        const double zb = (s >> b & 1u) ? -1.0 : 1.0;
        int zsum = 0;
        for (int k = a + 1; k < b; ++k) zsum += (s >> k & 1u) ? -1 : 1;
        acc.add(p * za * zb * ipow[((zsum % 4) + 4) % 4]);  // i^zsum
    }
    const cplx v = -acc.value();
    string_result out;
    out.value = v.real();
    out.imag_part = std::abs(v.imag());
    out.warn = out.imag_part > 1e-6;
    return out;
}

inline string_result string_order(const Eigen::VectorXcd& psi, const fock_basis& basis,
                                  pauli_basis obs) {
    if (obs == pauli_basis::z) return string_order_z(psi, basis);
    if (basis.sector())
        throw std::invalid_argument("string_order: X variant requires the full basis");
    return string_order_z(rotate_to_x_basis(psi, basis), basis);
}

inline double overlap_probability(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
    return std::norm(a.dot(b));
}

struct gaussian_fit_result {
    double amplitude = 0.0;
    double center = 0.0;
    double width = 0.0;
    double offset = 0.0;
    double center_stderr = 0.0;
    double rms_residual = 0.0;
    int iterations = 0;
};

// nonlinear least squares of A exp(-(x-c)^2 / 2w^2) + b with deterministic
// moment-based initialization; stderr of the center from the residual covariance
inline gaussian_fit_result gaussian_fit(const std::vector<double>& x,
                                        const std::vector<double>& y) {
    const int n = static_cast<int>(x.size());
    if (n < 5 || y.size() != x.size())
        throw std::invalid_argument("gaussian_fit: need at least 5 points");
    const double ymin = *std::min_element(y.begin(), y.end());
    const double ymax = *std::max_element(y.begin(), y.end());
    if (!(ymax > ymin)) throw std::invalid_argument("gaussian_fit: constant data");

    std::vector<double> ys = y;
    std::nth_element(ys.begin(), ys.begin() + n / 2, ys.end());
    const double med = ys[n / 2];
    const bool peak_up = (ymax - med) >= (med - ymin);

    double b0 = peak_up ? ymin : ymax;
    double a0 = peak_up ? (ymax - b0) : (ymin - b0);
    double wsum = 0.0, cx = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = std::max(peak_up ? y[i] - b0 : b0 - y[i], 0.0);
        wsum += u;
        cx += u * x[i];
    }
    double c0 = wsum > 0 ? cx / wsum : x[n / 2];
    double s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = std::max(peak_up ? y[i] - b0 : b0 - y[i], 0.0);
        s2 += u * (x[i] - c0) * (x[i] - c0);
    }
    const double xspan = *std::max_element(x.begin(), x.end()) -
                         *std::min_element(x.begin(), x.end());
    double w0 = wsum > 0 ? std::sqrt(std::max(s2 / wsum, 1e-12)) : xspan / 6.0;
    if (!(w0 > 0.0)) w0 = xspan / 6.0;

    Eigen::Vector4d p(a0, c0, w0, b0);
    double lambda = 1e-3;
    double prev_rss = std::numeric_limits<double>::infinity();
    gaussian_fit_result out;
    Eigen::MatrixXd jac(n, 4);
    Eigen::VectorXd resid(n);

    auto rss_at = [&](const Eigen::Vector4d& q) {
        double rss = 0.0;
        for (int i = 0; i < n; ++i) {
            const double dxn = (x[i] - q(1)) / q(2);
            const double g = std::exp(-0.5 * dxn * dxn);
            const double e = q(0) * g + q(3) - y[i];
            rss += e * e;
        }
        return rss;
    };

    int it = 0;
    for (; it < 200; ++it) {
        for (int i = 0; i < n; ++i) {
            const double dxn = (x[i] - p(1)) / p(2);
            const double g = std::exp(-0.5 * dxn * dxn);
            jac(i, 0) = g;
            jac(i, 1) = p(0) * g * dxn / p(2);
            jac(i, 2) = p(0) * g * dxn * dxn / p(2);
            jac(i, 3) = 1.0;
            resid(i) = y[i] - (p(0) * g + p(3));
        }
        const double rss = resid.squaredNorm();
        Eigen::Matrix4d jtj = jac.transpose() * jac;
        const Eigen::Vector4d jtr = jac.transpose() * resid;

        bool stepped = false;
        for (int tries = 0; tries < 12; ++tries) {
            Eigen::Matrix4d damped = jtj;
            for (int q = 0; q < 4; ++q) damped(q, q) += lambda * std::max(jtj(q, q), 1e-12);
            const Eigen::Vector4d dp = damped.ldlt().solve(jtr);
            Eigen::Vector4d cand = p + dp;
            if (cand(2) <= 0.0) cand(2) = 0.5 * p(2);
            if (rss_at(cand) < rss) {
                p = cand;
                lambda = std::max(lambda * 0.3, 1e-12);
                stepped = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!stepped || std::abs(prev_rss - rss) <= 1e-14 * (1.0 + rss)) break;
        prev_rss = rss;
    }

    for (int i = 0; i < n; ++i) {
        const double dxn = (x[i] - p(1)) / p(2);
        const double g = std::exp(-0.5 * dxn * dxn);
        jac(i, 0) = g;
        jac(i, 1) = p(0) * g * dxn / p(2);
        jac(i, 2) = p(0) * g * dxn * dxn / p(2);
        jac(i, 3) = 1.0;
        resid(i) = y[i] - (p(0) * g + p(3));
    }
    const double rss = resid.squaredNorm();
    if (!std::isfinite(rss)) throw numerical_error("gaussian_fit: did not converge");
    const double sigma2 = rss / std::max(n - 4, 1);
    const Eigen::Matrix4d cov =
        sigma2 * (jac.transpose() * jac)
                     .fullPivLu()
                     .inverse();

    out.amplitude = p(0);
    out.center = p(1);
    out.width = std::abs(p(2));
    out.offset = p(3);
    out.center_stderr = std::sqrt(std::max(cov(1, 1), 0.0));
    out.rms_residual = std::sqrt(rss / n);
    out.iterations = it;
    return out;
}

} // namespace rydssh
