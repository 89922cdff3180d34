#pragma once

// Planar two-row chain geometry for dipolar exchange couplings.
//
// Both sublattice rows run along the "magic" direction (3 cos^2 theta - 1 = 0
// relative to the in-plane quantization axis), which nulls every coupling
// between sites of the same sublattice. Alternating strong/weak bonds zig-zag
// between the rows; their lengths and angles set the dimerized couplings.
// Distances in um, couplings (flip-flop amplitudes) in MHz.

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "util.hpp"

namespace rydssh {

inline double magic_angle() { return std::acos(1.0 / std::sqrt(3.0)); }

enum class sublattice_tag { A, B };

struct site {
    double x_um = 0.0;
    double y_um = 0.0;
    sublattice_tag sublattice = sublattice_tag::A;
};

struct chain_geometry {
    std::vector<site> sites;
    double axis_angle_rad = 0.0;                 // in-plane quantization axis direction
    double d2_mhz_um3 = 1229.0770467652758;      // dipolar prefactor d^2, MHz * um^3
    int n() const { return static_cast<int>(sites.size()); }
};

// J_ij = d2 * (3 cos^2 theta_ij - 1) / R_ij^3 with theta_ij measured from the axis
inline double dipolar_coupling(const site& a, const site& b, double axis_angle_rad,
                               double d2_mhz_um3) {
    const double dx = b.x_um - a.x_um;
    const double dy = b.y_um - a.y_um;
    const double r2 = dx * dx + dy * dy;
    if (r2 <= 0.0) throw std::invalid_argument("dipolar_coupling: coincident sites");
    const double r = std::sqrt(r2);
    const double c = (dx * std::cos(axis_angle_rad) + dy * std::sin(axis_angle_rad)) / r;
    return d2_mhz_um3 * (3.0 * c * c - 1.0) / (r2 * r);
}

inline double dipolar_coupling(const chain_geometry& g, int i, int j) {
    return dipolar_coupling(g.sites[i], g.sites[j], g.axis_angle_rad, g.d2_mhz_um3);
}

struct coupling_options {
    std::optional<double> cutoff_mhz;  // entries with |J| below this are zeroed
    bool nearest_neighbor_only = false;
};

// full symmetric coupling matrix; entries are computed once per pair and
// mirrored, so J(i,j) and J(j,i) are bit-equal
inline Eigen::MatrixXd coupling_matrix(const chain_geometry& g,
                                       const coupling_options& opt = {}) {
    const int n = g.n();
    Eigen::MatrixXd jm = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (opt.nearest_neighbor_only && j != i + 1) continue;
            double v = dipolar_coupling(g, i, j);
            if (opt.cutoff_mhz && std::abs(v) < *opt.cutoff_mhz) v = 0.0;
            jm(i, j) = v;
            jm(j, i) = v;
        }
    }
    return jm;
}

namespace detail {

// bisection to near machine precision; f(lo) and f(hi) must bracket a root
template <class F>
double bisect(F&& f, double lo, double hi, double flo) {
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        const double fm = f(mid);
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// all sign-change roots of f on [lo, hi] found on a uniform scan grid
template <class F>
std::vector<double> scan_roots(F&& f, double lo, double hi, int grid) {
    std::vector<double> roots;
    double xp = lo, fp = f(lo);
    for (int k = 1; k <= grid; ++k) {
        const double x = lo + (hi - lo) * k / grid;
        const double fx = f(x);
        if (std::isfinite(fp) && std::isfinite(fx)) {
            if (fx == 0.0)
                roots.push_back(x);
            else if ((fp < 0.0) != (fx < 0.0))
                roots.push_back(bisect(f, xp, x, fp));
        }
        xp = x;
        fp = fx;
    }
    return roots;
}

} // namespace detail

enum class weak_branch { outer, inner };  // which weak-bond root to take: largest or smallest length

struct magic_chain_config {
    double strong_bond_um = 10.0;
    double d2_mhz_um3 = 1229.0770467652758;  // default calibrated to J=2.42, J'=-0.92 with
                                             // a 14-site edge hybridization of 0.020 MHz
    double axis_angle_rad = 0.0;
    bool trivial_order = false;              // start with the strong bond instead of the weak one
    weak_branch branch = weak_branch::outer;
};

struct magic_chain_result {
    chain_geometry geometry;
    double row_period_um = 0.0;     // same-sublattice spacing along the magic direction
    double weak_bond_um = 0.0;
    double strong_angle_rad = 0.0;  // strong-bond direction measured from the axis
    bool unphysical_regime = false; // couplings outside |J| > |J'| > 0 with opposite signs
};

// Solves the two-row geometry that realizes alternating couplings (J, J').
// The strong-bond angle follows from J at the configured bond length; the row
// period follows from J' by root-finding on the weak-bond coupling. Several
// weak-bond lengths can produce the same J'; `branch` picks which one.
inline magic_chain_result build_magic_chain(int n_sites, double j_mhz, double j_prime_mhz,
                                            const magic_chain_config& cfg = {}) {
    if (n_sites < 2) throw std::invalid_argument("build_magic_chain: need at least 2 sites");
    if (cfg.strong_bond_um <= 0.0 || cfg.d2_mhz_um3 <= 0.0)
        throw std::invalid_argument("build_magic_chain: lengths and d2 must be positive");

    magic_chain_result out;
    out.unphysical_regime = !(std::abs(j_mhz) > std::abs(j_prime_mhz) &&
                              std::abs(j_prime_mhz) > 0.0 &&
                              std::signbit(j_mhz) != std::signbit(j_prime_mhz));

    const double r = cfg.strong_bond_um;
    const double arg = (j_mhz * r * r * r / cfg.d2_mhz_um3 + 1.0) / 3.0;
    if (arg < 0.0 || arg > 1.0)
        throw std::invalid_argument("build_magic_chain: strong coupling unreachable at this bond length");
    const double ts = std::acos(std::sqrt(arg));
    out.strong_angle_rad = ts;

    const double am = cfg.axis_angle_rad + magic_angle();
    const Eigen::Vector2d um(std::cos(am), std::sin(am));
    const Eigen::Vector2d sv(r * std::cos(cfg.axis_angle_rad + ts),
                             r * std::sin(cfg.axis_angle_rad + ts));

    const site origin{};
    auto weak_coupling = [&](double u) {
        const Eigen::Vector2d wv = u * um - sv;
        if (wv.norm() < 0.05 * r) return std::nan("");
        site b{wv.x(), wv.y(), sublattice_tag::B};
        return dipolar_coupling(origin, b, cfg.axis_angle_rad, cfg.d2_mhz_um3);
    };
    auto f = [&](double u) { return weak_coupling(u) - j_prime_mhz; };
    const std::vector<double> roots = detail::scan_roots(f, 0.02 * r, 40.0 * r, 80000);
    if (roots.empty())
        throw std::invalid_argument("build_magic_chain: weak coupling unreachable");

    auto weak_len = [&](double u) { return (u * um - sv).norm(); };
    double u_star = roots.front();
    for (double u : roots) {
        const bool better = (cfg.branch == weak_branch::outer)
                                ? weak_len(u) > weak_len(u_star)
                                : weak_len(u) < weak_len(u_star);
        if (better) u_star = u;
    }
    out.row_period_um = u_star;
    out.weak_bond_um = weak_len(u_star);

    const Eigen::Vector2d wv = u_star * um - sv;
    chain_geometry g;
    g.axis_angle_rad = cfg.axis_angle_rad;
    g.d2_mhz_um3 = cfg.d2_mhz_um3;
    g.sites.reserve(n_sites);
    Eigen::Vector2d p(0.0, 0.0);
    for (int i = 0; i < n_sites; ++i) {
        g.sites.push_back({p.x(), p.y(), i % 2 == 0 ? sublattice_tag::A : sublattice_tag::B});
        const bool weak_step = (i % 2 == 0) != cfg.trivial_order;
        p += weak_step ? wv : sv;
    }
    out.geometry = std::move(g);
    return out;
}

struct edge_perturbation {
    chain_geometry geometry;
    double displacement_um = 0.0;   // signed shift of the last site off its row
    double j_second_mhz = 0.0;      // realized next-nearest coupling J(N-2, N)
    double j_edge_mhz = 0.0;        // modified nearest coupling J(N-1, N)
    double j_third_mhz = 0.0;       // modified coupling J(N-3, N)
};

// Moves the last site perpendicular to its sublattice row until the coupling to
// its next-nearest neighbor reaches `target_jpp_mhz` (that coupling is nulled by
// the magic-direction rows when undisplaced). The smallest-displacement root is
// taken; couplings changed by the move are reported.
inline edge_perturbation perturb_edge(const chain_geometry& g, double target_jpp_mhz) {
    const int n = g.n();
    if (n < 4) throw std::invalid_argument("perturb_edge: need at least 4 sites");

    edge_perturbation out;
    out.geometry = g;
    site& last = out.geometry.sites[n - 1];
    const site base = last;
    const double am = g.axis_angle_rad + magic_angle();
    const Eigen::Vector2d nv(-std::sin(am), std::cos(am));

    auto coupling_at = [&](double d, int other) {
        site moved{base.x_um + d * nv.x(), base.y_um + d * nv.y(), base.sublattice};
        return dipolar_coupling(g.sites[other], moved, g.axis_angle_rad, g.d2_mhz_um3);
    };

    double delta = 0.0;
    if (target_jpp_mhz != 0.0) {
        // keep clear of the neighboring sites; half the strong-bond length is ample
        const double dmax = 0.45 * (Eigen::Vector2d(g.sites[n - 1].x_um - g.sites[n - 2].x_um,
                                                    g.sites[n - 1].y_um - g.sites[n - 2].y_um)
                                        .norm() +
                                    Eigen::Vector2d(g.sites[n - 2].x_um - g.sites[n - 3].x_um,
                                                    g.sites[n - 2].y_um - g.sites[n - 3].y_um)
                                        .norm());
        auto f = [&](double d) { return coupling_at(d, n - 3) - target_jpp_mhz; };
        std::vector<double> roots = detail::scan_roots(f, -dmax, dmax, 40000);
        if (roots.empty())
            throw std::invalid_argument("perturb_edge: target coupling unreachable");
        delta = roots.front();
        for (double d : roots)
            if (std::abs(d) < std::abs(delta)) delta = d;
    }

    last.x_um = base.x_um + delta * nv.x();
    last.y_um = base.y_um + delta * nv.y();
    out.displacement_um = delta;
    out.j_second_mhz = dipolar_coupling(out.geometry, n - 3, n - 1);
    out.j_edge_mhz = dipolar_coupling(out.geometry, n - 2, n - 1);
    out.j_third_mhz = dipolar_coupling(out.geometry, n - 4, n - 1);
    return out;
}

} // namespace rydssh
