#pragma once

// Single-particle analysis of a coupling matrix J: spectrum of H = -J,
// chiral-symmetry diagnostics, mid-gap edge-mode extraction with
// localization fits, and the edge-pair hybridization scan versus chain
// length for both nearest-neighbor and full dipolar couplings.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "geometry.hpp"
#include "util.hpp"

namespace rydssh {

struct sp_spectrum {
    Eigen::VectorXd values;   // ascending
    Eigen::MatrixXd vectors;  // columns; largest-magnitude component positive
    double chiral_residual_mhz = 0.0;  // against alternating sublattice labels
};

inline double chiral_residual(const Eigen::MatrixXd& coupling,
                              const std::vector<sublattice_tag>& labels);

inline sp_spectrum single_particle_spectrum(const Eigen::MatrixXd& coupling) {
    if (coupling.rows() != coupling.cols() || coupling.rows() < 1)
        throw std::invalid_argument("single_particle_spectrum: square matrix required");
    const Eigen::MatrixXd h = -coupling;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    if (es.info() != Eigen::Success)
        throw numerical_error("single_particle_spectrum: eigensolver failed");
    sp_spectrum out{es.eigenvalues(), es.eigenvectors(), 0.0};
    std::vector<sublattice_tag> alternating(coupling.rows());
    for (int i = 0; i < coupling.rows(); ++i)
        alternating[i] = (i % 2 == 0) ? sublattice_tag::A : sublattice_tag::B;
    out.chiral_residual_mhz = chiral_residual(coupling, alternating);
    const double scale = h.cwiseAbs().maxCoeff();
    for (int k = 0; k < out.vectors.cols(); ++k) {
        Eigen::Index imax;
        out.vectors.col(k).cwiseAbs().maxCoeff(&imax);
        if (out.vectors(imax, k) < 0.0) out.vectors.col(k) = -out.vectors.col(k);
        const double resid =
            (h * out.vectors.col(k) - out.values[k] * out.vectors.col(k)).cwiseAbs().maxCoeff();
        if (resid > 1e-10 * std::max(scale, 1.0))
            throw numerical_error("single_particle_spectrum: residual out of tolerance");
    }
    return out;
}

// max |(U_S H U_S + H)_ij| with U_S = +1 on sublattice A, -1 on B; for H = -J
// this equals 2 max |J_ij| over same-sublattice pairs
inline double chiral_residual(const Eigen::MatrixXd& coupling,
                              const std::vector<sublattice_tag>& labels) {
    const int n = static_cast<int>(coupling.rows());
    if (static_cast<int>(labels.size()) != n)
        throw std::invalid_argument("chiral_residual: label count mismatch");
    double worst = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double si = labels[i] == sublattice_tag::A ? 1.0 : -1.0;
            const double sj = labels[j] == sublattice_tag::A ? 1.0 : -1.0;
            worst = std::max(worst, std::abs((si * sj + 1.0) * -coupling(i, j)));
        }
    return worst;
}

// thermodynamic-limit gap between the two bands of the alternating chain whose
// strong/weak bonds are the extreme nearest-neighbor magnitudes of `coupling`;
// the dispersion minimum 2(|J| - |J'|) is exact in the bulk, while the finite
// open-chain eigenvalue separation converges to it only as N grows
inline double bulk_band_gap(const Eigen::MatrixXd& coupling) {
    const int n = static_cast<int>(coupling.rows());
    if (n < 2 || coupling.cols() != n)
        throw std::invalid_argument("bulk_band_gap: need a square matrix with n >= 2");
    double strong = 0.0, weak = std::numeric_limits<double>::infinity();
    for (int i = 0; i + 1 < n; ++i) {
        const double a = std::abs(coupling(i, i + 1));
        strong = std::max(strong, a);
        weak = std::min(weak, a);
    }
    return 2.0 * (strong - weak);
}

struct localization_fit {
    double slope_per_cell = std::numeric_limits<double>::quiet_NaN();
    double length_cells = std::numeric_limits<double>::quiet_NaN();
    int points_used = 0;
};

namespace detail {

inline localization_fit fit_log_weights(const std::vector<double>& cell_index,
                                        const std::vector<double>& weight) {
    localization_fit fit;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int m = 0;
    for (std::size_t k = 0; k < weight.size(); ++k) {
        if (weight[k] < 1e-12) continue;  // below double precision support
        const double lx = cell_index[k], ly = std::log(weight[k]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++m;
    }
    fit.points_used = m;
    if (m < 2) return fit;
    const double denom = m * sxx - sx * sx;
    if (std::abs(denom) < 1e-30) return fit;
    fit.slope_per_cell = (m * sxy - sx * sy) / denom;
    if (fit.slope_per_cell < 0.0) fit.length_cells = -2.0 / fit.slope_per_cell;
    return fit;
}

} // namespace detail

struct edge_mode_report {
    int count = 0;
    double e_lower = std::numeric_limits<double>::quiet_NaN();
    double e_upper = std::numeric_limits<double>::quiet_NaN();
    double e_hyb = std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd mode_lower, mode_upper;
    // symmetric/antisymmetric combinations localized on one edge each
    Eigen::VectorXd left_mode, right_mode;
    localization_fit left_fit, right_fit;
};

// Selects the mid-gap pair: with no window the two eigenvalues closest to
// zero; with a window all eigenvalues inside it (0 modes -> empty report,
// more than 2 -> error).  Localization fits use the squared amplitude on the
// edge mode's dominant sublattice, one point per unit cell.
inline edge_mode_report edge_modes(const Eigen::MatrixXd& coupling,
                                   std::optional<std::pair<double, double>> window = {}) {
    const int n = static_cast<int>(coupling.rows());
    if (n < 4) throw std::invalid_argument("edge_modes: need at least 4 sites");
    const sp_spectrum sp = single_particle_spectrum(coupling);

    std::vector<int> pick;
    if (window) {
        if (!(window->first < window->second))
            throw config_error("edge_modes: window bounds must be increasing");
        for (int k = 0; k < n; ++k)
            if (sp.values[k] >= window->first && sp.values[k] <= window->second)
                pick.push_back(k);
        if (pick.size() > 2)
            throw config_error("edge_modes: window selects more than two modes");
    } else {
        std::vector<int> order(n);
        for (int k = 0; k < n; ++k) order[k] = k;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return std::abs(sp.values[a]) < std::abs(sp.values[b]);
        });
        pick = {order[0], order[1]};
        std::sort(pick.begin(), pick.end());
    }

    edge_mode_report rep;
    rep.count = static_cast<int>(pick.size());
    if (rep.count == 0) return rep;
    rep.e_lower = sp.values[pick.front()];
    rep.mode_lower = sp.vectors.col(pick.front());
    if (rep.count == 1) return rep;
    rep.e_upper = sp.values[pick.back()];
    rep.mode_upper = sp.vectors.col(pick.back());
    rep.e_hyb = rep.e_upper - rep.e_lower;

    const Eigen::VectorXd plus = (rep.mode_lower + rep.mode_upper).normalized();
    const Eigen::VectorXd minus = (rep.mode_lower - rep.mode_upper).normalized();
    const bool plus_left = std::abs(plus[0]) > std::abs(minus[0]);
    rep.left_mode = plus_left ? plus : minus;
    rep.right_mode = plus_left ? minus : plus;

    auto fit_mode = [n](const Eigen::VectorXd& v, bool from_left) {
        Eigen::Index imax;
        v.cwiseAbs().maxCoeff(&imax);
        const int parity = static_cast<int>(imax) % 2;  // dominant sublattice
        std::vector<double> cells, weights;
        for (int s = parity; s < n; s += 2) {
            const int cell = s / 2;
            cells.push_back(from_left ? cell : (n / 2 - 1 - cell));
            weights.push_back(v[s] * v[s]);
        }
        return detail::fit_log_weights(cells, weights);
    };
    rep.left_fit = fit_mode(rep.left_mode, true);
    rep.right_fit = fit_mode(rep.right_mode, false);
    return rep;
}

enum class coupling_model { nearest_neighbor, full_dipolar };

struct hybridization_scan_result {
    std::vector<int> n_sites;
    std::vector<double> e_hyb_mhz;
    double exp_slope_per_cell = std::numeric_limits<double>::quiet_NaN();
    double ideal_slope = std::numeric_limits<double>::quiet_NaN();  // ln |J'/J|
    double loglog_slope = std::numeric_limits<double>::quiet_NaN();
};

// E_hyb versus chain length for dimerized chains of the given couplings;
// even sizes from n_min to n_max.  The short-chain segment (up to 20 sites)
// yields the exponential decay rate per unit cell; for full dipolar
// couplings the tail (60 to 100 cells, when present) yields the power-law
// exponent of the long-range-induced crossover.
inline hybridization_scan_result hybridization_scan(double j_mhz, double j_prime_mhz, int n_min,
                                                    int n_max, coupling_model model,
                                                    const magic_chain_config& cfg = {}) {
    if (n_min < 4 || n_max < n_min) throw config_error("hybridization_scan: bad size range");
    hybridization_scan_result out;
    out.ideal_slope = std::log(std::abs(j_prime_mhz / j_mhz));
    coupling_options copt;
    copt.nearest_neighbor_only = (model == coupling_model::nearest_neighbor);
    for (int n = n_min + (n_min % 2); n <= n_max; n += 2) {
        const magic_chain_result chain = build_magic_chain(n, j_mhz, j_prime_mhz, cfg);
        const Eigen::MatrixXd jm = coupling_matrix(chain.geometry, copt);
        out.n_sites.push_back(n);
        out.e_hyb_mhz.push_back(edge_modes(jm).e_hyb);
    }

    auto fit_segment = [&](bool loglog, int n_lo, int n_hi) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int m = 0;
        for (std::size_t k = 0; k < out.n_sites.size(); ++k) {
            const int n = out.n_sites[k];
            const double e = out.e_hyb_mhz[k];
            if (n < n_lo || n > n_hi || !(e > 1e-12)) continue;
            const double cells = n / 2.0;
            const double lx = loglog ? std::log(cells) : cells;
            const double ly = std::log(e);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
            ++m;
        }
        if (m < 2) return std::numeric_limits<double>::quiet_NaN();
        return (m * sxy - sx * sy) / (m * sxx - sx * sx);
    };
    out.exp_slope_per_cell = fit_segment(false, 4, 20);
    if (model == coupling_model::full_dipolar)
        out.loglog_slope = fit_segment(true, 120, 200);
    return out;
}

} // namespace rydssh
