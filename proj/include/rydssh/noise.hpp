#pragma once

// Experimental imperfection model and the Monte Carlo measurement pipeline:
// per-site preparation defects (site removed for the whole realization),
// state-preparation sweeps on the surviving sites, projective sampling in the
// Z or rotated X basis, and asymmetric detection flips.  All randomness comes
// from counter-based streams keyed by (seed, realization, shot); realization 0
// uses shot key 0 for the defect mask and shot keys 1..S for the shots, so
// every record is independently reproducible.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "engine.hpp"
#include "mbcore.hpp"
#include "observables.hpp"
#include "protocols.hpp"
#include "rng.hpp"
#include "util.hpp"

namespace rydssh {

struct error_model {
    double eta = 0.0;        // preparation defect probability per site
    double eps = 0.0;        // vacuum detected as particle
    double eps_prime = 0.0;  // particle detected as vacuum
    std::uint64_t seed = 0;

    void validate() const {
        for (double p : {eta, eps, eps_prime})
            if (p < 0.0 || p > 1.0) throw config_error("error_model: probabilities in [0, 1]");
    }
};

// bit set = site defective for this realization
inline std::uint32_t sample_defect_mask(int n_sites, double eta, rng::stream& st) {
    std::uint32_t mask = 0;
    for (int i = 0; i < n_sites; ++i)
        if (st.bernoulli(eta)) mask |= 1u << i;
    return mask;
}

// one uniform draw from a cumulative distribution (binary search)
inline std::uint64_t sample_index(const std::vector<double>& cdf, rng::stream& st) {
    const double u = st.next_unit();
    std::uint64_t lo = 0, hi = cdf.size() - 1;
    while (lo < hi) {
        const std::uint64_t mid = (lo + hi) / 2;
        if (cdf[mid] <= u)
            lo = mid + 1;
        else
            hi = mid;
    }
    return lo;
}

// detection noise, applied site by site in fixed order; defective sites hold
// no particle before the flip
inline std::uint32_t apply_detection_flips(std::uint32_t true_bits, int n_sites,
                                           const error_model& m, rng::stream& st) {
    std::uint32_t out = 0;
    for (int i = 0; i < n_sites; ++i) {
        const bool occupied = (true_bits >> i) & 1u;
        const double pflip = occupied ? m.eps_prime : m.eps;
        const bool flip = st.bernoulli(pflip);
        if (occupied != flip) out |= 1u << i;
    }
    return out;
}

struct shot_record {
    int realization = 0;
    int shot = 0;
    bool x_basis = false;
    std::uint32_t defect_mask = 0;
    std::uint32_t bits = 0;  // detected pattern over the full chain
};

// strongly coupled dimer pairs of an even chain whose bonds start weak:
// (1,2), (3,4), ... in 0-based indices
inline std::vector<std::pair<int, int>> strong_dimer_pairs(int n_sites) {
    std::vector<std::pair<int, int>> pairs;
    for (int k = 0; k <= n_sites / 2 - 2; ++k) pairs.emplace_back(2 * k + 1, 2 * k + 2);
    return pairs;
}

// dimer pairs entering the scalar correlator: the outermost dimer on each
// side is excluded
inline std::vector<std::pair<int, int>> interior_dimer_pairs(int n_sites) {
    std::vector<std::pair<int, int>> pairs;
    for (int k = 1; k < n_sites / 2 - 2; ++k) pairs.emplace_back(2 * k + 1, 2 * k + 2);
    return pairs;
}

// string estimator from one detected pattern: endpoints at 0-based sites 1
// and N-2, phase from the detected particle count on the interior
inline double string_estimate(std::uint32_t bits, int n_sites) {
    const int a = 1, b = n_sites - 2;
    const double za = (bits >> a & 1u) ? -1.0 : 1.0;
    const double zb = (bits >> b & 1u) ? -1.0 : 1.0;
    int zsum = 0;
    for (int k = a + 1; k < b; ++k) zsum += (bits >> k & 1u) ? -1 : 1;
    // Re(-i^zsum): nonzero only for even interior sums
    const int q = ((zsum % 4) + 4) % 4;
    const double phase = (q == 0) ? -1.0 : (q == 2 ? 1.0 : 0.0);
    return phase * za * zb;
}

struct noisy_sweep_config {
    Eigen::MatrixXd coupling;  // full-chain couplings; defects remove rows/columns
    sweep_schedule schedule;
    evolution_controls controls = sweep_controls();
    error_model model;
    int realizations = 1000;
    int shots_per_realization = 100;  // first half measured in Z, second half in X
};

struct correlator_estimates {
    double cz_dimer = 0.0, cx_dimer = 0.0;
    double z_string = 0.0, x_string = 0.0;
    double cz_sem = 0.0, cx_sem = 0.0, zs_sem = 0.0, xs_sem = 0.0;
    Eigen::VectorXd pn_detected;  // particle-number histogram over Z-basis shots
    int realizations = 0;
    int shots_per_realization = 0;
    int distinct_masks = 0;
};

namespace detail {

struct swept_state_cache {
    std::vector<int> survivors;
    std::vector<double> cdf_z, cdf_x;
};

inline std::vector<double> cumulative(const Eigen::VectorXcd& psi) {
    std::vector<double> cdf(psi.size());
    kahan_sum acc;
    for (Eigen::Index i = 0; i < psi.size(); ++i) {
        acc.add(std::norm(psi[i]));
        cdf[i] = acc.value();
    }
    const double total = cdf.back();
    if (total > 0)
        for (double& c : cdf) c /= total;
    cdf.back() = 1.0;
    return cdf;
}

inline swept_state_cache prepare_masked_state(const noisy_sweep_config& cfg, std::uint32_t mask) {
    swept_state_cache out;
    const int n = static_cast<int>(cfg.coupling.rows());
    for (int i = 0; i < n; ++i)
        if (!((mask >> i) & 1u)) out.survivors.push_back(i);
    const int ns = static_cast<int>(out.survivors.size());
    if (ns == 0) {
        out.cdf_z = {1.0};
        out.cdf_x = {1.0};
        return out;
    }
    hamiltonian_spec spec(ns);
    for (int a = 0; a < ns; ++a)
        for (int b = 0; b < ns; ++b)
            if (a != b) spec.hopping(a, b) = cfg.coupling(out.survivors[a], out.survivors[b]);
    const auto basis = make_full_basis(ns);
    const sweep_result swept = adiabatic_sweep(spec, basis, cfg.schedule, cfg.controls);
    out.cdf_z = cumulative(swept.final_state);
    out.cdf_x = cumulative(rotate_to_x_basis(swept.final_state, *basis));
    return out;
}

} // namespace detail

// full Monte Carlo estimate of the dimer and string correlators after a
// noisy preparation sweep; realization means are aggregated in fixed order
inline correlator_estimates
run_noisy_sweep(const noisy_sweep_config& cfg,
                const std::function<void(const shot_record&)>& record_sink = {}) {
    cfg.model.validate();
    cfg.schedule.validate();
    const int n = static_cast<int>(cfg.coupling.rows());
    if (n < 6 || n > 24) throw config_error("run_noisy_sweep: chain size out of range");
    if (cfg.realizations < 1) throw config_error("run_noisy_sweep: need realizations >= 1");
    if (cfg.shots_per_realization < 2 || cfg.shots_per_realization % 2 != 0)
        throw config_error("run_noisy_sweep: shots per realization must be even");

    const auto pairs = interior_dimer_pairs(n);
    if (pairs.empty()) throw config_error("run_noisy_sweep: no interior dimers at this size");

    std::unordered_map<std::uint32_t, detail::swept_state_cache> cache;
    const int shots = cfg.shots_per_realization;
    const int half = shots / 2;

    kahan_sum mz, mx, msz, msx;    // means of realization means
    kahan_sum vz, vx, vsz, vsx;    // sums of squared realization means
    Eigen::VectorXd pn = Eigen::VectorXd::Zero(n + 1);

    for (int r = 0; r < cfg.realizations; ++r) {
        rng::stream mask_stream(cfg.model.seed, static_cast<std::uint64_t>(r), 0);
        const std::uint32_t mask = sample_defect_mask(n, cfg.model.eta, mask_stream);
        auto it = cache.find(mask);
        if (it == cache.end())
            it = cache.emplace(mask, detail::prepare_masked_state(cfg, mask)).first;
        const detail::swept_state_cache& st = it->second;

        kahan_sum rz, rx, rsz, rsx;
        for (int s = 1; s <= shots; ++s) {
            rng::stream shot_stream(cfg.model.seed, static_cast<std::uint64_t>(r),
                                    static_cast<std::uint64_t>(s));
            const bool xb = s > half;
            const std::uint64_t idx =
                sample_index(xb ? st.cdf_x : st.cdf_z, shot_stream);
            std::uint32_t true_bits = 0;
            for (std::size_t k = 0; k < st.survivors.size(); ++k)
                if ((idx >> k) & 1u) true_bits |= 1u << st.survivors[k];
            const std::uint32_t bits =
                apply_detection_flips(true_bits, n, cfg.model, shot_stream);

            if (record_sink)
                record_sink({r, s, xb, mask, bits});

            double dimer = 0.0;
            for (const auto& [a, b] : pairs) {
                const double za = (bits >> a & 1u) ? -1.0 : 1.0;
                const double zb = (bits >> b & 1u) ? -1.0 : 1.0;
                dimer += za * zb;
            }
            dimer /= static_cast<double>(pairs.size());
            const double str = string_estimate(bits, n);
            if (xb) {
                rx.add(dimer);
                rsx.add(str);
            } else {
                rz.add(dimer);
                rsz.add(str);
                pn[popcount32(bits)] += 1.0;
            }
        }
        const double az = rz.value() / half, ax = rx.value() / half;
        const double asz = rsz.value() / half, asx = rsx.value() / half;
        mz.add(az);
        mx.add(ax);
        msz.add(asz);
        msx.add(asx);
        vz.add(az * az);
        vx.add(ax * ax);
        vsz.add(asz * asz);
        vsx.add(asx * asx);
    }

    const double rr = cfg.realizations;
    correlator_estimates out;
    out.cz_dimer = mz.value() / rr;
    out.cx_dimer = mx.value() / rr;
    out.z_string = msz.value() / rr;
    out.x_string = msx.value() / rr;
    auto sem = [rr](const kahan_sum& m, const kahan_sum& v) {
        if (rr < 2) return 0.0;
        const double mean = m.value() / rr;
        const double var = std::max(v.value() / rr - mean * mean, 0.0) * rr / (rr - 1);
        return std::sqrt(var / rr);
    };
    out.cz_sem = sem(mz, vz);
    out.cx_sem = sem(mx, vx);
    out.zs_sem = sem(msz, vsz);
    out.xs_sem = sem(msx, vsx);
    const double zshots = pn.sum();
    out.pn_detected = zshots > 0 ? Eigen::VectorXd(pn / zshots) : pn;
    out.realizations = cfg.realizations;
    out.shots_per_realization = shots;
    out.distinct_masks = static_cast<int>(cache.size());
    return out;
}

} // namespace rydssh
