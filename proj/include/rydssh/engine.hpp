#pragma once

// Numerical kernels: Lanczos extremal eigensolving with full
// reorthogonalization and deflation restarts, and Krylov-subspace time
// evolution with midpoint coefficient evaluation and residual-adapted
// substeps. Evolution phase convention: psi(t1) = T exp(-2 pi i \int H dt) psi(t0)
// with H in MHz and t in us.
//
// All kernels are single-threaded with a fixed reduction order, so identical
// inputs produce bit-identical outputs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "rng.hpp"
#include "util.hpp"

namespace rydssh {

struct evolution_controls {
    int krylov_dim = 30;
    double step_tol = 1e-8;
    double max_substep_us = 0.05;
    // schedule interpolation is piecewise linear (the only supported mode)

    void validate() const {
        if (krylov_dim < 2) throw std::invalid_argument("evolution_controls: krylov_dim >= 2");
        if (step_tol <= 0.0) throw std::invalid_argument("evolution_controls: step_tol > 0");
        if (max_substep_us <= 0.0)
            throw std::invalid_argument("evolution_controls: max_substep_us > 0");
    }
};

struct sweep_schedule {
    struct breakpoint {
        double t_us;
        double nu_rabi_mhz;
        double nu_delta_mhz;
    };
    std::vector<breakpoint> points;

    void validate() const {
        if (points.size() < 2) throw std::invalid_argument("sweep_schedule: need two breakpoints");
        for (std::size_t i = 0; i < points.size(); ++i) {
            if (i > 0 && !(points[i].t_us > points[i - 1].t_us))
                throw std::invalid_argument("sweep_schedule: times must be strictly increasing");
            if (points[i].nu_rabi_mhz < 0.0)
                throw std::invalid_argument("sweep_schedule: nu_rabi must be non-negative");
        }
    }

    double t_begin() const { return points.front().t_us; }
    double t_end() const { return points.back().t_us; }

    // piecewise-linear interpolation, clamped at the ends
    std::pair<double, double> at(double t) const {
        if (t <= points.front().t_us)
            return {points.front().nu_rabi_mhz, points.front().nu_delta_mhz};
        if (t >= points.back().t_us)
            return {points.back().nu_rabi_mhz, points.back().nu_delta_mhz};
        std::size_t k = 1;
        while (points[k].t_us < t) ++k;
        const auto& a = points[k - 1];
        const auto& b = points[k];
        const double f = (t - a.t_us) / (b.t_us - a.t_us);
        return {a.nu_rabi_mhz + f * (b.nu_rabi_mhz - a.nu_rabi_mhz),
                a.nu_delta_mhz + f * (b.nu_delta_mhz - a.nu_delta_mhz)};
    }

    sweep_schedule stretched(double factor) const {
        sweep_schedule s = *this;
        const double t0 = points.front().t_us;
        for (auto& p : s.points) p.t_us = t0 + (p.t_us - t0) * factor;
        return s;
    }
};

namespace detail {

inline Eigen::VectorXcd deterministic_start(std::uint64_t dim, std::uint64_t seed) {
    rng::stream st(seed);
    Eigen::VectorXcd v(dim);
    for (std::uint64_t i = 0; i < dim; ++i)
        v[i] = cplx(2.0 * st.next_unit() - 1.0, 2.0 * st.next_unit() - 1.0);
    v.normalize();
    return v;
}

// classical Gram-Schmidt against a set of vectors
inline void reorthogonalize(Eigen::VectorXcd& w, const std::vector<Eigen::VectorXcd>& vs,
                            int passes = 2) {
    for (int pass = 0; pass < passes; ++pass)
        for (const auto& v : vs) w -= v.dot(w) * v;
}

} // namespace detail

struct eigen_result {
    Eigen::VectorXd values;                 // ascending
    std::vector<Eigen::VectorXcd> vectors;  // phase-fixed: largest component positive real
    std::vector<std::vector<int>> degenerate_clusters;  // index groups with spread < 1e-9 MHz
};

struct lanczos_options {
    std::uint64_t seed = 0x5eed;
    double tol_rel = 1e-9;   // residual target, relative to the spectral scale
    int max_basis = 320;     // Krylov vectors per pass
    int max_passes = 8;      // deflation restarts (fresh start vectors)
};

// Lowest-k eigenpairs by Lanczos with full reorthogonalization.  A single
// Krylov space holds at most one vector per eigenspace, so after k pairs are
// locked additional passes probe the orthogonal complement and adopt any
// eigenvalue still below the current k-th level; exact degenerate copies are
// recovered this way.  A probe pass ends early once its lowest Ritz interval
// lies entirely above that cutoff.
template <class Op>
eigen_result lowest_eigenpairs(const Op& op, int k, const lanczos_options& opt = {}) {
    const std::uint64_t d = op.dim();
    if (k < 1 || static_cast<std::uint64_t>(k) > d)
        throw std::invalid_argument("lowest_eigenpairs: k out of range");

    std::vector<Eigen::VectorXcd> locked;
    std::vector<double> locked_vals;
    double scale = 0.0;

    // one Lanczos pass in the orthogonal complement of `locked`, targeting
    // the lowest `want` Ritz pairs; returns the converged pairs, ascending.
    // With a cutoff the pass aborts once the lowest Ritz interval clears it.
    auto run_pass = [&](std::uint64_t seed, int want, const double* cutoff) {
        std::vector<std::pair<double, Eigen::VectorXcd>> out;
        Eigen::VectorXcd v = detail::deterministic_start(d, seed);
        detail::reorthogonalize(v, locked);
        if (v.norm() < 1e-12) return out;  // complement exhausted from this start
        v.normalize();

        std::vector<Eigen::VectorXcd> vs{v};
        std::vector<double> alpha, beta;
        Eigen::VectorXcd w(d);
        const int m_max = static_cast<int>(std::min<std::uint64_t>(opt.max_basis, d - locked.size()));

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small;
        int m = 0;
        double b_exit = 0.0;
        while (m < m_max) {
            op.apply(vs[m].data(), w.data());
            if (m > 0) w -= beta[m - 1] * vs[m - 1];
            const double a = std::real(vs[m].dot(w));
            alpha.push_back(a);
            w -= a * vs[m];
            detail::reorthogonalize(w, locked);
            detail::reorthogonalize(w, vs);
            const double b = w.norm();
            ++m;
            b_exit = b;

            scale = std::max(scale, std::abs(a) + (m > 1 ? std::abs(beta.back()) : 0.0));
            const double breakdown_tol = 1e-14 * std::max(scale, 1.0);

            // convergence of the lowest `want` Ritz pairs: |beta_m * s_last| small
            const bool check_now =
                (b <= breakdown_tol) || m == m_max || (m >= want + 2 && m % 5 == 0);
            if (check_now) {
                Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
                for (int i = 0; i < m; ++i) {
                    t(i, i) = alpha[i];
                    if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
                }
                small.compute(t);
                scale = std::max({scale, std::abs(small.eigenvalues()(0)),
                                  std::abs(small.eigenvalues()(m - 1))});
                const double tol = opt.tol_rel * std::max(scale, 1e-6);
                if (cutoff && b > breakdown_tol) {
                    const double r1 = b * std::abs(small.eigenvectors()(m - 1, 0));
                    if (small.eigenvalues()(0) - r1 > *cutoff) return out;
                }
                bool all_ok = m >= want;
                for (int i = 0; i < std::min(want, m); ++i)
                    if (b * std::abs(small.eigenvectors()(m - 1, i)) > tol) all_ok = false;
                if (all_ok || b <= breakdown_tol) break;
            }

            if (b <= 1e-14 * std::max(scale, 1.0)) break;
            beta.push_back(b);
            vs.push_back(w / b);
        }

        // harvest converged Ritz pairs from this pass
        if (m == 0) return out;
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
        for (int i = 0; i < m; ++i) {
            t(i, i) = alpha[i];
            if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
        }
        small.compute(t);
        const double tol = opt.tol_rel * std::max(scale, 1e-6);
        for (int i = 0; i < m; ++i) {
            const double resid = std::abs(b_exit) * std::abs(small.eigenvectors()(m - 1, i));
            if (resid > tol) continue;
            Eigen::VectorXcd ritz = Eigen::VectorXcd::Zero(d);
            for (int q = 0; q < m; ++q) ritz += small.eigenvectors()(q, i) * vs[q];
            detail::reorthogonalize(ritz, locked);
            const double nrm = ritz.norm();
            if (nrm < 1e-8) continue;
            ritz /= nrm;
            out.emplace_back(small.eigenvalues()(i), std::move(ritz));
        }
        return out;  // ascending: harvested in tridiagonal eigenvalue order
    };

    int pass = 0;
    while (locked.size() < static_cast<std::size_t>(k) && pass < opt.max_passes) {
        auto got = run_pass(opt.seed + pass, k - static_cast<int>(locked.size()), nullptr);
        ++pass;
        for (auto& [val, vec] : got) {
            if (locked.size() >= static_cast<std::size_t>(k)) break;
            locked.push_back(std::move(vec));
            locked_vals.push_back(val);
        }
    }

    if (locked.size() < static_cast<std::size_t>(k))
        throw numerical_error("lowest_eigenpairs: Lanczos failed to converge after restarts");

    // probe the complement for eigenvalues below the current k-th level
    // (degenerate copies a single Krylov space cannot carry)
    while (pass < opt.max_passes && locked.size() < d) {
        std::vector<double> sorted_vals = locked_vals;
        std::nth_element(sorted_vals.begin(), sorted_vals.begin() + (k - 1), sorted_vals.end());
        const double cutoff = sorted_vals[k - 1] - opt.tol_rel * std::max(scale, 1e-6);
        auto got = run_pass(opt.seed + pass, 1, &cutoff);
        ++pass;
        bool adopted = false;
        for (auto& [val, vec] : got) {
            if (val >= cutoff) break;
            locked.push_back(std::move(vec));
            locked_vals.push_back(val);
            adopted = true;
        }
        if (!adopted) break;
    }

    // explicit residual verification on the returned pairs
    std::vector<int> order(locked.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return locked_vals[a] < locked_vals[b]; });

    eigen_result out;
    out.values.resize(k);
    out.vectors.reserve(k);
    Eigen::VectorXcd hv(d);
    for (int i = 0; i < k; ++i) {
        const int q = order[i];
        op.apply(locked[q].data(), hv.data());
        const double lam = std::real(locked[q].dot(hv));
        const double resid = (hv - lam * locked[q]).norm();
        if (resid > 10.0 * opt.tol_rel * std::max(scale, 1e-6) + 1e-11)
            throw numerical_error("lowest_eigenpairs: residual check failed");
        out.values(i) = lam;

        // gauge: rotate so the largest-magnitude component is positive real
        Eigen::VectorXcd vec = locked[q];
        int imax = 0;
        double amax = 0.0;
        for (std::uint64_t r = 0; r < d; ++r)
            if (std::abs(vec[r]) > amax) {
                amax = std::abs(vec[r]);
                imax = static_cast<int>(r);
            }
        if (amax > 0.0) vec *= std::conj(vec[imax]) / amax;
        out.vectors.push_back(std::move(vec));
    }

    // group quasi-exact degeneracies (spread < 1e-9 MHz)
    std::vector<int> cluster{0};
    for (int i = 1; i <= k; ++i) {
        if (i < k && out.values(i) - out.values(cluster.front()) < 1e-9) {
            cluster.push_back(i);
        } else {
            out.degenerate_clusters.push_back(cluster);
            if (i < k) cluster = {i};
        }
    }
    return out;
}

struct evolve_stats {
    int substeps = 0;
    int matvecs = 0;
    int rejected = 0;
};

// one Krylov substep: psi <- exp(-2 pi i dt H) psi (H frozen at the midpoint);
// returns the residual estimate (magnitude of the last subspace component)
template <class ApplyFn>
double krylov_substep(const ApplyFn& apply, Eigen::VectorXcd& psi, double dt,
                      const evolution_controls& ctl, evolve_stats* stats) {
    const std::uint64_t d = psi.size();
    const int m_cap = static_cast<int>(std::min<std::uint64_t>(ctl.krylov_dim, d));
    const double nrm0 = psi.norm();
    if (nrm0 == 0.0) return 0.0;

    std::vector<Eigen::VectorXcd> vs{psi / nrm0};
    std::vector<double> alpha, beta;
    Eigen::VectorXcd w(d);
    Eigen::VectorXcd u;
    double eta = 1.0;

    int m = 0;
    bool invariant = false;
    while (m < m_cap) {
        apply(vs[m].data(), w.data());
        if (stats) ++stats->matvecs;
        if (m > 0) w -= beta[m - 1] * vs[m - 1];
        const double a = std::real(vs[m].dot(w));
        alpha.push_back(a);
        w -= a * vs[m];
        detail::reorthogonalize(w, vs, 1);
        const double b = w.norm();
        ++m;

        // exact-subspace exit: the Krylov space is invariant, the small
        // exponential is exact regardless of dt
        if (b <= 1e-13 * std::max(1.0, std::abs(a))) {
            invariant = true;
            break;
        }

        if (m >= 3 || m == m_cap) {
            Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
            for (int i = 0; i < m; ++i) {
                t(i, i) = alpha[i];
                if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
            }
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
            Eigen::VectorXcd phases(m);
            for (int i = 0; i < m; ++i)
                phases(i) = std::polar(1.0, -two_pi * dt * es.eigenvalues()(i));
            u = es.eigenvectors().cast<cplx>() *
                (phases.array() * es.eigenvectors().row(0).transpose().cast<cplx>().array())
                    .matrix();
            eta = std::abs(u(m - 1));
            if (eta <= 0.1 * ctl.step_tol) break;
        }

        if (m == m_cap) break;
        beta.push_back(b);
        vs.push_back(w / b);
    }

    if (invariant) {
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
        for (int i = 0; i < m; ++i) {
            t(i, i) = alpha[i];
            if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
        Eigen::VectorXcd phases(m);
        for (int i = 0; i < m; ++i)
            phases(i) = std::polar(1.0, -two_pi * dt * es.eigenvalues()(i));
        u = es.eigenvectors().cast<cplx>() *
            (phases.array() * es.eigenvectors().row(0).transpose().cast<cplx>().array()).matrix();
        eta = 0.0;
    }

    if (eta <= ctl.step_tol) {
        psi.setZero();
        for (int q = 0; q < m; ++q) psi += (nrm0 * u(q)) * vs[q];
    }
    return eta;
}

// T-ordered evolution from t0 to t1; `apply_at(t, x, y)` evaluates H(t) x.
// Substeps use midpoint coefficients; the substep size bisects whenever the
// Krylov residual exceeds step_tol and grows again after easy steps.
// `on_sample` (optional) is invoked at every requested sample time with the
// current state; sample times must be sorted inside [t0, t1].
template <class OpAt>
evolve_stats evolve(const OpAt& op_at, Eigen::VectorXcd& psi, double t0, double t1,
                    const evolution_controls& ctl, const std::vector<double>& sample_times = {},
                    const std::function<void(double, const Eigen::VectorXcd&)>& on_sample = {},
                    bool sample_endpoints = false) {
    ctl.validate();
    if (!(t1 > t0)) throw std::invalid_argument("evolve: t1 must exceed t0");

    evolve_stats stats;
    double t = t0;
    double dt = ctl.max_substep_us;
    std::size_t next_sample = 0;
    auto emit = [&](double tt) {
        while (next_sample < sample_times.size() && sample_times[next_sample] <= tt + 1e-12) {
            if (on_sample) on_sample(sample_times[next_sample], psi);
            ++next_sample;
        }
    };
    if (sample_endpoints && on_sample) on_sample(t0, psi);
    emit(t0);

    while (t < t1 - 1e-12) {
        double step = std::min(dt, t1 - t);
        if (next_sample < sample_times.size())
            step = std::min(step, sample_times[next_sample] - t);
        if (step <= 0.0) step = std::min(dt, t1 - t);

        int halvings = 0;
        for (;;) {
            const double tm = t + 0.5 * step;
            Eigen::VectorXcd trial = psi;
            const double eta = krylov_substep(
                [&](const cplx* x, cplx* y) { op_at(tm, x, y); }, trial, step, ctl, &stats);
            if (eta <= ctl.step_tol) {
                psi.swap(trial);
                break;
            }
            ++stats.rejected;
            step *= 0.5;
            if (++halvings > 60 || step < 1e-9 * (t1 - t0))
                throw numerical_error("evolve: substep bisection floor reached without convergence");
        }
        t += step;
        ++stats.substeps;
        emit(t);

        // easy steps grow the proposal back toward the cap
        if (halvings == 0)
            dt = std::min(dt * 1.25, ctl.max_substep_us);
        else
            dt = step;
    }
    if (sample_endpoints && on_sample) on_sample(t1, psi);
    return stats;
}

// convenience adapters
template <class Op>
auto static_op(const Op& op) {
    return [&op](double, const cplx* x, cplx* y) { op.apply(x, y); };
}

template <class BosonOp>
auto scheduled_op(const BosonOp& op, const sweep_schedule& sched) {
    return [&op, &sched](double t, const cplx* x, cplx* y) {
        const auto [vr, vd] = sched.at(t);
        op.apply_with(x, y, vr, vd);
    };
}

} // namespace rydssh
