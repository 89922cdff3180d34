#pragma once

// Experiment-level protocols built on the evolution engine: microwave
// spectroscopy scans, adiabatic state-preparation sweeps, single-excitation
// transfer dynamics, global basis-rotation pulses, drive/detuning phase maps,
// and the alternating-exchange chain spectral flow.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "engine.hpp"
#include "mbcore.hpp"
#include "observables.hpp"
#include "util.hpp"

namespace rydssh {

namespace detail {

template <class Fn>
void parallel_for(int n, int threads, const Fn& fn) {
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::future<void>> futs;
    const int workers = std::min(threads, n);
    futs.reserve(workers);
    for (int t = 0; t < workers; ++t)
        futs.push_back(std::async(std::launch::async, [&]() {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        }));
    for (auto& f : futs) f.get();
}

} // namespace detail

// ---------------------------------------------------------------------------
// sweep schedules

// three legs: drive ramps up at the initial detuning, the detuning ramps
// across the transition at constant drive, the drive ramps back down
inline sweep_schedule three_leg_schedule(double t1_us, double t2_us, double t3_us,
                                         double rabi_mhz, double delta_start_mhz,
                                         double delta_end_mhz) {
    if (!(t1_us > 0) || !(t2_us > 0) || !(t3_us > 0))
        throw config_error("three_leg_schedule: leg durations must be positive");
    sweep_schedule s;
    s.points = {{0.0, 0.0, delta_start_mhz},
                {t1_us, rabi_mhz, delta_start_mhz},
                {t1_us + t2_us, rabi_mhz, delta_end_mhz},
                {t1_us + t2_us + t3_us, 0.0, delta_end_mhz}};
    return s;
}

// leg durations tuned per chain length for high-fidelity preparation of the
// half-filled ground state at drive 2 MHz, detuning -4 -> +1 MHz
inline sweep_schedule canonical_sweep_schedule(int n_sites) {
    if (n_sites == 10) return three_leg_schedule(0.5, 2.0, 1.35, 2.0, -4.0, 1.0);
    if (n_sites == 14) return three_leg_schedule(0.75, 3.4, 2.2, 2.0, -4.0, 1.0);
    throw config_error("canonical_sweep_schedule: no preset for this size; supply a schedule");
}

inline evolution_controls sweep_controls() {
    evolution_controls ctl;
    ctl.max_substep_us = 0.005;  // resolves the drive/detuning ramps
    return ctl;
}

// ---------------------------------------------------------------------------
// adiabatic sweep

struct sweep_result {
    Eigen::VectorXcd final_state;
    std::vector<double> times;
    Eigen::MatrixXd pn_trajectory;          // row per sample, column per particle number
    std::vector<double> overlap_trajectory; // empty unless a target was given
    evolve_stats stats;
};

inline sweep_result adiabatic_sweep(const hamiltonian_spec& spec,
                                    const std::shared_ptr<const fock_basis>& basis,
                                    const sweep_schedule& schedule,
                                    const evolution_controls& controls = sweep_controls(),
                                    int n_samples = 0,
                                    const Eigen::VectorXcd* target = nullptr) {
    schedule.validate();
    if (basis->sector())
        throw std::invalid_argument("adiabatic_sweep: the drive needs the full basis");
    hamiltonian_spec s = spec;
    s.drive_mhz = 0.0;
    s.detuning_mhz = 0.0;  // the schedule supplies both
    const boson_operator op(s, basis);

    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(basis->dim());
    psi[basis->rank(0)] = 1.0;  // vacuum

    std::vector<double> sample_times;
    if (n_samples > 1) {
        sample_times.reserve(n_samples);
        for (int i = 0; i < n_samples; ++i)
            sample_times.push_back(schedule.t_begin() +
                                   (schedule.t_end() - schedule.t_begin()) * i / (n_samples - 1));
        sample_times.back() = schedule.t_end();
    }

    sweep_result out;
    out.pn_trajectory.resize(static_cast<int>(sample_times.size()), basis->n_sites() + 1);
    auto on_sample = [&](double t, const Eigen::VectorXcd& state) {
        out.times.push_back(t);
        const int row = static_cast<int>(out.times.size()) - 1;
        out.pn_trajectory.row(row) = number_distribution(state, *basis).transpose();
        if (target) out.overlap_trajectory.push_back(overlap_probability(*target, state));
    };

    out.stats = evolve(scheduled_op(op, schedule), psi, schedule.t_begin(), schedule.t_end(),
                       controls, sample_times,
                       sample_times.empty()
                           ? std::function<void(double, const Eigen::VectorXcd&)>{}
                           : std::function<void(double, const Eigen::VectorXcd&)>(on_sample));
    out.final_state = std::move(psi);
    return out;
}

// ---------------------------------------------------------------------------
// microwave spectroscopy

struct spectroscopy_config {
    double probe_rabi_mhz = 0.05;
    double duration_us = 10.0;
    std::vector<double> detunings_mhz;
    evolution_controls controls;
    int threads = 1;
};

struct spectroscopy_point {
    double detuning_mhz = 0.0;
    Eigen::VectorXd occupancy;               // per site, after the probe pulse
    double total = 0.0;                      // summed occupancy
    Eigen::VectorXd single_particle_profile; // site profile within the <=1-particle subspace
};

struct spectroscopy_result {
    std::vector<spectroscopy_point> points;
};

// weak probe drive at each listed detuning, evolved from `initial` for the
// pulse duration; the detuning grid value replaces the spec detuning
inline spectroscopy_result spectroscopy_scan(const hamiltonian_spec& spec,
                                             const Eigen::VectorXcd& initial,
                                             const spectroscopy_config& cfg) {
    if (cfg.detunings_mhz.empty()) throw config_error("spectroscopy_scan: empty detuning grid");
    if (!(cfg.probe_rabi_mhz > 0)) throw config_error("spectroscopy_scan: probe must be positive");
    if (!(cfg.duration_us > 0)) throw config_error("spectroscopy_scan: duration must be positive");
    const auto basis = make_full_basis(spec.n_sites);
    if (initial.size() != static_cast<Eigen::Index>(basis->dim()))
        throw std::invalid_argument("spectroscopy_scan: initial state has the wrong dimension");

    hamiltonian_spec s = spec;
    s.drive_mhz = 0.0;
    s.detuning_mhz = 0.0;
    const boson_operator op(s, basis);

    spectroscopy_result out;
    out.points.resize(cfg.detunings_mhz.size());
    detail::parallel_for(static_cast<int>(cfg.detunings_mhz.size()), cfg.threads, [&](int k) {
        const double delta = cfg.detunings_mhz[k];
        Eigen::VectorXcd psi = initial;
        evolve([&](double, const cplx* x, cplx* y) { op.apply_with(x, y, cfg.probe_rabi_mhz, delta); },
               psi, 0.0, cfg.duration_us, cfg.controls);
        spectroscopy_point pt;
        pt.detuning_mhz = delta;
        pt.occupancy = occupancies(psi, *basis);
        pt.total = pt.occupancy.sum();

        // restrict to records with at most one particle
        const int n = spec.n_sites;
        pt.single_particle_profile = Eigen::VectorXd::Zero(n);
        double norm = std::norm(psi[basis->rank(0)]);
        for (int i = 0; i < n; ++i) {
            const double p = std::norm(psi[basis->rank(1u << i)]);
            pt.single_particle_profile[i] = p;
            norm += p;
        }
        if (norm > 0) pt.single_particle_profile /= norm;
        out.points[k] = std::move(pt);
    });
    return out;
}

// ---------------------------------------------------------------------------
// single-excitation transfer

struct transfer_config {
    int start_site = 0;
    double t_max_us = 250.0;
    int n_samples = 1024;
    evolution_controls controls;
};

struct transfer_result {
    std::vector<double> times;
    std::vector<double> left, right, bulk;
    Eigen::MatrixXd site_occupancy;  // sample rows, site columns
    double dominant_freq_mhz = std::numeric_limits<double>::quiet_NaN();
};

// dominant oscillation frequency of a uniformly sampled series: mean removal,
// Hann window, discrete Fourier transform, parabolic refinement of the peak
inline double dominant_frequency(const std::vector<double>& times,
                                 const std::vector<double>& series) {
    const int s = static_cast<int>(series.size());
    if (s < 8 || times.size() != series.size())
        throw std::invalid_argument("dominant_frequency: need at least 8 uniform samples");
    const double dt = times[1] - times[0];
    double mean = 0.0;
    for (double v : series) mean += v;
    mean /= s;

    std::vector<double> win(s);
    for (int j = 0; j < s; ++j)
        win[j] = (series[j] - mean) * 0.5 * (1.0 - std::cos(two_pi * j / (s - 1)));

    const int kmax = s / 2;
    std::vector<double> mag(kmax + 1, 0.0);
    double best = 0.0;
    int kbest = 1;
    for (int k = 1; k <= kmax; ++k) {
        cplx acc = 0.0;
        for (int j = 0; j < s; ++j) acc += win[j] * std::polar(1.0, -two_pi * double(k) * j / s);
        mag[k] = std::abs(acc);
        if (mag[k] > best) {
            best = mag[k];
            kbest = k;
        }
    }
    if (best == 0.0) return 0.0;
    double kq = kbest;
    if (kbest > 1 && kbest < kmax && mag[kbest - 1] > 0 && mag[kbest + 1] > 0) {
        const double la = std::log(mag[kbest - 1]), lb = std::log(mag[kbest]),
                     lc = std::log(mag[kbest + 1]);
        const double denom = la - 2 * lb + lc;
        if (denom < 0) kq += 0.5 * (la - lc) / denom;
    }
    return kq / (s * dt);
}

inline transfer_result transfer_dynamics(const hamiltonian_spec& spec,
                                         const transfer_config& cfg) {
    if (cfg.start_site < 0 || cfg.start_site >= spec.n_sites)
        throw config_error("transfer_dynamics: start site out of range");
    if (cfg.n_samples < 8) throw config_error("transfer_dynamics: need at least 8 samples");
    if (spec.drive_mhz != 0.0)
        throw std::invalid_argument("transfer_dynamics: drive breaks particle number");
    const auto basis = make_sector_basis(spec.n_sites, 1);
    const boson_operator op(spec, basis);

    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(basis->dim());
    psi[basis->rank(1u << cfg.start_site)] = 1.0;

    std::vector<double> sample_times(cfg.n_samples);
    for (int i = 0; i < cfg.n_samples; ++i)
        sample_times[i] = cfg.t_max_us * i / (cfg.n_samples - 1);
    sample_times.back() = cfg.t_max_us;

    transfer_result out;
    const int n = spec.n_sites;
    out.site_occupancy.resize(cfg.n_samples, n);
    auto on_sample = [&](double t, const Eigen::VectorXcd& state) {
        const Eigen::VectorXd occ = occupancies(state, *basis);
        const int row = static_cast<int>(out.times.size());
        out.times.push_back(t);
        out.site_occupancy.row(row) = occ.transpose();
        out.left.push_back(occ[0]);
        out.right.push_back(occ[n - 1]);
        out.bulk.push_back((occ.sum() - occ[0] - occ[n - 1]) / std::max(n - 2, 1));
    };
    evolve(static_op(op), psi, 0.0, cfg.t_max_us, cfg.controls, sample_times,
           std::function<void(double, const Eigen::VectorXcd&)>(on_sample));
    out.dominant_freq_mhz = dominant_frequency(out.times, out.right);
    return out;
}

// ---------------------------------------------------------------------------
// global rotation pulses

// exact per-site rotation exp(+i (area/2) sigma^y); area pi/2 maps the Z
// basis onto the X basis, area pi complements every occupancy
inline Eigen::VectorXcd rotation_pulse_ideal(const Eigen::VectorXcd& psi, const fock_basis& basis,
                                             double area_rad) {
    if (basis.sector())
        throw std::invalid_argument("rotation_pulse_ideal: full basis required");
    Eigen::VectorXcd out = psi;
    const int n = basis.n_sites();
    const std::uint64_t dim = basis.dim();
    const double c = std::cos(area_rad / 2.0), s = std::sin(area_rad / 2.0);
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

// resonant pulse under the full Hamiltonian: the spec terms stay on, the
// drive acts along the rotated axis, -(rabi/2) sum_k Y_k, detuning zero
inline Eigen::VectorXcd rotation_pulse(const Eigen::VectorXcd& psi,
                                       const hamiltonian_spec& spec,
                                       const std::shared_ptr<const fock_basis>& basis,
                                       double pulse_rabi_mhz, double tau_us,
                                       const evolution_controls& controls = {}) {
    if (basis->sector())
        throw std::invalid_argument("rotation_pulse: full basis required");
    hamiltonian_spec s = spec;
    s.drive_mhz = 0.0;
    s.detuning_mhz = 0.0;
    const boson_operator op(s, basis);
    const int n = basis->n_sites();
    const std::uint64_t dim = basis->dim();
    const cplx up(0.0, 0.5 * pulse_rabi_mhz);    // <0|H|1> of -(rabi/2) Y
    const cplx down(0.0, -0.5 * pulse_rabi_mhz); // <1|H|0>
    auto apply = [&](double, const cplx* x, cplx* y) {
        op.apply(x, y);
        for (std::uint64_t r = 0; r < dim; ++r) {
            cplx acc = 0.0;
            for (int k = 0; k < n; ++k) {
                const std::uint64_t bit = std::uint64_t(1) << k;
                acc += ((r & bit) ? down : up) * x[r ^ bit];
            }
            y[r] += acc;
        }
    };
    Eigen::VectorXcd out = psi;
    evolve(apply, out, 0.0, tau_us, controls);
    return out;
}

// ---------------------------------------------------------------------------
// drive/detuning phase map

struct phase_map_config {
    std::vector<double> rabi_grid_mhz;
    std::vector<double> delta_grid_mhz;
    lanczos_options eig;
    int threads = 1;
};

struct phase_map_result {
    std::vector<double> rabi_grid_mhz, delta_grid_mhz;
    Eigen::MatrixXd n_particles;  // rabi rows, delta columns
    Eigen::MatrixXd gap_mhz;
};

// ground-state particle number and excitation gap over a drive/detuning
// grid; at zero drive particle number is conserved and the ground state is
// found by minimizing over sectors, otherwise the full basis is used
inline phase_map_result phase_map(const hamiltonian_spec& spec, const phase_map_config& cfg) {
    if (cfg.rabi_grid_mhz.empty() || cfg.delta_grid_mhz.empty())
        throw config_error("phase_map: empty grid");
    const int nr = static_cast<int>(cfg.rabi_grid_mhz.size());
    const int nd = static_cast<int>(cfg.delta_grid_mhz.size());
    const int n = spec.n_sites;

    phase_map_result out;
    out.rabi_grid_mhz = cfg.rabi_grid_mhz;
    out.delta_grid_mhz = cfg.delta_grid_mhz;
    out.n_particles.resize(nr, nd);
    out.gap_mhz.resize(nr, nd);

    const auto full = make_full_basis(n);
    std::vector<std::shared_ptr<const fock_basis>> sectors;
    sectors.reserve(n + 1);
    for (int k = 0; k <= n; ++k) sectors.push_back(make_sector_basis(n, k));

    detail::parallel_for(nr * nd, cfg.threads, [&](int cell) {
        const int ir = cell / nd, id = cell % nd;
        hamiltonian_spec s = spec;
        s.drive_mhz = cfg.rabi_grid_mhz[ir];
        s.detuning_mhz = cfg.delta_grid_mhz[id];

        if (s.drive_mhz == 0.0) {
            double best_e = std::numeric_limits<double>::infinity();
            double second_e = std::numeric_limits<double>::infinity();
            int best_n = 0;
            for (int k = 0; k <= n; ++k) {
                const boson_operator op(s, sectors[k]);
                const int want = static_cast<int>(std::min<std::uint64_t>(2, op.dim()));
                const eigen_result er = lowest_eigenpairs(op, want, cfg.eig);
                for (int q = 0; q < want; ++q) {
                    const double e = er.values[q];
                    if (e < best_e) {
                        second_e = best_e;
                        best_e = e;
                        best_n = k;
                    } else if (e < second_e) {
                        second_e = e;
                    }
                }
            }
            out.n_particles(ir, id) = best_n;
            out.gap_mhz(ir, id) = second_e - best_e;
        } else {
            const boson_operator op(s, full);
            const eigen_result er = lowest_eigenpairs(op, 2, cfg.eig);
            const auto& pops = op.popcounts();
            kahan_sum acc;
            for (std::uint64_t r = 0; r < op.dim(); ++r)
                acc.add(std::norm(er.vectors[0][r]) * pops[r]);
            out.n_particles(ir, id) = acc.value();
            out.gap_mhz(ir, id) = er.values[1] - er.values[0];
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// alternating-exchange chain spectral flow

enum class haldane_ramp { delta_ramp, k_ramp };

struct haldane_result {
    std::vector<double> parameter;
    Eigen::MatrixXd energies;  // row per grid point, lowest k levels merged
                               // from the half-filling and adjacent sectors
};

// delta_ramp: couplings J = -1, J' = 0.25 with the anisotropy swept 0 -> 1;
// k_ramp: anisotropy 1 with J' = K, J = K - 1 swept K: 0 -> 1.  Both paths
// connect a trivial product limit to the dimerized topological point.
inline haldane_result haldane_path(haldane_ramp ramp, const std::vector<double>& grid,
                                   int n_cells, int k_levels = 5,
                                   const lanczos_options& lopt = {}) {
    if (grid.empty()) throw config_error("haldane_path: empty parameter grid");
    if (n_cells < 2) throw config_error("haldane_path: need at least 2 cells");
    const int n_sites = 2 * n_cells;
    if (n_sites > 20)
        throw resource_error("haldane_path: more than 10 cells exceeds the dense-sector budget");

    haldane_result out;
    out.parameter = grid;
    out.energies.resize(static_cast<int>(grid.size()), k_levels);

    for (std::size_t g = 0; g < grid.size(); ++g) {
        const double p = grid[g];
        hamiltonian_spec spec =
            (ramp == haldane_ramp::delta_ramp)
                ? build_xxz_hamiltonian(-1.0, 0.25, p, n_sites)
                : build_xxz_hamiltonian(p - 1.0, p, 1.0, n_sites);
        std::vector<double> merged;
        for (int sector = n_cells - 1; sector <= n_cells + 1; ++sector) {
            const auto basis = make_sector_basis(n_sites, sector);
            const boson_operator op(spec, basis);
            const int want = static_cast<int>(
                std::min<std::uint64_t>(static_cast<std::uint64_t>(k_levels), op.dim()));
            const eigen_result er = lowest_eigenpairs(op, want, lopt);
            for (int q = 0; q < want; ++q) merged.push_back(er.values[q]);
        }
        std::sort(merged.begin(), merged.end());
        if (static_cast<int>(merged.size()) < k_levels)
            throw numerical_error("haldane_path: not enough levels");
        for (int q = 0; q < k_levels; ++q) out.energies(static_cast<int>(g), q) = merged[q];
    }
    return out;
}

} // namespace rydssh
