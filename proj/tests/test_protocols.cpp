#include <catch2/catch_amalgamated.hpp>

#include <rydssh/engine.hpp>
#include <rydssh/geometry.hpp>
#include <rydssh/mbcore.hpp>
#include <rydssh/observables.hpp>
#include <rydssh/protocols.hpp>
#include <rydssh/spmodel.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

using namespace rydssh;

namespace {

hamiltonian_spec chain_spec(int n, bool trivial = false) {
    magic_chain_config mc;
    mc.trivial_order = trivial;
    auto g = build_magic_chain(n, 2.42, -0.92, mc);
    hamiltonian_spec s(n);
    s.hopping = coupling_matrix(g.geometry);
    return s;
}

Eigen::VectorXcd vacuum_state(const fock_basis& basis) {
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(basis.dim());
    psi(basis.rank(0u)) = 1.0;
    return psi;
}

Eigen::VectorXcd random_state(std::uint64_t dim, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXcd v(dim);
    for (std::uint64_t i = 0; i < dim; ++i) v[i] = cplx(u(gen), u(gen));
    return v.normalized();
}

}  // namespace

TEST_CASE("schedule_validation_and_interpolation", "[protocols]") {
    REQUIRE_THROWS_AS(three_leg_schedule(0.0, 1.0, 1.0, 2.0, -4.0, 1.0), config_error);
    REQUIRE_THROWS_AS(canonical_sweep_schedule(12), config_error);

    auto s = three_leg_schedule(0.5, 2.0, 1.35, 2.0, -4.0, 1.0);
    REQUIRE_NOTHROW(s.validate());
    REQUIRE(s.t_begin() == 0.0);
    REQUIRE(std::abs(s.t_end() - 3.85) < 1e-12);
    // halfway up the first leg the drive is half on and the detuning untouched
    auto [rabi, delta] = s.at(0.25);
    REQUIRE(std::abs(rabi - 1.0) < 1e-12);
    REQUIRE(std::abs(delta + 4.0) < 1e-12);

    auto d = s.stretched(2.0);
    REQUIRE(std::abs(d.t_end() - 7.7) < 1e-12);
    auto [r2, d2] = d.at(0.5);
    REQUIRE(std::abs(r2 - 1.0) < 1e-12);
    REQUIRE(std::abs(d2 + 4.0) < 1e-12);

    sweep_schedule bad;
    bad.points = {{0.0, 1.0, 0.0}, {0.0, 1.0, 0.0}};
    REQUIRE_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("sweep_prepares_half_filled_ground_state", "[protocols]") {
    const int n = 10;
    auto spec = chain_spec(n);
    auto full = make_full_basis(n);
    auto sched = canonical_sweep_schedule(n);

    hamiltonian_spec end = spec;
    end.detuning_mhz = 1.0;  // schedule endpoint
    auto sector = make_sector_basis(n, n / 2);
    auto gs = lowest_eigenpairs(boson_operator(end, sector), 1);
    Eigen::VectorXcd target = Eigen::VectorXcd::Zero(full->dim());
    for (std::uint64_t r = 0; r < sector->dim(); ++r)
        target(full->rank(sector->unrank(r))) = gs.vectors[0](r);

    auto res = adiabatic_sweep(spec, full, sched, sweep_controls());
    const double overlap = overlap_probability(target, res.final_state);
    REQUIRE(std::abs(overlap - 0.964561) < 1e-4);

    // doubling every leg moves the preparation closer to adiabatic
    auto slow = adiabatic_sweep(spec, full, sched.stretched(2.0), sweep_controls());
    const double better = overlap_probability(target, slow.final_state);
    REQUIRE(better > overlap);
    REQUIRE(better > 0.985);
}

TEST_CASE("sweep_without_drive_stays_in_vacuum", "[protocols]") {
    const int n = 10;
    auto spec = chain_spec(n);
    auto full = make_full_basis(n);
    auto off = canonical_sweep_schedule(n);
    for (auto& p : off.points) p.nu_rabi_mhz = 0.0;
    auto res = adiabatic_sweep(spec, full, off, sweep_controls());
    REQUIRE(std::abs(std::norm(res.final_state(full->rank(0u))) - 1.0) < 1e-9);
}

TEST_CASE("sweep_samples_particle_number_trajectory", "[protocols]") {
    const int n = 10;
    auto spec = chain_spec(n);
    auto full = make_full_basis(n);
    auto res = adiabatic_sweep(spec, full, canonical_sweep_schedule(n), sweep_controls(), 8);
    REQUIRE(res.times.size() == 8);
    REQUIRE(res.pn_trajectory.rows() == 8);
    REQUIRE(res.pn_trajectory.cols() == n + 1);
    for (int r = 0; r < 8; ++r) REQUIRE(std::abs(res.pn_trajectory.row(r).sum() - 1.0) < 1e-9);
    // the sweep starts in vacuum and ends near half filling
    REQUIRE(res.pn_trajectory(0, 0) > 0.9);
    REQUIRE(res.pn_trajectory(7, n / 2) > 0.9);
}

TEST_CASE("spectroscopy_resolves_mid_gap_edge_response", "[protocols]") {
    auto full = make_full_basis(6);
    spectroscopy_config sc;
    sc.probe_rabi_mhz = 0.2;
    sc.duration_us = 0.75;
    for (int q = 0; q <= 80; ++q) sc.detunings_mhz.push_back(-4.0 + 0.1 * q);

    auto topo = spectroscopy_scan(chain_spec(6), vacuum_state(*full), sc);
    auto triv = spectroscopy_scan(chain_spec(6, true), vacuum_state(*full), sc);

    auto at_zero = [](const spectroscopy_result& r) {
        for (const auto& p : r.points)
            if (std::abs(p.detuning_mhz) < 1e-9) return p.occupancy(0);
        return -1.0;
    };
    REQUIRE(at_zero(topo) > 0.25);
    REQUIRE(at_zero(triv) < 0.05);

    // every pronounced response peak sits at a single-particle energy
    auto sp = single_particle_spectrum(chain_spec(6).hopping);
    double best = 0.0;
    for (const auto& p : topo.points) best = std::max(best, p.total);
    for (std::size_t q = 1; q + 1 < topo.points.size(); ++q) {
        const double t = topo.points[q].total;
        if (t > topo.points[q - 1].total && t > topo.points[q + 1].total && t > 0.25 * best) {
            double dist = 1e9;
            for (int k = 0; k < 6; ++k)
                dist = std::min(dist, std::abs(topo.points[q].detuning_mhz - sp.values(k)));
            REQUIRE(dist < 0.25);
        }
    }
}

TEST_CASE("spectroscopy_rejects_nonpositive_probe", "[protocols]") {
    auto full = make_full_basis(6);
    spectroscopy_config sc;
    sc.probe_rabi_mhz = 0.0;
    sc.detunings_mhz = {0.0};
    REQUIRE_THROWS_AS(spectroscopy_scan(chain_spec(6), vacuum_state(*full), sc), config_error);
}

TEST_CASE("transfer_oscillates_at_edge_splitting", "[protocols]") {
    for (int n : {4, 6}) {
        auto spec = chain_spec(n);
        transfer_config tc;
        tc.t_max_us = 250.0;
        tc.n_samples = 1024;
        auto res = transfer_dynamics(spec, tc);
        const double ehyb = edge_modes(spec.hopping).e_hyb;
        REQUIRE(std::abs(res.dominant_freq_mhz - ehyb) < 0.01 * ehyb);
        REQUIRE(*std::max_element(res.right.begin(), res.right.end()) > 0.9);
        REQUIRE(*std::max_element(res.bulk.begin(), res.bulk.end()) > 0.01);
    }
}

TEST_CASE("transfer_blocked_without_weak_links", "[protocols]") {
    Eigen::MatrixXd jm = Eigen::MatrixXd::Zero(6, 6);
    for (int i = 1; i + 1 < 6; i += 2) jm(i, i + 1) = jm(i + 1, i) = 2.42;
    hamiltonian_spec spec(6);
    spec.hopping = jm;
    transfer_config tc;
    tc.t_max_us = 5.0;
    tc.n_samples = 64;
    auto res = transfer_dynamics(spec, tc);
    REQUIRE(*std::min_element(res.left.begin(), res.left.end()) > 1.0 - 1e-9);
}

TEST_CASE("dominant_frequency_recovers_pure_tone", "[protocols]") {
    std::vector<double> t, y;
    const double f = 0.137;
    for (int k = 0; k < 512; ++k) {
        t.push_back(0.5 * k);
        y.push_back(0.3 + 0.7 * std::cos(2 * std::numbers::pi * f * 0.5 * k + 0.4));
    }
    REQUIRE(std::abs(dominant_frequency(t, y) - f) < 0.002);
}

TEST_CASE("ideal_rotations_complement_and_exchange_axes", "[protocols]") {
    auto basis = make_full_basis(6);
    auto psi = random_state(64, 51);

    auto flipped = rotation_pulse_ideal(psi, *basis, std::numbers::pi);
    auto n0 = occupancies(psi, *basis);
    auto n1 = occupancies(flipped, *basis);
    REQUIRE((n0 + n1 - Eigen::VectorXd::Ones(6)).cwiseAbs().maxCoeff() < 1e-12);

    // a half rotation maps the z readout onto x
    auto half = rotation_pulse_ideal(psi, *basis, std::numbers::pi / 2);
    for (int i = 0; i < 6; ++i)
        REQUIRE(std::abs(mean_z(half, *basis, i) - mean_x(psi, *basis, i)) < 1e-12);
}

TEST_CASE("finite_pulse_matches_ideal_when_couplings_idle", "[protocols]") {
    auto basis = make_full_basis(6);
    auto psi = random_state(64, 52);
    auto ideal = rotation_pulse_ideal(psi, *basis, std::numbers::pi / 2);

    hamiltonian_spec bare(6);
    auto fast = rotation_pulse(psi, bare, basis, 14.0, 1.0 / 56.0);
    REQUIRE((fast - ideal).norm() < 1e-12);

    // live couplings act during the pulse and pull the state away
    auto spec = chain_spec(6);
    auto dressed = rotation_pulse(psi, spec, basis, 14.0, 1.0 / 56.0);
    REQUIRE((dressed - ideal).norm() > 0.01);
}

TEST_CASE("phase_map_zero_drive_row_is_integer_staircase", "[protocols]") {
    auto spec = chain_spec(6);
    phase_map_config pc;
    pc.rabi_grid_mhz = {0.0, 1.0};
    pc.delta_grid_mhz = {-3.0, -0.4, 0.4, 3.0};
    auto pm = phase_map(spec, pc);
    REQUIRE(pm.n_particles.rows() == 2);
    REQUIRE(pm.n_particles.cols() == 4);
    double prev = -1.0;
    for (int c = 0; c < 4; ++c) {
        const double nv = pm.n_particles(0, c);
        REQUIRE(std::abs(nv - std::round(nv)) < 1e-8);
        REQUIRE(nv >= prev);
        prev = nv;
    }
    // particle-hole symmetry pairs the detuning mirror columns
    REQUIRE(std::abs(pm.n_particles(0, 0) + pm.n_particles(0, 3) - 6.0) < 1e-8);
    REQUIRE(std::abs(pm.n_particles(0, 1) + pm.n_particles(0, 2) - 6.0) < 1e-8);
    REQUIRE(pm.gap_mhz.minCoeff() > 0.0);
}

TEST_CASE("haldane_path_scans_both_ramps", "[protocols]") {
    auto r = haldane_path(haldane_ramp::delta_ramp, {-0.5, 0.0, 0.5}, 4, 3);
    REQUIRE(r.parameter == std::vector<double>{-0.5, 0.0, 0.5});
    REQUIRE(r.energies.rows() == 3);
    REQUIRE(r.energies.cols() == 3);
    for (int row = 0; row < 3; ++row)
        for (int c = 1; c < 3; ++c) REQUIRE(r.energies(row, c) >= r.energies(row, c - 1) - 1e-12);

    auto k = haldane_path(haldane_ramp::k_ramp, {0.2, 1.0}, 4, 3);
    REQUIRE(k.energies.rows() == 2);

    REQUIRE_THROWS_AS(haldane_path(haldane_ramp::delta_ramp, {}, 4, 3), config_error);
    REQUIRE_THROWS_AS(haldane_path(haldane_ramp::delta_ramp, {0.0}, 12, 3), resource_error);
}
