#include <catch2/catch_amalgamated.hpp>

#include <rydssh/engine.hpp>
#include <rydssh/mbcore.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>

using namespace rydssh;

namespace {

Eigen::VectorXcd random_state(std::uint64_t dim, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXcd v(dim);
    for (std::uint64_t i = 0; i < dim; ++i) v[i] = cplx(u(gen), u(gen));
    return v.normalized();
}

template <class Op>
Eigen::MatrixXcd dense_of(const Op& op) {
    const std::uint64_t d = op.dim();
    Eigen::MatrixXcd m(d, d);
    Eigen::VectorXcd x = Eigen::VectorXcd::Zero(d), y(d);
    for (std::uint64_t c = 0; c < d; ++c) {
        x[c] = 1.0;
        op.apply(x.data(), y.data());
        m.col(c) = y;
        x[c] = 0.0;
    }
    return m;
}

Eigen::MatrixXd nn_chain(int n, double jw, double js) {
    Eigen::MatrixXd jm = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) {
        const double j = (i % 2 == 0) ? jw : js;
        jm(i, i + 1) = jm(i + 1, i) = j;
    }
    return jm;
}

template <class Op>
auto frozen(const Op& op) {
    return [&op](double, const cplx* x, cplx* y) { op.apply(x, y); };
}

}  // namespace

TEST_CASE("zero_hamiltonian_evolution_is_identity", "[engine]") {
    hamiltonian_spec spec(4);
    boson_operator op(spec, make_full_basis(4));
    auto psi0 = random_state(16, 3);
    Eigen::VectorXcd psi = psi0;
    evolve(frozen(op), psi, 0.0, 3.0, evolution_controls{});
    REQUIRE((psi - psi0).norm() < 1e-14);
}

TEST_CASE("single_site_rabi_oscillation", "[engine]") {
    const double nu = 0.8, t = 0.37;
    hamiltonian_spec spec(1);
    spec.drive_mhz = nu;
    auto basis = make_full_basis(1);
    boson_operator op(spec, basis);
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(2);
    psi(basis->rank(0u)) = 1.0;
    evolve(frozen(op), psi, 0.0, t, evolution_controls{});
    const double p1 = std::norm(psi(basis->rank(1u)));
    const double expect = std::pow(std::sin(std::numbers::pi * nu * t), 2);
    REQUIRE(std::abs(p1 - expect) < 1e-8);
}

TEST_CASE("dimer_hopping_oscillation", "[engine]") {
    const double j = 0.9, t = 0.37;
    hamiltonian_spec spec(2);
    spec.hopping(0, 1) = spec.hopping(1, 0) = j;
    auto basis = make_sector_basis(2, 1);
    boson_operator op(spec, basis);
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(2);
    psi(basis->rank(1u)) = 1.0;  // particle on the left site
    evolve(frozen(op), psi, 0.0, t, evolution_controls{});
    const double pr = std::norm(psi(basis->rank(2u)));
    REQUIRE(std::abs(pr - std::pow(std::sin(2 * std::numbers::pi * j * t), 2)) < 1e-10);
}

TEST_CASE("evolution_preserves_norm_and_energy", "[engine]") {
    hamiltonian_spec spec(8);
    spec.hopping = nn_chain(8, -0.92, 2.42);
    spec.drive_mhz = 1.3;
    spec.detuning_mhz = -0.6;
    boson_operator op(spec, make_full_basis(8));
    Eigen::VectorXcd psi = random_state(256, 17);
    Eigen::VectorXcd hp(256);
    op.apply(psi.data(), hp.data());
    const double e0 = psi.dot(hp).real();
    evolve(frozen(op), psi, 0.0, 2.0, evolution_controls{});
    REQUIRE(std::abs(psi.norm() - 1.0) < 1e-8);
    op.apply(psi.data(), hp.data());
    REQUIRE(std::abs(psi.dot(hp).real() - e0) < 1e-6 * std::abs(e0));
}

TEST_CASE("krylov_propagator_matches_dense_exponential", "[engine]") {
    hamiltonian_spec spec(6);
    spec.hopping = nn_chain(6, -0.92, 2.42);
    spec.drive_mhz = 1.3;
    spec.detuning_mhz = -0.7;
    boson_operator op(spec, make_full_basis(6));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dense_of(op));
    auto psi0 = random_state(64, 5);
    auto dense_at = [&](double t) {
        Eigen::VectorXcd ph =
            (cplx(0, -2 * std::numbers::pi * t) * es.eigenvalues().array().cast<cplx>()).exp();
        return (es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint() * psi0).eval();
    };
    Eigen::VectorXcd psi = psi0;
    std::vector<std::pair<double, double>> errs;
    evolve(frozen(op), psi, 0.0, 1.0, evolution_controls{}, {0.2, 0.5, 0.9},
           [&](double t, const Eigen::VectorXcd& p) { errs.emplace_back(t, (p - dense_at(t)).norm()); });
    REQUIRE(errs.size() == 3);
    for (auto [t, e] : errs) REQUIRE(e < 1e-7);
    REQUIRE((psi - dense_at(1.0)).norm() < 1e-7);
}

TEST_CASE("evolve_rejects_reversed_interval", "[engine]") {
    hamiltonian_spec spec(2);
    boson_operator op(spec, make_full_basis(2));
    Eigen::VectorXcd psi = random_state(4, 1);
    REQUIRE_THROWS_AS(evolve(frozen(op), psi, 1.0, 1.0, evolution_controls{}), std::invalid_argument);
}

TEST_CASE("time_dependent_error_is_second_order_in_substep", "[engine]") {
    hamiltonian_spec spec(6);
    spec.hopping = nn_chain(6, -0.92, 2.42);
    auto basis = make_full_basis(6);
    boson_operator op(spec, basis);
    auto ramp = [&](double t, const cplx* x, cplx* y) { op.apply_with(x, y, 2.0 * t, -1.0 + 0.5 * t); };
    Eigen::VectorXcd psi0 = Eigen::VectorXcd::Zero(64);
    psi0(0) = 1.0;
    auto run = [&](double sub) {
        Eigen::VectorXcd p = psi0;
        evolution_controls c;
        c.step_tol = 1e-10;
        c.max_substep_us = sub;
        evolve(ramp, p, 0.0, 1.5, c);
        return p;
    };
    const auto ref = run(0.0005);
    const double e1 = (run(0.05) - ref).norm();
    const double e2 = (run(0.025) - ref).norm();
    const double e3 = (run(0.005) - ref).norm();
    REQUIRE(e1 / e2 > 3.0);
    REQUIRE(e1 / e2 < 5.0);
    REQUIRE(e3 < e1 / 80.0);
}

TEST_CASE("lanczos_matches_dense_spectrum", "[engine]") {
    hamiltonian_spec spec(10);
    spec.hopping = nn_chain(10, -0.92, 2.42);
    boson_operator op(spec, make_sector_basis(10, 5));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dense_of(op));
    auto r = lowest_eigenpairs(op, 6);
    for (int k = 0; k < 6; ++k) {
        REQUIRE(std::abs(r.values(k) - es.eigenvalues()(k)) < 1e-8);
        Eigen::VectorXcd hv(op.dim());
        op.apply(r.vectors[k].data(), hv.data());
        REQUIRE((hv - r.values(k) * r.vectors[k]).norm() < 1e-7);
    }
}

TEST_CASE("lanczos_recovers_exact_degeneracies", "[engine]") {
    // three decoupled strong dimers: the half-filled ground level is fourfold
    Eigen::MatrixXd jm = Eigen::MatrixXd::Zero(8, 8);
    jm(1, 2) = jm(2, 1) = 2.42;
    jm(3, 4) = jm(4, 3) = 2.42;
    jm(5, 6) = jm(6, 5) = 2.42;
    hamiltonian_spec spec(8);
    spec.hopping = jm;
    boson_operator op(spec, make_sector_basis(8, 4));
    auto r = lowest_eigenpairs(op, 4);
    REQUIRE(std::abs(r.values(0) + 3 * 2.42) < 1e-10);
    REQUIRE(std::abs(r.values(1) + 3 * 2.42) < 1e-10);
    REQUIRE(std::abs(r.values(2) + 2 * 2.42) < 1e-10);
    REQUIRE(std::abs(r.values(3) + 2 * 2.42) < 1e-10);
    REQUIRE(r.degenerate_clusters.size() == 2);
    REQUIRE(r.degenerate_clusters[0].size() == 2);
    REQUIRE(r.degenerate_clusters[1].size() == 2);
    for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b)
            REQUIRE(std::abs(r.vectors[a].dot(r.vectors[b])) < 1e-8);
}

TEST_CASE("gapped_dimerized_chain_has_unique_ground_state", "[engine]") {
    hamiltonian_spec spec(8);
    spec.hopping = nn_chain(8, 2.42, -0.92);  // strong bond first: no edge modes
    boson_operator op(spec, make_sector_basis(8, 4));
    auto r = lowest_eigenpairs(op, 2);
    REQUIRE(r.values(1) - r.values(0) > 1.0);
    REQUIRE(r.degenerate_clusters.size() == 2);
}
