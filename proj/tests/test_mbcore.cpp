#include <catch2/catch_amalgamated.hpp>

#include <rydssh/mbcore.hpp>
#include <rydssh/spmodel.hpp>

#include <Eigen/Dense>

#include <bit>
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

}  // namespace

TEST_CASE("basis_dimensions_are_binomial", "[mbcore]") {
    REQUIRE(make_full_basis(14)->dim() == 16384);
    REQUIRE(make_sector_basis(14, 7)->dim() == 3432);
    REQUIRE(make_sector_basis(20, 10)->dim() == 184756);
}

TEST_CASE("rank_unrank_round_trip", "[mbcore]") {
    auto b = make_sector_basis(12, 5);
    for (std::uint64_t r = 0; r < b->dim(); ++r) {
        const std::uint32_t s = b->unrank(r);
        REQUIRE(std::popcount(s) == 5);
        REQUIRE(b->rank(s) == r);
    }
    auto f = make_full_basis(10);
    for (std::uint64_t r = 0; r < f->dim(); r += 37) REQUIRE(f->rank(f->unrank(r)) == r);
}

TEST_CASE("basis_rejects_oversized_chains", "[mbcore]") {
    REQUIRE_THROWS_AS(make_full_basis(25), resource_error);
    REQUIRE_THROWS_AS(make_sector_basis(25, 12), resource_error);
}

TEST_CASE("two_site_hopping_block", "[mbcore]") {
    hamiltonian_spec spec(2);
    spec.hopping(0, 1) = spec.hopping(1, 0) = 0.7;
    boson_operator op(spec, make_sector_basis(2, 1));
    auto h = dense_of(op);
    REQUIRE(std::abs(h(0, 0)) < 1e-15);
    REQUIRE(std::abs(h(1, 1)) < 1e-15);
    REQUIRE(std::abs(h(0, 1) - cplx(-0.7, 0.0)) < 1e-15);
    REQUIRE(std::abs(h(1, 0) - cplx(-0.7, 0.0)) < 1e-15);
}

TEST_CASE("drive_requires_full_basis", "[mbcore]") {
    hamiltonian_spec spec(4);
    spec.drive_mhz = 1.0;
    REQUIRE_THROWS_AS(boson_operator(spec, make_sector_basis(4, 2)), std::invalid_argument);
    REQUIRE_NOTHROW(boson_operator(spec, make_full_basis(4)));
}

TEST_CASE("operator_is_hermitian_with_all_terms", "[mbcore]") {
    auto g = nn_chain(8, -0.92, 2.42);
    hamiltonian_spec spec(8);
    spec.hopping = g;
    spec.drive_mhz = 1.3;
    spec.detuning_mhz = -0.6;
    spec.add_zz(2, 5, 0.4);
    boson_operator op(spec, make_full_basis(8));
    Eigen::VectorXcd hx(op.dim()), hy(op.dim());
    for (int trial = 0; trial < 100; ++trial) {
        auto x = random_state(op.dim(), 100 + trial);
        auto y = random_state(op.dim(), 900 + trial);
        op.apply(x.data(), hx.data());
        op.apply(y.data(), hy.data());
        const cplx a = x.dot(hy), b = y.dot(hx);
        REQUIRE(std::abs(a - std::conj(b)) < 1e-12 * std::max(1.0, std::abs(a)));
    }
}

TEST_CASE("zero_drive_conserves_particle_number", "[mbcore]") {
    auto basis = make_full_basis(8);
    hamiltonian_spec spec(8);
    spec.hopping = nn_chain(8, -0.92, 2.42);
    spec.detuning_mhz = 0.9;
    boson_operator op(spec, basis);
    auto x = random_state(op.dim(), 11);
    Eigen::VectorXcd hx(op.dim()), nhx(op.dim()), nx(op.dim()), hnx(op.dim());
    op.apply(x.data(), hx.data());
    for (std::uint64_t r = 0; r < op.dim(); ++r) {
        const double nr = std::popcount(basis->unrank(r));
        nhx[r] = nr * hx[r];
        nx[r] = nr * x[r];
    }
    op.apply(nx.data(), hnx.data());
    REQUIRE((nhx - hnx).norm() < 1e-12);
}

TEST_CASE("hardcore_bosons_match_fermions_on_nearest_neighbor_chain", "[mbcore]") {
    auto jm = nn_chain(8, -0.92, 2.42);
    for (int k = 1; k <= 7; ++k) {
        auto basis = make_sector_basis(8, k);
        hamiltonian_spec spec(8);
        spec.hopping = jm;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eb(dense_of(boson_operator(spec, basis)));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> ef(dense_of(fermion_operator(jm, basis)));
        REQUIRE((eb.eigenvalues() - ef.eigenvalues()).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("fermion_string_sign_on_longer_range_hop", "[mbcore]") {
    // a (0,2) hop crosses site 1: amplitude carries (1 - 2 n_1)
    Eigen::MatrixXd jm = Eigen::MatrixXd::Zero(3, 3);
    jm(0, 2) = jm(2, 0) = 1.0;
    auto h = dense_of(fermion_operator(jm, make_full_basis(3)));
    Eigen::MatrixXcd ref = Eigen::MatrixXcd::Zero(8, 8);
    for (std::uint32_t s = 0; s < 8; ++s) {
        if (((s >> 0) & 1u) == 1u && ((s >> 2) & 1u) == 0u) {
            const std::uint32_t t = (s & ~1u) | 4u;
            const double sign = ((s >> 1) & 1u) ? -1.0 : 1.0;
            ref(t, s) = ref(s, t) = -1.0 * sign;
        }
    }
    REQUIRE((h - ref).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("fermi_sea_energy_fills_lowest_orbitals", "[mbcore]") {
    auto jm = nn_chain(8, -0.92, 2.42);
    auto sp = single_particle_spectrum(jm);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
        dense_of(fermion_operator(jm, make_sector_basis(8, 4))));
    REQUIRE(std::abs(es.eigenvalues()(0) - sp.values.head(4).sum()) < 1e-10);
}

TEST_CASE("sublattice_symmetry_squares_to_identity", "[mbcore]") {
    auto basis = make_full_basis(8);
    auto psi = random_state(256, 21);
    auto twice = apply_symmetry_SB(apply_symmetry_SB(psi, *basis), *basis);
    REQUIRE((twice - psi).norm() < 1e-14);
    // vacuum maps to the fully occupied state
    Eigen::VectorXcd vac = Eigen::VectorXcd::Zero(256);
    vac(basis->rank(0u)) = 1.0;
    auto mapped = apply_symmetry_SB(vac, *basis);
    REQUIRE(std::abs(std::abs(mapped(basis->rank(0xffu))) - 1.0) < 1e-14);
}

TEST_CASE("sublattice_symmetry_commutes_with_particle_hole_forms", "[mbcore]") {
    auto basis = make_full_basis(8);
    auto psi = random_state(256, 22);
    auto residual = [&](const hamiltonian_spec& spec) {
        boson_operator op(spec, basis);
        Eigen::VectorXcd hpsi(256), a(256);
        op.apply(psi.data(), hpsi.data());
        auto spsi = apply_symmetry_SB(psi, *basis);
        op.apply(spsi.data(), a.data());
        return (a - apply_symmetry_SB(hpsi, *basis)).norm();
    };
    hamiltonian_spec hop(8);
    hop.hopping = nn_chain(8, -0.92, 2.42);
    REQUIRE(residual(hop) < 1e-12);
    REQUIRE(residual(build_xxz_hamiltonian(-1.0, 0.25, 0.7, 8)) < 1e-12);
    hamiltonian_spec detuned = hop;
    detuned.detuning_mhz = 0.5;
    REQUIRE(residual(detuned) > 0.1);
}

TEST_CASE("xxz_block_matches_spin_oracle", "[mbcore]") {
    const double j = -1.0, jp = 0.25, delta = 0.7;
    const int n = 8;
    auto spec = build_xxz_hamiltonian(j, jp, delta, n);
    auto basis = make_sector_basis(n, 4);
    auto h = dense_of(boson_operator(spec, basis));

    const std::uint64_t d = basis->dim();
    Eigen::MatrixXcd ref = Eigen::MatrixXcd::Zero(d, d);
    for (std::uint64_t r = 0; r < d; ++r) {
        const std::uint32_t s = basis->unrank(r);
        double diag = 0.0;
        for (int i = 0; i + 1 < n; ++i) {
            const double c = (i % 2 == 0) ? jp : j;
            const double zi = ((s >> i) & 1u) ? -1.0 : 1.0;
            const double zj = ((s >> (i + 1)) & 1u) ? -1.0 : 1.0;
            diag += -0.5 * c * delta * (zi * zj - 1.0);
            const bool pi = (s >> i) & 1u, pj = (s >> (i + 1)) & 1u;
            if (pi != pj) {
                const std::uint32_t t = s ^ (3u << i);
                ref(basis->rank(t), r) += -c;
            }
        }
        ref(r, r) += diag;
    }
    REQUIRE((h - ref).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("xxz_two_site_spectrum", "[mbcore]") {
    auto spec = build_xxz_hamiltonian(0.7, 1.0, 0.0, 2);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
        dense_of(boson_operator(spec, make_full_basis(2))));
    REQUIRE(std::abs(es.eigenvalues()(0) + 1.0) < 1e-12);
    REQUIRE(std::abs(es.eigenvalues()(1)) < 1e-12);
    REQUIRE(std::abs(es.eigenvalues()(2)) < 1e-12);
    REQUIRE(std::abs(es.eigenvalues()(3) - 1.0) < 1e-12);
}

TEST_CASE("z_rotation_conjugation_properties", "[mbcore]") {
    hamiltonian_spec spec(6);
    spec.hopping = nn_chain(6, -0.92, 2.42);
    boson_operator op(spec, make_full_basis(6));
    auto h0 = dense_of(op);

    z_rotated_op ident(op, {0, 2, 4}, 0.0);
    REQUIRE((dense_of(ident) - h0).cwiseAbs().maxCoeff() < 1e-14);

    // unitary conjugation preserves the spectrum
    z_rotated_op rot(op, {1, 3}, 0.83);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> e0(h0), e1(dense_of(rot));
    REQUIRE((e0.eigenvalues() - e1.eigenvalues()).cwiseAbs().maxCoeff() < 1e-12);

    // a pi rotation on one sublattice flips every hopping bond
    z_rotated_op flip(op, {0, 2, 4}, std::numbers::pi);
    REQUIRE((dense_of(flip) + h0).cwiseAbs().maxCoeff() < 1e-12);
}
