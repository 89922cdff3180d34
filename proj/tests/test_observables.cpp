#include <catch2/catch_amalgamated.hpp>

#include <rydssh/engine.hpp>
#include <rydssh/mbcore.hpp>
#include <rydssh/observables.hpp>

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <random>
#include <vector>

using namespace rydssh;

namespace {

Eigen::VectorXcd random_state(std::uint64_t dim, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXcd v(dim);
    for (std::uint64_t i = 0; i < dim; ++i) v[i] = cplx(u(gen), u(gen));
    return v.normalized();
}

Eigen::MatrixXd nn_chain(int n, double jw, double js) {
    Eigen::MatrixXd jm = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) {
        const double j = (i % 2 == 0) ? jw : js;
        jm(i, i + 1) = jm(i + 1, i) = j;
    }
    return jm;
}

// dense single-site Pauli matrices over the full basis, by bit enumeration
Eigen::MatrixXcd dense_pauli(int n, int site, pauli_basis obs) {
    const std::uint64_t d = std::uint64_t(1) << n;
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(d, d);
    for (std::uint64_t s = 0; s < d; ++s) {
        if (obs == pauli_basis::z)
            m(s, s) = ((s >> site) & 1u) ? -1.0 : 1.0;
        else
            m(s ^ (std::uint64_t(1) << site), s) = 1.0;
    }
    return m;
}

Eigen::VectorXcd dimer_ground_state(int n, const std::shared_ptr<const fock_basis>& basis) {
    hamiltonian_spec spec(n);
    spec.hopping = nn_chain(n, -0.92, 2.42);
    boson_operator op(spec, make_sector_basis(n, n / 2));
    auto r = lowest_eigenpairs(op, 1);
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(basis->dim());
    auto sb = make_sector_basis(n, n / 2);
    for (std::uint64_t k = 0; k < sb->dim(); ++k) psi(basis->rank(sb->unrank(k))) = r.vectors[0](k);
    return psi;
}

}  // namespace

TEST_CASE("occupancies_on_fock_states", "[observables]") {
    auto basis = make_full_basis(6);
    Eigen::VectorXcd vac = Eigen::VectorXcd::Zero(64);
    vac(basis->rank(0u)) = 1.0;
    REQUIRE(occupancies(vac, *basis).norm() == 0.0);

    Eigen::VectorXcd one = Eigen::VectorXcd::Zero(64);
    one(basis->rank(0b010110u)) = 1.0;
    auto n = occupancies(one, *basis);
    for (int i = 0; i < 6; ++i) REQUIRE(n(i) == ((0b010110 >> i) & 1 ? 1.0 : 0.0));
}

TEST_CASE("number_distribution_normalized_and_cat_state", "[observables]") {
    auto basis = make_full_basis(8);
    auto psi = random_state(256, 31);
    auto pn = number_distribution(psi, *basis);
    REQUIRE(pn.size() == 9);
    REQUIRE(std::abs(pn.sum() - 1.0) < 1e-12);

    Eigen::VectorXcd cat = Eigen::VectorXcd::Zero(256);
    cat(basis->rank(0u)) = cat(basis->rank(0xffu)) = 1.0 / std::sqrt(2.0);
    auto pc = number_distribution(cat, *basis);
    REQUIRE(std::abs(pc(0) - 0.5) < 1e-14);
    REQUIRE(std::abs(pc(8) - 0.5) < 1e-14);
    REQUIRE(std::abs(pc.segment(1, 7).sum()) < 1e-14);
}

TEST_CASE("correlators_are_bounded_and_unity_on_diagonal", "[observables]") {
    auto basis = make_full_basis(8);
    for (int trial = 0; trial < 5; ++trial) {
        auto psi = random_state(256, 40 + trial);
        auto cz = build_correlation_map(psi, *basis, pauli_basis::z, false);
        auto cx = build_correlation_map(psi, *basis, pauli_basis::x, false);
        for (int i = 0; i < 8; ++i) {
            REQUIRE(cz.table(i, i) == 1.0);
            REQUIRE(cx.table(i, i) == 1.0);
            for (int j = 0; j < 8; ++j) {
                REQUIRE(std::abs(cz.table(i, j)) <= 1.0 + 1e-12);
                REQUIRE(std::abs(cx.table(i, j)) <= 1.0 + 1e-12);
            }
        }
    }
}

TEST_CASE("vacuum_correlators_and_string", "[observables]") {
    auto basis = make_full_basis(14);
    Eigen::VectorXcd vac = Eigen::VectorXcd::Zero(basis->dim());
    vac(basis->rank(0u)) = 1.0;
    REQUIRE(std::abs(correlator(vac, *basis, pauli_basis::z, 3, 8) - 1.0) < 1e-14);
    REQUIRE(std::abs(correlator(vac, *basis, pauli_basis::x, 3, 8)) < 1e-14);
    auto s = string_order(vac, *basis, pauli_basis::z);
    // ten interior up spins: Re(-i^10) = +1 on a positive endpoint pair
    REQUIRE(std::abs(s.value - 1.0) < 1e-14);
    REQUIRE_FALSE(s.warn);
    REQUIRE(std::abs(s.imag_part) < 1e-14);
}

TEST_CASE("correlation_map_matches_dense_pauli_algebra", "[observables]") {
    const int n = 6;
    auto basis = make_full_basis(n);
    auto psi = dimer_ground_state(n, basis);
    for (auto obs : {pauli_basis::z, pauli_basis::x}) {
        auto map = build_correlation_map(psi, *basis, obs, true);
        REQUIRE(map.connected);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j) continue;
                const auto pi = dense_pauli(n, i, obs), pj = dense_pauli(n, j, obs);
                const double corr = psi.dot(pi * pj * psi).real();
                const double mi = psi.dot(pi * psi).real();
                const double mj = psi.dot(pj * psi).real();
                REQUIRE(std::abs(map.table(i, j) - (corr - mi * mj)) < 1e-10);
            }
    }
}

TEST_CASE("mean_x_matches_dense_and_rotation", "[observables]") {
    const int n = 6;
    auto basis = make_full_basis(n);
    auto psi = random_state(64, 77);
    for (int i = 0; i < n; ++i) {
        const double dense = psi.dot(dense_pauli(n, i, pauli_basis::x) * psi).real();
        REQUIRE(std::abs(mean_x(psi, *basis, i) - dense) < 1e-12);
        // rotating to the x basis turns <X> into <Z>
        REQUIRE(std::abs(mean_z(rotate_to_x_basis(psi, *basis), *basis, i) - dense) < 1e-12);
    }
}

TEST_CASE("x_string_equals_z_string_of_rotated_state", "[observables]") {
    auto basis = make_full_basis(8);
    auto psi = random_state(256, 78);
    auto sx = string_order(psi, *basis, pauli_basis::x);
    auto sz = string_order(rotate_to_x_basis(psi, *basis), *basis, pauli_basis::z);
    REQUIRE(std::abs(sx.value - sz.value) < 1e-13);
}

TEST_CASE("string_order_requires_minimum_length", "[observables]") {
    auto basis = make_full_basis(4);
    auto psi = random_state(16, 9);
    REQUIRE_THROWS_AS(string_order(psi, *basis, pauli_basis::z), std::invalid_argument);
}

TEST_CASE("overlap_probability_is_squared_inner_product", "[observables]") {
    auto a = random_state(32, 1), b = random_state(32, 2);
    REQUIRE(std::abs(overlap_probability(a, a) - 1.0) < 1e-14);
    REQUIRE(std::abs(overlap_probability(a, b) - std::norm(a.dot(b))) < 1e-14);
}

TEST_CASE("gaussian_fit_recovers_noiseless_peak", "[observables]") {
    std::vector<double> x, y;
    const double amp = 0.8, c0 = 1.7, w = 0.45, off = 0.05;
    for (int k = 0; k <= 60; ++k) {
        const double xx = -1.0 + 0.1 * k;
        x.push_back(xx);
        y.push_back(off + amp * std::exp(-0.5 * std::pow((xx - c0) / w, 2)));
    }
    auto fit = gaussian_fit(x, y);
    REQUIRE(std::abs(fit.amplitude - amp) < 1e-8);
    REQUIRE(std::abs(fit.center - c0) < 1e-8);
    REQUIRE(std::abs(fit.width - w) < 1e-8);
    REQUIRE(std::abs(fit.offset - off) < 1e-8);
    REQUIRE(fit.rms_residual < 1e-10);
}
