#include <catch2/catch_amalgamated.hpp>

#include <rydssh/spmodel.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

using namespace rydssh;

namespace {

Eigen::MatrixXd nn_chain(int n, double jw, double js) {
    Eigen::MatrixXd jm = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) {
        const double j = (i % 2 == 0) ? jw : js;
        jm(i, i + 1) = jm(i + 1, i) = j;
    }
    return jm;
}

}  // namespace

TEST_CASE("four_site_spectrum_matches_quartic_closed_form", "[spmodel]") {
    // tridiagonal (a, b, a) has lambda^2 = ((2a^2+b^2) +- sqrt((2a^2+b^2)^2 - 4a^4)) / 2
    const double a = 0.92, b = 2.42;
    const double s = 2 * a * a + b * b;
    const double disc = std::sqrt(s * s - 4 * a * a * a * a);
    const double lo = std::sqrt((s - disc) / 2), hi = std::sqrt((s + disc) / 2);
    auto sp = single_particle_spectrum(nn_chain(4, -a, b));
    REQUIRE(std::abs(sp.values(0) + hi) < 1e-12);
    REQUIRE(std::abs(sp.values(1) + lo) < 1e-12);
    REQUIRE(std::abs(sp.values(2) - lo) < 1e-12);
    REQUIRE(std::abs(sp.values(3) - hi) < 1e-12);
}

TEST_CASE("spectrum_is_chiral_symmetric_on_bipartite_chain", "[spmodel]") {
    auto sp = single_particle_spectrum(nn_chain(14, -0.92, 2.42));
    for (int k = 0; k < 14; ++k) REQUIRE(std::abs(sp.values(k) + sp.values(13 - k)) < 1e-10);
    REQUIRE(sp.chiral_residual_mhz == 0.0);
}

TEST_CASE("chiral_residual_detects_sublattice_mixing", "[spmodel]") {
    auto jm = nn_chain(8, -0.92, 2.42);
    jm(0, 2) = jm(2, 0) = 0.3;  // same-sublattice hop breaks the symmetry
    std::vector<sublattice_tag> labels(8);
    for (int i = 0; i < 8; ++i) labels[i] = i % 2 ? sublattice_tag::B : sublattice_tag::A;
    REQUIRE(chiral_residual(jm, labels) == 0.6);  // doubled same-sublattice weight
    REQUIRE(chiral_residual(nn_chain(8, -0.92, 2.42), labels) == 0.0);
}

TEST_CASE("edge_modes_live_on_one_sublattice", "[spmodel]") {
    auto r = edge_modes(nn_chain(14, -0.92, 2.42));
    REQUIRE(r.count == 2);
    double odd_weight = 0.0;
    for (int i = 1; i < 14; i += 2) odd_weight += r.left_mode(i) * r.left_mode(i);
    REQUIRE(odd_weight < 1e-12);
    REQUIRE(r.left_mode(0) * r.left_mode(0) > 0.5);
}

TEST_CASE("edge_localization_decays_at_coupling_ratio", "[spmodel]") {
    // squared edge-mode weight per cell falls off as (J'/J)^2
    auto r = edge_modes(nn_chain(20, -0.92, 2.42));
    const double expected = 2.0 * std::log(0.92 / 2.42);
    REQUIRE(r.left_fit.points_used >= 5);
    REQUIRE(std::abs(r.left_fit.slope_per_cell - expected) < 0.05 * std::abs(expected));
    REQUIRE(std::abs(r.right_fit.slope_per_cell - expected) < 0.05 * std::abs(expected));
}

TEST_CASE("hybridization_splitting_decreases_with_length", "[spmodel]") {
    double prev = std::numeric_limits<double>::infinity();
    for (int n = 4; n <= 20; n += 2) {
        auto r = edge_modes(nn_chain(n, -0.92, 2.42));
        REQUIRE(r.e_hyb > 0.0);
        REQUIRE(r.e_hyb < prev);
        prev = r.e_hyb;
    }
}

TEST_CASE("hybridization_splitting_linear_in_edge_coupling", "[spmodel]") {
    auto splitting = [](double jpp) {
        auto jm = nn_chain(14, -0.92, 2.42);
        jm(11, 13) = jm(13, 11) = jpp;
        return edge_modes(jm).e_hyb;
    };
    const double e1 = splitting(0.1), e2 = splitting(0.15), e3 = splitting(0.2);
    REQUIRE(e3 > e2);
    REQUIRE(e2 > e1);
    REQUIRE(std::abs(e3 + e1 - 2 * e2) < 0.01 * (e3 - e1));
}

TEST_CASE("decoupled_edges_give_exact_zero_modes", "[spmodel]") {
    auto r = edge_modes(nn_chain(10, 0.0, 2.42));
    REQUIRE(r.e_hyb == 0.0);
    // the zero-energy space is spanned by the two isolated end sites
    const double end_weight = r.left_mode(0) * r.left_mode(0) + r.left_mode(9) * r.left_mode(9);
    REQUIRE(end_weight > 1.0 - 1e-12);
}

TEST_CASE("edge_mode_window_selection", "[spmodel]") {
    auto topo = nn_chain(14, -0.92, 2.42);
    auto windowed = edge_modes(topo, std::make_pair(-1.0, 1.0));
    REQUIRE(windowed.count == 2);
    REQUIRE(std::abs(windowed.e_hyb - edge_modes(topo).e_hyb) < 1e-15);

    // trivial termination has no mid-gap states
    auto triv = edge_modes(nn_chain(14, 2.42, -0.92), std::make_pair(-1.0, 1.0));
    REQUIRE(triv.count == 0);

    // a single strong bond leaves six zero modes; the window cannot pick 2
    Eigen::MatrixXd jm = Eigen::MatrixXd::Zero(8, 8);
    jm(3, 4) = jm(4, 3) = 2.0;
    REQUIRE_THROWS(edge_modes(jm, std::make_pair(-0.5, 0.5)));
}

TEST_CASE("bulk_band_gap_of_alternating_chain", "[spmodel]") {
    REQUIRE(std::abs(bulk_band_gap(nn_chain(14, -0.92, 2.42)) - 3.0) < 1e-12);
    REQUIRE(std::abs(bulk_band_gap(nn_chain(14, 2.42, -0.92)) - 3.0) < 1e-12);
}

TEST_CASE("fit_log_weights_recovers_pure_exponential", "[spmodel]") {
    std::vector<double> x, w;
    for (int k = 0; k < 8; ++k) {
        x.push_back(k);
        w.push_back(3.0 * std::exp(-0.7 * k));
    }
    auto fit = detail::fit_log_weights(x, w);
    REQUIRE(fit.points_used == 8);
    REQUIRE(std::abs(fit.slope_per_cell + 0.7) < 1e-10);
    // quoted as an amplitude length, hence the factor two
    REQUIRE(std::abs(fit.length_cells - 2.0 / 0.7) < 1e-9);
}
