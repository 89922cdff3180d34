#pragma once

// Symmetry-protected-topology laboratory: exact matrix-product ground states
// of the two dimerized limits, on-site action of the U(1) x Z2(antiunitary)
// symmetry, extraction of the projective representation on the virtual
// indices, cocycle evaluation with antiunitary twisting, a trivialization
// test over linear U(1) characters, and the 3-site perturbative statistics
// oracle.
//
// Conventions: each unit cell holds two spins; the physical index is
// p = 2 i + j with i, j in {0 = up, 1 = down}; spin up carries sigma^z = +1
// and no particle.  Extracted V matrices are scaled to |det V| = 1 and the
// largest-magnitude entry (lowest row-major index on ties) is rotated to the
// positive real axis; cocycles are reported in this gauge and the
// trivialization test quantifies over the residual re-phasing freedom.

#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "util.hpp"

namespace rydssh {

struct group_element {
    double phi = 0.0;       // U(1) angle
    bool antiunitary = false;
};

inline group_element compose(const group_element& a, const group_element& b) {
    // direct product: angles add, antiunitary parities multiply
    return {a.phi + b.phi, a.antiunitary != b.antiunitary};
}

struct mps {
    int bond_dim = 1;
    std::array<Eigen::MatrixXcd, 4> a;  // indexed by p = 2 i + j
};

struct mps_pair {
    mps topological;
    mps trivial;
};

// fixed-point ground states of the two dimerized limits: the topological
// state pairs neighboring cells across the strong bonds (D = 2), the trivial
// state is a product of intra-cell dimers (D = 1)
inline mps_pair mps_ground_states() {
    mps_pair out;
    out.topological.bond_dim = 2;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(2, 2);
            for (int beta = 0; beta < 2; ++beta) m(i, beta) = (j == 1 - beta) ? 1.0 : 0.0;
            out.topological.a[2 * i + j] = m;
        }
    out.trivial.bond_dim = 1;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            Eigen::MatrixXcd m(1, 1);
            m(0, 0) = (j == 1 - i) ? 1.0 : 0.0;  // sigma^x_{ij}
            out.trivial.a[2 * i + j] = m;
        }
    return out;
}

// unitary part of the per-cell symmetry action: the U(1) rotation
// exp(-i phi/2 (sigma^z + sigma^z)), times sigma^x sigma^x when the element
// is antiunitary (conjugation itself is applied by the caller)
inline Eigen::Matrix4cd cell_symmetry_unitary(const group_element& g) {
    Eigen::Matrix2cd r = Eigen::Matrix2cd::Zero();
    r(0, 0) = std::polar(1.0, -0.5 * g.phi);
    r(1, 1) = std::polar(1.0, 0.5 * g.phi);
    if (g.antiunitary) {
        Eigen::Matrix2cd sx = Eigen::Matrix2cd::Zero();
        sx(0, 1) = sx(1, 0) = 1.0;
        r = r * sx;
    }
    Eigen::Matrix4cd u;
    for (int ip = 0; ip < 2; ++ip)
        for (int jp = 0; jp < 2; ++jp)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) u(2 * ip + jp, 2 * i + j) = r(ip, i) * r(jp, j);
    return u;
}

// state vector over 2L spins from a periodic trace; bit m of the index is
// the spin on site m (1 = down = particle)
inline Eigen::VectorXcd mps_contract(const mps& m, int cells) {
    if (cells < 1 || 2 * cells > 24) throw resource_error("mps_contract: size out of range");
    const std::uint64_t dim = std::uint64_t(1) << (2 * cells);
    Eigen::VectorXcd psi(dim);
    for (std::uint64_t s = 0; s < dim; ++s) {
        Eigen::MatrixXcd prod = Eigen::MatrixXcd::Identity(m.bond_dim, m.bond_dim);
        for (int k = 0; k < cells; ++k) {
            const int i = static_cast<int>(s >> (2 * k) & 1u);
            const int j = static_cast<int>(s >> (2 * k + 1) & 1u);
            prod = prod * m.a[2 * i + j];
        }
        psi[s] = prod.trace();
    }
    return psi;
}

// applies a 4x4 unitary to every physical index (gauge/basis changes)
inline mps transform_physical(const mps& m, const Eigen::Matrix4cd& u) {
    mps out;
    out.bond_dim = m.bond_dim;
    for (int p = 0; p < 4; ++p) {
        out.a[p] = Eigen::MatrixXcd::Zero(m.bond_dim, m.bond_dim);
        for (int q = 0; q < 4; ++q) out.a[p] += u(p, q) * m.a[q];
    }
    return out;
}

struct extracted_rep {
    Eigen::MatrixXcd v;
    cplx gamma{1.0, 0.0};
    bool antiunitary = false;
};

namespace detail {

// dominant eigenpair of the map M -> sum_p A^p M B^p(dagger), built densely
// on the D^2-dimensional matrix space
inline std::pair<cplx, Eigen::MatrixXcd>
dominant_transfer_eig(const std::array<Eigen::MatrixXcd, 4>& a,
                      const std::array<Eigen::MatrixXcd, 4>& b, int d) {
    Eigen::MatrixXcd t = Eigen::MatrixXcd::Zero(d * d, d * d);
    for (int p = 0; p < 4; ++p)
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c)
                for (int rr = 0; rr < d; ++rr)
                    for (int cc = 0; cc < d; ++cc)
                        t(r * d + rr, c * d + cc) += a[p](r, c) * std::conj(b[p](rr, cc));
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(t);
    if (es.info() != Eigen::Success)
        throw numerical_error("dominant_transfer_eig: eigensolver failed");
    int best = 0;
    for (int k = 1; k < d * d; ++k)
        if (std::abs(es.eigenvalues()[k]) > std::abs(es.eigenvalues()[best])) best = k;
    Eigen::MatrixXcd v(d, d);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) v(r, c) = es.eigenvectors()(r * d + c, best);
    return {es.eigenvalues()[best], v};
}

inline void fix_phase_and_det(Eigen::MatrixXcd& v) {
    const int d = static_cast<int>(v.rows());
    const double adet = std::abs(v.determinant());
    if (adet < 1e-12) throw numerical_error("extract_projective: singular eigenmatrix");
    v /= std::pow(adet, 1.0 / d);
    double best = 0.0;
    int br = 0, bc = 0;
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c)
            if (std::abs(v(r, c)) > best * (1.0 + 1e-9)) {
                best = std::abs(v(r, c));
                br = r;
                bc = c;
            }
    v *= std::conj(v(br, bc)) / std::abs(v(br, bc));
}

} // namespace detail

// solves sum_q u(g)_{pq} A^q (conjugated first when g is antiunitary)
//   = gamma V^{-1} A^p V
// for V and gamma via the dominant eigenmatrix of the mixed transfer operator
inline extracted_rep extract_projective(const mps& m, const group_element& g) {
    const int d = m.bond_dim;
    const auto [lam0, fixed] = detail::dominant_transfer_eig(m.a, m.a, d);
    (void)fixed;
    if (std::abs(lam0) <= 0.0) throw numerical_error("extract_projective: null state");

    const Eigen::Matrix4cd u = cell_symmetry_unitary(g);
    std::array<Eigen::MatrixXcd, 4> tilde;
    for (int p = 0; p < 4; ++p) {
        tilde[p] = Eigen::MatrixXcd::Zero(d, d);
        for (int q = 0; q < 4; ++q)
            tilde[p] += u(p, q) * (g.antiunitary ? m.a[q].conjugate() : m.a[q]);
    }
    const auto [lam, v] = detail::dominant_transfer_eig(m.a, tilde, d);
    if (std::abs(lam) / std::abs(lam0) < 1.0 - 1e-8)
        throw numerical_error("extract_projective: state is not symmetric under this element");

    extracted_rep out;
    out.v = v;
    detail::fix_phase_and_det(out.v);
    out.gamma = std::conj(lam / lam0);
    out.antiunitary = g.antiunitary;
    return out;
}

class projective_rep {
  public:
    explicit projective_rep(const mps& m) : state_(&m) {}
    extracted_rep at(const group_element& g) const { return extract_projective(*state_, g); }

  private:
    const mps* state_;
};

// scalar chi(g1, g2) with V(g1) V(g2)^(conjugated when g1 is antiunitary)
//   = chi(g1, g2) V(g1 g2)
inline cplx cocycle(const projective_rep& rep, const group_element& g1, const group_element& g2) {
    const extracted_rep v1 = rep.at(g1);
    const extracted_rep v2 = rep.at(g2);
    const extracted_rep v12 = rep.at(compose(g1, g2));
    const Eigen::MatrixXcd lhs = v1.v * (g1.antiunitary ? v2.v.conjugate() : v2.v);
    const Eigen::MatrixXcd c = lhs * v12.v.inverse();
    const int d = static_cast<int>(c.rows());
    const cplx chi = c.trace() / static_cast<double>(d);
    const double dev = (c - chi * Eigen::MatrixXcd::Identity(d, d)).cwiseAbs().maxCoeff();
    if (dev > 1e-10)
        throw numerical_error("cocycle: composition is not proportional to the identity");
    return chi;
}

enum class phase_tag { trivial, topological };

// a state is trivial iff some linear character f(R_phi) = exp(i k phi)
// absorbs the mixed cocycle at every sampled angle; the candidate k are
// integers (U(1) characters), searched over |k| <= 8
inline phase_tag classify(const mps& m, const std::vector<double>& phi_samples = {
                                            pi / 7.0, 1.0, pi / 2.0, 2.5}) {
    if (phi_samples.size() < 3)
        throw config_error("classify: need at least 3 sample angles");
    const projective_rep rep(m);
    const group_element s{0.0, true};
    std::vector<cplx> chis;
    chis.reserve(phi_samples.size());
    for (double phi : phi_samples) chis.push_back(cocycle(rep, s, group_element{phi, false}));

    for (int k = -8; k <= 8; ++k) {
        bool absorbs_all = true;
        for (std::size_t q = 0; q < phi_samples.size(); ++q) {
            const cplx res = chis[q] * std::polar(1.0, 2.0 * k * phi_samples[q]);
            if (std::abs(res - 1.0) > 0.1) {
                absorbs_all = false;
                break;
            }
        }
        if (absorbs_all) return phase_tag::trivial;
    }
    return phase_tag::topological;
}

enum class statistics_tag { boson, fermion };

struct perturbative_shifts {
    double e2_empty_mhz = 0.0;   // edge site empty, one particle on the dimer
    double e2_filled_mhz = 0.0;  // edge site and dimer both occupied
};

// second-order shifts of the two degenerate 3-site ground states under weak
// edge couplings; the filled shift depends on particle statistics, which is
// the microscopic origin of the bosonic degeneracy protection
inline perturbative_shifts perturbative_oracle(double j_mhz, double j_prime_mhz,
                                               double j_pp_mhz, statistics_tag stat) {
    if (j_mhz == 0.0)
        throw std::invalid_argument("perturbative_oracle: strong coupling must be nonzero");
    const double s = (stat == statistics_tag::boson) ? 1.0 : -1.0;
    perturbative_shifts out;
    out.e2_empty_mhz = -(j_prime_mhz + j_pp_mhz) * (j_prime_mhz + j_pp_mhz) / (2.0 * j_mhz);
    out.e2_filled_mhz =
        -(j_prime_mhz + s * j_pp_mhz) * (j_prime_mhz + s * j_pp_mhz) / (2.0 * j_mhz);
    return out;
}

} // namespace rydssh
