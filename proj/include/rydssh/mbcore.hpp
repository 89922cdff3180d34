#pragma once

// Many-body foundation: Fock bases (full and fixed particle-number sectors),
// hard-core boson and Jordan-Wigner fermion Hamiltonians as matrix-free
// operators, the particle-hole symmetry, and local z-rotation gauges.
//
// Bit convention: bit k (LSB = k = 0) holds site k+1; a set bit is a particle.
// Z_k = 1 - 2 n_k, so the vacuum has Z = +1 everywhere.

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "util.hpp"

namespace rydssh {

class fock_basis {
  public:
    static fock_basis full(int n_sites) {
        check_sites(n_sites);
        fock_basis b;
        b.n_sites_ = n_sites;
        b.dim_ = std::uint64_t(1) << n_sites;
        return b;
    }

    // fixed popcount, bitstrings in ascending numeric (lexicographic) order
    static fock_basis sector(int n_sites, int n_particles) {
        check_sites(n_sites);
        if (n_particles < 0 || n_particles > n_sites)
            throw std::invalid_argument("fock_basis: sector out of range");
        fock_basis b;
        b.n_sites_ = n_sites;
        b.sector_ = n_particles;
        b.dim_ = binomials()(n_sites, n_particles);
        b.states_.reserve(b.dim_);
        for (std::uint32_t s = 0; s < (std::uint32_t(1) << n_sites); ++s)
            if (popcount32(s) == n_particles) b.states_.push_back(s);
        return b;
    }

    int n_sites() const { return n_sites_; }
    std::optional<int> sector() const { return sector_; }
    std::uint64_t dim() const { return dim_; }

    std::uint32_t unrank(std::uint64_t k) const {
        return sector_ ? states_[k] : static_cast<std::uint32_t>(k);
    }

    // combinatorial number system; O(popcount) in the sector case
    std::uint64_t rank(std::uint32_t s) const {
        if (!sector_) return s;
        std::uint64_t r = 0;
        int seen = 0;
        while (s) {
            const int p = __builtin_ctz(s);
            ++seen;
            r += binomials()(p, seen);
            s &= s - 1;
        }
        return r;
    }

    const std::vector<std::uint32_t>& states() const { return states_; }

  private:
    static void check_sites(int n) {
        if (n < 1) throw std::invalid_argument("fock_basis: need at least one site");
        if (n > 24) throw resource_error("fock_basis: dimension ceiling is 24 sites");
    }
    int n_sites_ = 0;
    std::optional<int> sector_;
    std::uint64_t dim_ = 0;
    std::vector<std::uint32_t> states_;
};

inline std::shared_ptr<const fock_basis> make_full_basis(int n_sites) {
    return std::make_shared<const fock_basis>(fock_basis::full(n_sites));
}
inline std::shared_ptr<const fock_basis> make_sector_basis(int n_sites, int n_particles) {
    return std::make_shared<const fock_basis>(fock_basis::sector(n_sites, n_particles));
}

// H = -sum_{i<j} J_ij (b_i^+ b_j + h.c.) + (nu_rabi/2) sum_i (b_i^+ + b_i)
//     - nu_delta sum_i n_i + sum_{i<j} V_ij n_i n_j + sum_i mu_i n_i + constant
// All coefficients in MHz. sigma^z sigma^z couplings are entered through
// add_zz and expanded into density_density/fields/constant, which keeps the
// particle-hole symmetry explicit in the stored spec.
struct hamiltonian_spec {
    int n_sites = 0;
    Eigen::MatrixXd hopping;          // J_ij, symmetric
    double drive_mhz = 0.0;           // nu_Rabi
    double detuning_mhz = 0.0;        // nu_Delta
    Eigen::MatrixXd density_density;  // V_ij, symmetric, summed over i<j
    Eigen::VectorXd fields;           // mu_i
    double constant_mhz = 0.0;

    explicit hamiltonian_spec(int n = 0)
        : n_sites(n),
          hopping(Eigen::MatrixXd::Zero(n, n)),
          density_density(Eigen::MatrixXd::Zero(n, n)),
          fields(Eigen::VectorXd::Zero(n)) {}

    // c * sigma^z_i sigma^z_j = c (1-2n_i)(1-2n_j)
    void add_zz(int i, int j, double c) {
        constant_mhz += c;
        fields(i) += -2.0 * c;
        fields(j) += -2.0 * c;
        density_density(i, j) += 4.0 * c;
        density_density(j, i) = density_density(i, j);
    }
};

// alternating-exchange XXZ chain mapped to hard-core bosons:
// H = -(c_l/2) sum_links (XX + YY + delta ZZ), c_l = J' on links (1,2),(3,4),...
// and J on links (2,3),(4,5),...; the XY part becomes hopping with amplitude
// c_l, the ZZ part is expanded so the operator carries the symmetry exactly
inline hamiltonian_spec build_xxz_hamiltonian(double j_mhz, double j_prime_mhz, double delta,
                                              int n_sites) {
    if (n_sites % 2 != 0)
        throw std::invalid_argument("build_xxz_hamiltonian: even site count required");
    hamiltonian_spec spec(n_sites);
    for (int i = 0; i + 1 < n_sites; ++i) {
        const double c = (i % 2 == 0) ? j_prime_mhz : j_mhz;
        spec.hopping(i, i + 1) = c;
        spec.hopping(i + 1, i) = c;
        spec.add_zz(i, i + 1, -0.5 * c * delta);
    }
    return spec;
}

namespace detail {

struct hop_term {
    std::uint32_t mask;
    int lo, hi;
    double amp;  // -J_ij
};

inline std::vector<hop_term> collect_hop_terms(const Eigen::MatrixXd& j) {
    std::vector<hop_term> terms;
    const int n = static_cast<int>(j.rows());
    for (int i = 0; i < n; ++i)
        for (int k = i + 1; k < n; ++k)
            if (j(i, k) != 0.0)
                terms.push_back({(1u << i) | (1u << k), i, k, -j(i, k)});
    return terms;
}

} // namespace detail

// matrix-free hard-core boson Hamiltonian; a CSR image of the hopping part is
// cached for dimensions up to 2^14, larger bases fall back to on-the-fly terms
class boson_operator {
  public:
    static constexpr std::uint64_t csr_ceiling = std::uint64_t(1) << 14;

    boson_operator(const hamiltonian_spec& spec, std::shared_ptr<const fock_basis> basis)
        : basis_(std::move(basis)), spec_drive_(spec.drive_mhz), spec_detuning_(spec.detuning_mhz) {
        const int n = basis_->n_sites();
        if (spec.n_sites != n)
            throw std::invalid_argument("boson_operator: spec/basis size mismatch");
        if (basis_->sector() && spec.drive_mhz != 0.0)
            throw std::invalid_argument(
                "boson_operator: drive breaks particle-number conservation on a sector basis");
        terms_ = detail::collect_hop_terms(spec.hopping);

        const std::uint64_t d = basis_->dim();
        diag_.resize(d);
        pop_.resize(d);
        for (std::uint64_t r = 0; r < d; ++r) {
            const std::uint32_t s = basis_->unrank(r);
            double v = spec.constant_mhz;
            for (int i = 0; i < n; ++i) {
                if (!(s >> i & 1u)) continue;
                v += spec.fields(i);
                for (int k = i + 1; k < n; ++k)
                    if (s >> k & 1u) v += spec.density_density(i, k);
            }
            diag_[r] = v;
            pop_[r] = popcount32(s);
        }
        if (d <= csr_ceiling) build_csr();
    }

    const fock_basis& basis() const { return *basis_; }
    std::uint64_t dim() const { return basis_->dim(); }
    bool hermitian() const { return true; }
    bool has_drive_channel() const { return !basis_->sector(); }

    // y = H(nu_rabi, nu_delta) x with the remaining coefficients from the spec
    void apply_with(const cplx* x, cplx* y, double nu_rabi, double nu_delta) const {
        if (nu_rabi != 0.0 && basis_->sector())
            throw std::invalid_argument(
                "boson_operator: drive breaks particle-number conservation on a sector basis");
        const std::uint64_t d = dim();
        if (!hop_csr_.row_ptr.empty()) {
            for (std::uint64_t r = 0; r < d; ++r) {
                cplx acc = (diag_[r] - nu_delta * pop_[r]) * x[r];
                for (std::uint64_t k = hop_csr_.row_ptr[r]; k < hop_csr_.row_ptr[r + 1]; ++k)
                    acc += hop_csr_.val[k] * x[hop_csr_.col[k]];
                y[r] = acc;
            }
        } else {
            for (std::uint64_t r = 0; r < d; ++r) {
                const std::uint32_t s = basis_->unrank(r);
                cplx acc = (diag_[r] - nu_delta * pop_[r]) * x[r];
                for (const auto& t : terms_) {
                    const std::uint32_t occ = s & t.mask;
                    if (occ == 0 || occ == t.mask) continue;
                    acc += t.amp * x[basis_->rank(s ^ t.mask)];
                }
                y[r] = acc;
            }
        }
        if (nu_rabi != 0.0) {
            const int n = basis_->n_sites();
            const double half = 0.5 * nu_rabi;
            for (std::uint64_t r = 0; r < d; ++r) {
                const std::uint32_t s = static_cast<std::uint32_t>(r);
                cplx acc{0.0, 0.0};
                for (int i = 0; i < n; ++i) acc += x[s ^ (1u << i)];
                y[r] += half * acc;
            }
        }
    }

    void apply(const cplx* x, cplx* y) const { apply_with(x, y, spec_drive_, spec_detuning_); }

    double spec_drive() const { return spec_drive_; }
    double spec_detuning() const { return spec_detuning_; }
    const std::vector<int>& popcounts() const { return pop_; }

  private:
    void build_csr() {
        const std::uint64_t d = dim();
        hop_csr_.row_ptr.assign(d + 1, 0);
        // two passes: count then fill, entries in fixed term order per row
        for (std::uint64_t r = 0; r < d; ++r) {
            const std::uint32_t s = basis_->unrank(r);
            std::uint64_t cnt = 0;
            for (const auto& t : terms_) {
                const std::uint32_t occ = s & t.mask;
                if (occ != 0 && occ != t.mask) ++cnt;
            }
            hop_csr_.row_ptr[r + 1] = hop_csr_.row_ptr[r] + cnt;
        }
        hop_csr_.col.resize(hop_csr_.row_ptr[d]);
        hop_csr_.val.resize(hop_csr_.row_ptr[d]);
        for (std::uint64_t r = 0; r < d; ++r) {
            const std::uint32_t s = basis_->unrank(r);
            std::uint64_t w = hop_csr_.row_ptr[r];
            for (const auto& t : terms_) {
                const std::uint32_t occ = s & t.mask;
                if (occ == 0 || occ == t.mask) continue;
                hop_csr_.col[w] = static_cast<std::uint32_t>(basis_->rank(s ^ t.mask));
                hop_csr_.val[w] = t.amp;
                ++w;
            }
        }
    }

    std::shared_ptr<const fock_basis> basis_;
    std::vector<detail::hop_term> terms_;
    std::vector<double> diag_;
    std::vector<int> pop_;
    csr_real hop_csr_;
    double spec_drive_ = 0.0;
    double spec_detuning_ = 0.0;
};

// H = -sum_{i<j} J_ij (c_i^+ c_j + h.c.) on the same bitstring basis; the
// Jordan-Wigner sign is the parity of occupied sites strictly between i and j
class fermion_operator {
  public:
    fermion_operator(const Eigen::MatrixXd& j, std::shared_ptr<const fock_basis> basis)
        : basis_(std::move(basis)), terms_(detail::collect_hop_terms(j)) {
        if (static_cast<int>(j.rows()) != basis_->n_sites())
            throw std::invalid_argument("fermion_operator: coupling/basis size mismatch");
        between_.reserve(terms_.size());
        for (const auto& t : terms_) between_.push_back(between_mask(t.lo, t.hi));
    }

    const fock_basis& basis() const { return *basis_; }
    std::uint64_t dim() const { return basis_->dim(); }
    bool hermitian() const { return true; }

    void apply(const cplx* x, cplx* y) const {
        const std::uint64_t d = dim();
        for (std::uint64_t r = 0; r < d; ++r) {
            const std::uint32_t s = basis_->unrank(r);
            cplx acc{0.0, 0.0};
            for (std::size_t q = 0; q < terms_.size(); ++q) {
                const auto& t = terms_[q];
                const std::uint32_t occ = s & t.mask;
                if (occ == 0 || occ == t.mask) continue;
                const double sgn = (popcount32(s & between_[q]) & 1) ? -1.0 : 1.0;
                acc += sgn * t.amp * x[basis_->rank(s ^ t.mask)];
            }
            y[r] = acc;
        }
    }

  private:
    std::shared_ptr<const fock_basis> basis_;
    std::vector<detail::hop_term> terms_;
    std::vector<std::uint32_t> between_;
};

// particle-hole transformation: out[s] = conj(in[~s]); antiunitary, full basis only
inline Eigen::VectorXcd apply_symmetry_SB(const Eigen::VectorXcd& psi, const fock_basis& basis) {
    if (basis.sector())
        throw std::invalid_argument("apply_symmetry_SB: particle number is not conserved, full basis required");
    const std::uint32_t mask = (1u << basis.n_sites()) - 1u;
    Eigen::VectorXcd out(psi.size());
    for (std::uint64_t s = 0; s < static_cast<std::uint64_t>(psi.size()); ++s)
        out[mask ^ s] = std::conj(psi[s]);
    return out;
}

// conjugation by prod_{k in sites} exp(-i (phi/2) sigma^z_k); spectrum-preserving
template <class Op>
class z_rotated_op {
  public:
    z_rotated_op(const Op& inner, const std::vector<int>& sites, double phi) : inner_(inner) {
        const fock_basis& b = inner.basis();
        phase_.resize(b.dim());
        for (std::uint64_t r = 0; r < b.dim(); ++r) {
            const std::uint32_t s = b.unrank(r);
            int zsum = 0;  // sum of Z_k = 1-2n_k over the rotated sites
            for (int k : sites) zsum += (s >> k & 1u) ? -1 : 1;
            phase_[r] = std::polar(1.0, -0.5 * phi * zsum);
        }
        scratch_.resize(b.dim());
    }

    const fock_basis& basis() const { return inner_.basis(); }
    std::uint64_t dim() const { return inner_.dim(); }
    bool hermitian() const { return true; }

    void apply(const cplx* x, cplx* y) const {
        const std::uint64_t d = dim();
        for (std::uint64_t r = 0; r < d; ++r) scratch_[r] = phase_[r] * x[r];
        inner_.apply(scratch_.data(), y);
        for (std::uint64_t r = 0; r < d; ++r) y[r] *= std::conj(phase_[r]);
    }

  private:
    const Op& inner_;
    std::vector<cplx> phase_;
    mutable std::vector<cplx> scratch_;
};

// dense image by applying the operator to unit vectors; oracle/serialization helper
template <class Op>
Eigen::MatrixXcd to_dense_matrix(const Op& op) {
    const std::uint64_t d = op.dim();
    if (d > boson_operator::csr_ceiling)
        throw resource_error("to_dense_matrix: dimension above the materialization ceiling");
    Eigen::MatrixXcd h(d, d);
    std::vector<cplx> x(d, cplx{0.0, 0.0}), y(d);
    for (std::uint64_t c = 0; c < d; ++c) {
        x[c] = 1.0;
        op.apply(x.data(), y.data());
        for (std::uint64_t r = 0; r < d; ++r) h(r, c) = y[r];
        x[c] = 0.0;
    }
    return h;
}

} // namespace rydssh
