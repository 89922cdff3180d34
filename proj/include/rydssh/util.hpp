#pragma once

// Small shared helpers: bit tricks, compensated summation, binomial tables,
// and a fixed-order CSR container used by the many-body kernels.

#include <cassert>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace rydssh {

using cplx = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

inline int popcount32(std::uint32_t x) { return __builtin_popcount(x); }

// bits strictly between positions i < j
inline std::uint32_t between_mask(int i, int j) {
    assert(i < j);
    if (j - i < 2) return 0u;
    return ((1u << j) - 1u) & ~((1u << (i + 1)) - 1u);
}

// compensated accumulator; keeps estimator reductions order-insensitive to ~1e-15
struct kahan_sum {
    double s = 0.0, c = 0.0;
    void add(double x) {
        double y = x - c;
        double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    double value() const { return s; }
};

struct kahan_sum_cplx {
    kahan_sum re, im;
    void add(cplx z) { re.add(z.real()); im.add(z.imag()); }
    cplx value() const { return {re.value(), im.value()}; }
};

// binomial table up to n=64 in double (exact for the ranks used here, n<=24)
class binomial_table {
  public:
    binomial_table() {
        for (int n = 0; n < rows; ++n) {
            c_[n][0] = 1;
            for (int k = 1; k <= n; ++k)
                c_[n][k] = c_[n - 1][k - 1] + (k <= n - 1 ? c_[n - 1][k] : 0);
        }
    }
    std::uint64_t operator()(int n, int k) const {
        if (k < 0 || k > n || n < 0 || n >= rows) return 0;
        return c_[n][k];
    }

  private:
    static constexpr int rows = 65;
    std::uint64_t c_[rows][rows] = {};
};

inline const binomial_table& binomials() {
    static const binomial_table t;
    return t;
}

// row-major CSR with real entries acting on complex vectors; the build order of the
// entries within a row is part of the contract (fixed reduction order)
struct csr_real {
    std::vector<std::uint64_t> row_ptr;
    std::vector<std::uint32_t> col;
    std::vector<double> val;
    std::uint64_t rows() const { return row_ptr.empty() ? 0 : row_ptr.size() - 1; }

    void apply_add(const cplx* x, cplx* y, double scale = 1.0) const {
        const std::uint64_t n = rows();
        for (std::uint64_t r = 0; r < n; ++r) {
            cplx acc{0.0, 0.0};
            for (std::uint64_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
                acc += val[k] * x[col[k]];
            y[r] += scale * acc;
        }
    }
};

struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct resource_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace rydssh
