// Small numeric and threading helpers used throughout the library.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace clv {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)) without overflow.
inline double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::fabs(a - b)));
}

// log(sum exp(v_i)); -inf for an empty range.
inline double log_sum_exp(std::span<const double> v) {
    double m = kNegInf;
    for (double x : v) m = std::max(m, x);
    if (m == kNegInf || !std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

// Fixed-order pairwise sum: deterministic and more accurate than naive
// accumulation for long vectors.
inline double pairwise_sum(std::span<const double> v) {
    const std::size_t n = v.size();
    if (n == 0) return 0.0;
    if (n <= 16) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

// Worker cap shared by all parallel loops. 0 = use hardware concurrency.
int max_threads();
void set_max_threads(int n);

// Runs fn(i) for i in [0, n). Results must be written to per-index slots so
// the reduction order stays fixed regardless of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// --- small dense matrix helpers (row-major) ---

struct Matrix {
    std::size_t n = 0;
    std::vector<double> a;  // n*n, row-major

    Matrix() = default;
    explicit Matrix(std::size_t dim) : n(dim), a(dim * dim, 0.0) {}
    double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

// Inverse via Gauss-Jordan with partial pivoting; returns false if singular.
bool invert(const Matrix& m, Matrix& out);

// Eigenvalues of a symmetric matrix (Jacobi rotations), ascending.
std::vector<double> symmetric_eigenvalues(Matrix m);

// splitmix64: cheap stateless mixing, used to derive per-customer RNG seeds.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace clv
