#include "l2m/kernels.hpp"

#include <cmath>

namespace l2m::kernels {

namespace {
// Below this many output elements the fork/join overhead dominates.
constexpr std::size_t kParallelCutoff = 4096;
}  // namespace

void matmul_serial(const double* a, const double* b, double* c,
                   std::size_t n, std::size_t k, std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) {
        double* ci = c + i * m;
        for (std::size_t j = 0; j < m; ++j) ci[j] = 0.0;
        const double* ai = a + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b + p * m;
            for (std::size_t j = 0; j < m; ++j) ci[j] += av * bp[j];
        }
    }
}

void matmul(const double* a, const double* b, double* c,
            std::size_t n, std::size_t k, std::size_t m) {
#ifdef L2M_HAVE_OPENMP
    if (n * m >= kParallelCutoff) {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(n); ++i) {
            matmul_serial(a + i * k, b, c + i * m, 1, k, m);
        }
        return;
    }
#endif
    matmul_serial(a, b, c, n, k, m);
}

void matmul_at_b_serial(const double* a, const double* b, double* c,
                        std::size_t n, std::size_t k, std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) {
        double* ci = c + i * m;
        for (std::size_t j = 0; j < m; ++j) ci[j] = 0.0;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = a[p * n + i];
            const double* bp = b + p * m;
            for (std::size_t j = 0; j < m; ++j) ci[j] += av * bp[j];
        }
    }
}

void matmul_at_b(const double* a, const double* b, double* c,
                 std::size_t n, std::size_t k, std::size_t m) {
#ifdef L2M_HAVE_OPENMP
    if (n * m >= kParallelCutoff) {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(n); ++i) {
            double* ci = c + i * m;
            for (std::size_t j = 0; j < m; ++j) ci[j] = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                const double av = a[p * n + i];
                const double* bp = b + p * m;
                for (std::size_t j = 0; j < m; ++j) ci[j] += av * bp[j];
            }
        }
        return;
    }
#endif
    matmul_at_b_serial(a, b, c, n, k, m);
}

void matmul_a_bt_serial(const double* a, const double* b, double* c,
                        std::size_t n, std::size_t k, std::size_t m) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* ai = a + i * k;
        double* ci = c + i * m;
        for (std::size_t j = 0; j < m; ++j) {
            const double* bj = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] = acc;
        }
    }
}

void matmul_a_bt(const double* a, const double* b, double* c,
                 std::size_t n, std::size_t k, std::size_t m) {
#ifdef L2M_HAVE_OPENMP
    if (n * m >= kParallelCutoff) {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(n); ++i) {
            matmul_a_bt_serial(a + i * k, b, c + i * m, 1, k, m);
        }
        return;
    }
#endif
    matmul_a_bt_serial(a, b, c, n, k, m);
}

void pairwise_sqdist_serial(const double* x, const double* y, double* d,
                            std::size_t n, std::size_t m, std::size_t dim) {
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = x + i * dim;
        double* di = d + i * m;
        for (std::size_t j = 0; j < m; ++j) {
            const double* yj = y + j * dim;
            double acc = 0.0;
            for (std::size_t p = 0; p < dim; ++p) {
                const double diff = xi[p] - yj[p];
                acc += diff * diff;
            }
            di[j] = acc;
        }
    }
}

void pairwise_sqdist(const double* x, const double* y, double* d,
                     std::size_t n, std::size_t m, std::size_t dim) {
#ifdef L2M_HAVE_OPENMP
    if (n * m >= kParallelCutoff) {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(n); ++i) {
            pairwise_sqdist_serial(x + i * dim, y, d + i * m, 1, m, dim);
        }
        return;
    }
#endif
    pairwise_sqdist_serial(x, y, d, n, m, dim);
}

void rbf_mix_serial(const double* sqdist, double* k, std::size_t count,
                    const std::vector<double>& sigmas) {
    const double inv = 1.0 / static_cast<double>(sigmas.size());
    for (std::size_t i = 0; i < count; ++i) {
        double acc = 0.0;
        for (const double s : sigmas) acc += std::exp(-sqdist[i] / (2.0 * s * s));
        k[i] = acc * inv;
    }
}

void rbf_mix(const double* sqdist, double* k, std::size_t count,
             const std::vector<double>& sigmas) {
#ifdef L2M_HAVE_OPENMP
    if (count >= kParallelCutoff) {
        const double inv = 1.0 / static_cast<double>(sigmas.size());
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < static_cast<long long>(count); ++i) {
            double acc = 0.0;
            for (const double s : sigmas) acc += std::exp(-sqdist[i] / (2.0 * s * s));
            k[i] = acc * inv;
        }
        return;
    }
#endif
    rbf_mix_serial(sqdist, k, count, sigmas);
}

}  // namespace l2m::kernels
