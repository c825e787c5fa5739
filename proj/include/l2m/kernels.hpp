#pragma once

#include <cstddef>
#include <vector>

// Low-level dense kernels. Each kernel has a _serial reference
// implementation and an OpenMP-parallel default used by the tensor ops.
// Parallel variants split work by output row only, so results are
// bitwise identical to the serial reference at any thread count.

namespace l2m::kernels {

// C[n x m] = A[n x k] * B[k x m]
void matmul_serial(const double* a, const double* b, double* c,
                   std::size_t n, std::size_t k, std::size_t m);
void matmul(const double* a, const double* b, double* c,
            std::size_t n, std::size_t k, std::size_t m);

// C[n x m] = A[k x n]^T * B[k x m]
void matmul_at_b_serial(const double* a, const double* b, double* c,
                        std::size_t n, std::size_t k, std::size_t m);
void matmul_at_b(const double* a, const double* b, double* c,
                 std::size_t n, std::size_t k, std::size_t m);

// C[n x m] = A[n x k] * B[m x k]^T
void matmul_a_bt_serial(const double* a, const double* b, double* c,
                        std::size_t n, std::size_t k, std::size_t m);
void matmul_a_bt(const double* a, const double* b, double* c,
                 std::size_t n, std::size_t k, std::size_t m);

// D[n x m], D[i][j] = ||x_i - y_j||^2
void pairwise_sqdist_serial(const double* x, const double* y, double* d,
                            std::size_t n, std::size_t m, std::size_t dim);
void pairwise_sqdist(const double* x, const double* y, double* d,
                     std::size_t n, std::size_t m, std::size_t dim);

// K[i][j] = mean over sigmas of exp(-sqdist[i][j] / (2 sigma^2))
void rbf_mix_serial(const double* sqdist, double* k, std::size_t count,
                    const std::vector<double>& sigmas);
void rbf_mix(const double* sqdist, double* k, std::size_t count,
             const std::vector<double>& sigmas);

}  // namespace l2m::kernels
