#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "l2m/kernels.hpp"

using namespace l2m;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    std::vector<double> v(n);
    for (double& x : v) x = dist(rng);
    return v;
}

}  // namespace

TEST_CASE("matmul matches triple-loop oracle") {
    const std::size_t n = 8, k = 5, m = 3;
    auto a = random_vec(n * k, 1);
    auto b = random_vec(k * m, 2);
    std::vector<double> c(n * m), ref(n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t p = 0; p < k; ++p) ref[i * m + j] += a[i * k + p] * b[p * m + j];
        }
    }
    kernels::matmul(a.data(), b.data(), c.data(), n, k, m);
    for (std::size_t i = 0; i < n * m; ++i) CHECK(c[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("parallel kernels are bitwise identical to serial references") {
    // Sizes straddling the parallel cutoff.
    for (std::size_t n : {4ul, 32ul, 80ul}) {
        const std::size_t k = 33, m = 41;
        auto a = random_vec(n * k, 10 + n);
        auto b = random_vec(k * m, 20 + n);
        std::vector<double> c1(n * m), c2(n * m);
        kernels::matmul_serial(a.data(), b.data(), c1.data(), n, k, m);
        kernels::matmul(a.data(), b.data(), c2.data(), n, k, m);
        CHECK(c1 == c2);

        auto at = random_vec(k * n, 30 + n);
        kernels::matmul_at_b_serial(at.data(), b.data(), c1.data(), n, k, m);
        kernels::matmul_at_b(at.data(), b.data(), c2.data(), n, k, m);
        CHECK(c1 == c2);

        auto bt = random_vec(m * k, 40 + n);
        kernels::matmul_a_bt_serial(a.data(), bt.data(), c1.data(), n, k, m);
        kernels::matmul_a_bt(a.data(), bt.data(), c2.data(), n, k, m);
        CHECK(c1 == c2);

        const std::size_t d = 7;
        auto x = random_vec(n * d, 50 + n);
        auto y = random_vec(m * d, 60 + n);
        std::vector<double> d1(n * m), d2(n * m);
        kernels::pairwise_sqdist_serial(x.data(), y.data(), d1.data(), n, m, d);
        kernels::pairwise_sqdist(x.data(), y.data(), d2.data(), n, m, d);
        CHECK(d1 == d2);

        std::vector<double> k1(n * m), k2(n * m);
        const std::vector<double> sigmas = {0.5, 1.0, 2.0};
        kernels::rbf_mix_serial(d1.data(), k1.data(), d1.size(), sigmas);
        kernels::rbf_mix(d1.data(), k2.data(), d1.size(), sigmas);
        CHECK(k1 == k2);
    }
}

TEST_CASE("matmul transpose variants match plain matmul on transposed inputs") {
    const std::size_t n = 6, k = 4, m = 5;
    auto a = random_vec(n * k, 70);
    auto b = random_vec(k * m, 71);
    std::vector<double> ref(n * m);
    kernels::matmul(a.data(), b.data(), ref.data(), n, k, m);

    // A^T stored as [k x n]
    std::vector<double> at(k * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < k; ++p) at[p * n + i] = a[i * k + p];
    std::vector<double> c(n * m);
    kernels::matmul_at_b(at.data(), b.data(), c.data(), n, k, m);
    for (std::size_t i = 0; i < n * m; ++i) CHECK(c[i] == doctest::Approx(ref[i]).epsilon(1e-12));

    // B^T stored as [m x k]
    std::vector<double> bt(m * k);
    for (std::size_t p = 0; p < k; ++p)
        for (std::size_t j = 0; j < m; ++j) bt[j * k + p] = b[p * m + j];
    kernels::matmul_a_bt(a.data(), bt.data(), c.data(), n, k, m);
    for (std::size_t i = 0; i < n * m; ++i) CHECK(c[i] == doctest::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("pairwise_sqdist basics") {
    const double x[] = {0.0, 0.0, 1.0, 1.0};
    const double y[] = {0.0, 0.0, 3.0, 4.0};
    double d[4];
    kernels::pairwise_sqdist(x, y, d, 2, 2, 2);
    CHECK(d[0] == doctest::Approx(0.0));
    CHECK(d[1] == doctest::Approx(25.0));
    CHECK(d[2] == doctest::Approx(2.0));
    CHECK(d[3] == doctest::Approx(13.0));
}

TEST_CASE("rbf_mix single bandwidth formula") {
    double sq = 1.0, k = 0.0;
    kernels::rbf_mix(&sq, &k, 1, {1.0});
    CHECK(k == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
}
