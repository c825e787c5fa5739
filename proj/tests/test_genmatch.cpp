#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "l2m/genmatch.hpp"
#include "l2m/matching.hpp"

using namespace l2m;

TEST_CASE("sample_prior is uniform in [-1,1] and deterministic") {
    Tensor z = sample_prior(500, 4, 3);
    REQUIRE(z.shape == std::vector<int>{500, 4});
    double mean = 0.0;
    for (double v : z.data) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
        mean += v;
    }
    mean /= z.numel();
    CHECK(std::abs(mean) < 0.05);  // 4/sqrt(3n) concentration bound

    CHECK(sample_prior(500, 4, 3).data == z.data);
    CHECK(sample_prior(500, 4, 4).data != z.data);
}

TEST_CASE("ring_dataset geometry") {
    RingData ring = ring_dataset(80, 8, 2.0, 0.0, 5);
    REQUIRE(ring.points.shape == std::vector<int>{80, 2});
    REQUIRE(ring.centers.shape == std::vector<int>{8, 2});
    REQUIRE(ring.modes.size() == 80);

    // sd = 0: every sample sits exactly on its mode's center
    for (int i = 0; i < 80; ++i) {
        const int m = ring.modes[i];
        CHECK(ring.points.at(i, 0) == doctest::Approx(ring.centers.at(m, 0)).epsilon(1e-12));
        CHECK(ring.points.at(i, 1) == doctest::Approx(ring.centers.at(m, 1)).epsilon(1e-12));
    }

    // centers lie on the circle, equally spaced
    const double min_gap = 2.0 * 2.0 * std::sin(std::numbers::pi / 8);
    for (int a = 0; a < 8; ++a) {
        const double r = std::hypot(ring.centers.at(a, 0), ring.centers.at(a, 1));
        CHECK(r == doctest::Approx(2.0).epsilon(1e-12));
        for (int b = a + 1; b < 8; ++b) {
            const double d = std::hypot(ring.centers.at(a, 0) - ring.centers.at(b, 0),
                                        ring.centers.at(a, 1) - ring.centers.at(b, 1));
            CHECK(d >= min_gap - 1e-12);
        }
    }

    // balanced within one, even when n is not a multiple of the mode count
    RingData odd = ring_dataset(83, 8, 2.0, 0.1, 7);
    std::vector<int> counts(8, 0);
    for (int m : odd.modes) ++counts[m];
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    CHECK(*hi - *lo <= 1);

    CHECK(ring_dataset(80, 8, 2.0, 0.1, 9).points.data ==
          ring_dataset(80, 8, 2.0, 0.1, 9).points.data);
}

TEST_CASE("mode_coverage examples") {
    RingData ring = ring_dataset(64, 8, 2.0, 0.0, 1);

    // exact center replicas cover all 8 modes
    CHECK(mode_coverage(ring.points, ring.centers, 0.05) == 8);

    // collapse: all mass at one center covers exactly one mode
    Tensor collapsed = Tensor::zeros({64, 2});
    for (int i = 0; i < 64; ++i) {
        collapsed.at(i, 0) = ring.centers.at(3, 0);
        collapsed.at(i, 1) = ring.centers.at(3, 1);
    }
    CHECK(mode_coverage(collapsed, ring.centers, 0.05) == 1);

    // permutation of the sample rows changes nothing
    Tensor shuffled = ring.points;
    for (int c = 0; c < 2; ++c) {
        std::swap(shuffled.at(0, c), shuffled.at(63, c));
        std::swap(shuffled.at(5, c), shuffled.at(40, c));
    }
    CHECK(mode_coverage(shuffled, ring.centers, 0.05) == 8);

    // a single stray sample is below the 2% threshold for 64 samples... but
    // 2% of 64 is 1.28, so exactly one hit does not count
    Tensor one_off = collapsed;
    one_off.at(0, 0) = ring.centers.at(4, 0);
    one_off.at(0, 1) = ring.centers.at(4, 1);
    CHECK(mode_coverage(one_off, ring.centers, 0.05) == 1);

    CHECK(mode_coverage(Tensor::zeros({0, 2}), ring.centers, 0.05) == 0);
    CHECK_THROWS_AS(mode_coverage(ring.points, Tensor::zeros({0, 2}), 0.05), UsageError);
}

TEST_CASE("generate_samples shape and determinism") {
    GenSpec spec;
    spec.steps = 1;
    spec.batch_size = 32;
    spec.hidden_dims = {16};
    GenResult r = train_generator(spec);
    Tensor s1 = generate_samples(r.generator, 100, 11);
    REQUIRE(s1.shape == std::vector<int>{100, 2});
    CHECK(generate_samples(r.generator, 100, 11).data == s1.data);
    CHECK(generate_samples(r.generator, 100, 12).data != s1.data);
}

TEST_CASE("train_generator with the mmd loss improves the fit") {
    GenSpec spec;
    spec.steps = 300;
    spec.batch_size = 64;
    spec.hidden_dims = {32, 32};
    spec.seed = 1;

    const std::uint64_t calls_before = mmd2_call_count();
    GenResult r = train_generator(spec);
    // the single shared MMD implementation was exercised
    CHECK(mmd2_call_count() > calls_before);

    REQUIRE_FALSE(r.log.empty());
    CHECK(r.log.front().step == 0);
    CHECK(r.log.back().step == spec.steps - 1);
    for (const GenLogRow& row : r.log) {
        CHECK(std::isfinite(row.loss));
        CHECK(std::isfinite(row.mmd2_to_data));
    }
    CHECK(r.final_mmd2 == r.log.back().mmd2_to_data);
    CHECK(r.final_mmd2 < r.log.front().mmd2_to_data / 2.0);

    GenResult again = train_generator(spec);
    CHECK(again.final_mmd2 == r.final_mmd2);
    for (std::size_t i = 0; i < r.generator.params.size(); ++i) {
        CHECK(again.generator.params[i].value.data == r.generator.params[i].value.data);
    }
}

TEST_CASE("train_generator in l2m mode trains the meta-network and improves") {
    GenSpec spec;
    spec.loss_mode = "l2m";
    spec.steps = 300;
    spec.batch_size = 64;
    spec.hidden_dims = {32, 32};
    spec.meta_hidden = 32;
    spec.seed = 1;

    GenResult r = train_generator(spec);
    CHECK(r.final_mmd2 < r.log.front().mmd2_to_data);
    CHECK(std::isfinite(r.final_mmd2));

    // the meta-network moved away from its initialization
    GenSpec one = spec;
    one.steps = 1;
    GenResult init = train_generator(one);
    bool moved = false;
    for (std::size_t i = 0; i < r.meta_net.params.size(); ++i) {
        if (r.meta_net.params[i].value.data != init.meta_net.params[i].value.data) {
            moved = true;
        }
    }
    CHECK(moved);
}

TEST_CASE("GenSpec validation") {
    GenSpec spec;
    spec.validate();

    GenSpec bad = spec;
    bad.loss_mode = "vae";
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = spec;
    bad.modes = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = spec;
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = spec;
    bad.match_mode = "logit";  // no classifier exists in the generative toy
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}
