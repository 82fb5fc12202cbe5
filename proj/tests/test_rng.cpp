#include "doctest.h"

#include "rff/rng.hpp"

using namespace rff;

TEST_CASE("same seed produces the same stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.raw() == b.raw());
}

TEST_CASE("uniform stays in [0,1)") {
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("normal has roughly standard moments") {
    Rng rng(1);
    double sum = 0.0, sum2 = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sum2 += x * x;
    }
    CHECK(std::abs(sum / n) < 0.03);
    CHECK(std::abs(sum2 / n - 1.0) < 0.05);
}

TEST_CASE("cnormal splits variance across components") {
    Rng rng(3);
    double re2 = 0.0, im2 = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const auto z = rng.cnormal(4.0);
        re2 += z.real() * z.real();
        im2 += z.imag() * z.imag();
    }
    CHECK(re2 / n == doctest::Approx(2.0).epsilon(0.05));
    CHECK(im2 / n == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("integer is bounded and hits every residue") {
    Rng rng(5);
    bool seen[7] = {};
    for (int i = 0; i < 1000; ++i) {
        const auto v = rng.integer(7);
        CHECK(v < 7);
        seen[v] = true;
    }
    for (bool s : seen) CHECK(s);
}

TEST_CASE("derived seeds differ per tag and index") {
    CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
    CHECK(derive_seed(1, "a") != derive_seed(2, "a"));
    CHECK(derive_seed(1, "a", 0) != derive_seed(1, "a", 1));
}
