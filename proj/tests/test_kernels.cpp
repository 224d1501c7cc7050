#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "hdselect/kernels.hpp"
#include "hdselect/rng.hpp"

using namespace hdselect;

namespace {

// SIMD variants may reassociate; compare against scalar with a magnitude-
// scaled tolerance.
void check_close(double a, double b, double scale) {
    CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, scale));
}

}  // namespace

TEST_CASE("dispatched kernels match the scalar reference") {
    const kernels::Isa isa = kernels::active_isa();
    INFO("active isa: ", kernels::isa_name(isa));
    Rng rng(42);
    // odd lengths exercise every remainder path
    for (std::size_t n : {0u, 1u, 2u, 3u, 5u, 7u, 8u, 9u, 15u, 64u, 100u, 1001u}) {
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = rng.normal();
            y[i] = rng.normal();
        }
        double mag = 0.0;
        for (std::size_t i = 0; i < n; ++i) mag += std::abs(x[i] * y[i]);

        check_close(kernels::dot(x.data(), y.data(), n),
                    kernels::scalar::dot(x.data(), y.data(), n), mag);
        check_close(kernels::sum(x.data(), n), kernels::scalar::sum(x.data(), n), mag);
        check_close(kernels::sumsq(x.data(), n), kernels::scalar::sumsq(x.data(), n), mag);
        check_close(kernels::weighted_sumsq(x.data(), y.data(), n),
                    kernels::scalar::weighted_sumsq(x.data(), y.data(), n),
                    mag * mag + 1.0);

        std::vector<double> y1 = y, y2 = y;
        kernels::axpy(0.37, x.data(), y1.data(), n);
        kernels::scalar::axpy(0.37, x.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i) check_close(y1[i], y2[i], std::abs(y2[i]));
    }
}

TEST_CASE("kernel identities") {
    Rng rng(7);
    const std::size_t n = 257;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = rng.normal();
        y[i] = rng.normal();
    }
    // dot(x,x) == sumsq(x)
    check_close(kernels::dot(x.data(), x.data(), n), kernels::sumsq(x.data(), n),
                kernels::sumsq(x.data(), n));
    // weighted_sumsq(x, 1) == sumsq(x)
    std::vector<double> ones(n, 1.0);
    check_close(kernels::weighted_sumsq(x.data(), ones.data(), n),
                kernels::sumsq(x.data(), n), kernels::sumsq(x.data(), n));
    // axpy with a=0 is the identity
    std::vector<double> y0 = y;
    kernels::axpy(0.0, x.data(), y0.data(), n);
    CHECK(y0 == y);
}

TEST_CASE("force_isa round-trips and rejects unsupported") {
    const kernels::Isa original = kernels::active_isa();
    kernels::force_isa(kernels::Isa::scalar);
    CHECK(kernels::active_isa() == kernels::Isa::scalar);
    kernels::force_isa(original);
    CHECK(kernels::active_isa() == original);
#if defined(__x86_64__)
    CHECK_THROWS(kernels::force_isa(kernels::Isa::neon));
#else
    CHECK_THROWS(kernels::force_isa(kernels::Isa::avx2));
#endif
}
