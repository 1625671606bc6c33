#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tracerag/kernels.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace tracerag;

namespace {

std::vector<double> random_vec(std::mt19937& rng, std::size_t n) {
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    std::vector<double> v(n);
    for (double& x : v) x = dist(rng);
    return v;
}

} // namespace

TEST_CASE("scalar dot on small exact cases") {
    std::vector<double> a{1.0, 2.0, 3.0};
    std::vector<double> b{4.0, -5.0, 6.0};
    CHECK(kernels::dot_scalar(a, b) == doctest::Approx(12.0));
    CHECK(kernels::dot_scalar(a, a) == doctest::Approx(14.0));
}

#if defined(__x86_64__) || defined(__i386__)
TEST_CASE("avx2 variant matches the scalar reference") {
    if (kernels::select_backend(kernels::Backend::avx2) != kernels::Backend::avx2) {
        kernels::select_backend(kernels::Backend::auto_detect);
        return; // no AVX2 on this machine
    }
    std::mt19937 rng(1234);
    // odd lengths exercise every remainder path
    for (std::size_t n : {1u, 3u, 4u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 32u, 33u, 256u, 1536u, 1000u}) {
        for (int rep = 0; rep < 20; ++rep) {
            auto a = random_vec(rng, n);
            auto b = random_vec(rng, n);
            double scalar = kernels::dot_scalar(a, b);
            double avx2 = kernels::dot_avx2(a, b);
            CHECK(avx2 == doctest::Approx(scalar).epsilon(1e-12));
        }
    }
    kernels::select_backend(kernels::Backend::auto_detect);
}
#endif

TEST_CASE("dispatch falls back to scalar when forced off") {
    kernels::Backend active = kernels::select_backend(kernels::Backend::scalar);
    CHECK(active == kernels::Backend::scalar);
    CHECK(kernels::active_backend_name() == "scalar");
    std::vector<double> a{3.0, 4.0};
    CHECK(kernels::l2_norm(a) == doctest::Approx(5.0));
    kernels::select_backend(kernels::Backend::auto_detect);
}

TEST_CASE("auto detection picks a working backend") {
    kernels::select_backend(kernels::Backend::auto_detect);
    std::vector<double> a{1.0, 0.0, 0.0};
    std::vector<double> b{0.0, 1.0, 0.0};
    CHECK(kernels::dot(a, b) == doctest::Approx(0.0));
    CHECK(kernels::dot(a, a) == doctest::Approx(1.0));
    CHECK((kernels::active_backend_name() == "scalar" ||
           kernels::active_backend_name() == "avx2"));
}
