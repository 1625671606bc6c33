#include "tracerag/kernels.hpp"

#include <atomic>
#include <cassert>
#include <cmath>

namespace tracerag::kernels {

double dot_scalar(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

namespace {

using DotFn = double (*)(std::span<const double>, std::span<const double>);

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

DotFn pick(Backend preferred) {
#if defined(__x86_64__) || defined(__i386__)
    if (preferred == Backend::avx2 || (preferred == Backend::auto_detect && cpu_has_avx2())) {
        if (cpu_has_avx2()) {
            return &dot_avx2;
        }
    }
#else
    (void)preferred;
#endif
    return &dot_scalar;
}

std::atomic<DotFn> g_dot{nullptr};

DotFn current() {
    DotFn fn = g_dot.load(std::memory_order_acquire);
    if (fn == nullptr) {
        fn = pick(Backend::auto_detect);
        g_dot.store(fn, std::memory_order_release);
    }
    return fn;
}

} // namespace

double dot(std::span<const double> a, std::span<const double> b) {
    return current()(a, b);
}

double l2_norm(std::span<const double> a) {
    return std::sqrt(dot(a, a));
}

Backend select_backend(Backend preferred) {
    DotFn fn = pick(preferred);
    g_dot.store(fn, std::memory_order_release);
    return fn == &dot_scalar ? Backend::scalar : Backend::avx2;
}

std::string_view active_backend_name() {
    return current() == &dot_scalar ? "scalar" : "avx2";
}

} // namespace tracerag::kernels
