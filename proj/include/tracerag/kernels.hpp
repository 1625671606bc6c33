#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace tracerag::kernels {

enum class Backend { auto_detect, scalar, avx2 };

// Dot product over equal-length spans. The scalar kernel is the reference;
// the AVX2 kernel is picked at runtime when the CPU supports it.
double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> a);

double dot_scalar(std::span<const double> a, std::span<const double> b);
#if defined(__x86_64__) || defined(__i386__)
double dot_avx2(std::span<const double> a, std::span<const double> b);
#endif

// Forces a backend; auto_detect restores CPU-based selection. Returns the
// backend actually in effect (a forced avx2 on a non-AVX2 CPU falls back
// to scalar).
Backend select_backend(Backend preferred);
std::string_view active_backend_name();

} // namespace tracerag::kernels
