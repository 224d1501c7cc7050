#pragma once
#include <cstddef>

// Data-parallel inner loops used by the solvers and transforms. Scalar
// reference kernels always exist; on x86-64 an AVX2/FMA variant and on
// aarch64 a NEON variant are selected at runtime. The SIMD variants may
// reassociate sums, so results can differ from scalar by rounding only.
namespace hdselect::kernels {

enum class Isa { scalar, avx2, neon };

// ISA picked at startup for this process.
Isa active_isa();
const char* isa_name(Isa isa);

// Override the dispatch (used by the equivalence tests). Throws
// std::invalid_argument if the requested ISA is unavailable on this CPU.
void force_isa(Isa isa);

// sum_i x[i] * y[i]
double dot(const double* x, const double* y, std::size_t n);

// y[i] += a * x[i]
void axpy(double a, const double* x, double* y, std::size_t n);

double sum(const double* x, std::size_t n);

// sum_i x[i]^2
double sumsq(const double* x, std::size_t n);

// sum_i (x[i] * w[i])^2  -- heteroskedasticity-robust loading accumulator
double weighted_sumsq(const double* x, const double* w, std::size_t n);

// Scalar reference implementations (always compiled; oracle for the
// dispatch equivalence tests).
namespace scalar {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
double sum(const double* x, std::size_t n);
double sumsq(const double* x, std::size_t n);
double weighted_sumsq(const double* x, const double* w, std::size_t n);
}  // namespace scalar

}  // namespace hdselect::kernels
