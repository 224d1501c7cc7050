#include <stdexcept>

#include "hdselect/kernels.hpp"

namespace hdselect::kernels {

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
double dot(const double*, const double*, std::size_t);
void axpy(double, const double*, double*, std::size_t);
double sum(const double*, std::size_t);
double sumsq(const double*, std::size_t);
double weighted_sumsq(const double*, const double*, std::size_t);
}  // namespace avx2
#endif
#if defined(__aarch64__)
namespace neon {
double dot(const double*, const double*, std::size_t);
void axpy(double, const double*, double*, std::size_t);
double sum(const double*, std::size_t);
double sumsq(const double*, std::size_t);
double weighted_sumsq(const double*, const double*, std::size_t);
}  // namespace neon
#endif

namespace {

struct Table {
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    double (*sum)(const double*, std::size_t);
    double (*sumsq)(const double*, std::size_t);
    double (*weighted_sumsq)(const double*, const double*, std::size_t);
    Isa isa;
};

constexpr Table kScalar{scalar::dot, scalar::axpy, scalar::sum,
                        scalar::sumsq, scalar::weighted_sumsq, Isa::scalar};

bool isa_available(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return true;
        case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Isa::neon:
#if defined(__aarch64__)
            return true;
#else
            return false;
#endif
    }
    return false;
}

Table table_for(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return kScalar;
#if defined(__x86_64__) || defined(_M_X64)
        case Isa::avx2:
            return {avx2::dot, avx2::axpy, avx2::sum, avx2::sumsq,
                    avx2::weighted_sumsq, Isa::avx2};
#endif
#if defined(__aarch64__)
        case Isa::neon:
            return {neon::dot, neon::axpy, neon::sum, neon::sumsq,
                    neon::weighted_sumsq, Isa::neon};
#endif
        default:
            return kScalar;
    }
}

Isa detect() {
    if (isa_available(Isa::avx2)) return Isa::avx2;
    if (isa_available(Isa::neon)) return Isa::neon;
    return Isa::scalar;
}

Table g_table = table_for(detect());

}  // namespace

Isa active_isa() { return g_table.isa; }

const char* isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::neon: return "neon";
    }
    return "unknown";
}

void force_isa(Isa isa) {
    if (!isa_available(isa))
        throw std::invalid_argument(std::string("kernel ISA unavailable on this CPU: ") +
                                    isa_name(isa));
    g_table = table_for(isa);
}

double dot(const double* x, const double* y, std::size_t n) { return g_table.dot(x, y, n); }
void axpy(double a, const double* x, double* y, std::size_t n) { g_table.axpy(a, x, y, n); }
double sum(const double* x, std::size_t n) { return g_table.sum(x, n); }
double sumsq(const double* x, std::size_t n) { return g_table.sumsq(x, n); }
double weighted_sumsq(const double* x, const double* w, std::size_t n) {
    return g_table.weighted_sumsq(x, w, n);
}

}  // namespace hdselect::kernels
