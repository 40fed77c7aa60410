#pragma once

// Data-parallel inner loops used across the library (cosine similarity,
// covariance accumulation, z-normalization, linear fusion). Each kernel has a
// scalar reference implementation and vectorized variants; the dispatcher
// picks one at first use based on what the CPU reports. The SIMD variants
// reassociate sums, so they agree with the scalar path only to rounding.

#include <cstddef>
#include <span>
#include <string_view>

namespace ragmi::kernels {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

/// ISA used by the dispatched entry points below. Honors the environment
/// variable RAGMI_KERNELS=scalar to pin the reference path.
Isa active_isa();

/// True when `isa` can run on this machine and was compiled in.
bool isa_available(Isa isa);

/// Overrides dispatch; used by equivalence tests. Throws ArgumentError when
/// the ISA is unavailable.
void force_isa(Isa isa);

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* a, std::size_t n);
  double (*sum_sq_dev)(const double* a, std::size_t n, double mean);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

const KernelTable& table_for(Isa isa);

double dot(std::span<const double> a, std::span<const double> b);
double sum(std::span<const double> a);
/// Sum of (a_i - mean)^2.
double sum_sq_dev(std::span<const double> a, double mean);
/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

inline double mean(std::span<const double> a) {
  return a.empty() ? 0.0 : sum(a) / static_cast<double>(a.size());
}

/// Population variance.
inline double variance(std::span<const double> a) {
  if (a.empty()) return 0.0;
  return sum_sq_dev(a, mean(a)) / static_cast<double>(a.size());
}

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
double sum_sq_dev(const double* a, std::size_t n, double mean);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace scalar

namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
double sum_sq_dev(const double* a, std::size_t n, double mean);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace avx2

namespace neon {
double dot(const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
double sum_sq_dev(const double* a, std::size_t n, double mean);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace neon

}  // namespace ragmi::kernels
