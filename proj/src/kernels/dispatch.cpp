#include <atomic>
#include <cstdlib>
#include <string>

#include "ragmi/error.hpp"
#include "ragmi/kernels.hpp"

namespace ragmi::kernels {

namespace {

constexpr KernelTable kScalar{scalar::dot, scalar::sum, scalar::sum_sq_dev, scalar::axpy};
#if defined(RAGMI_HAVE_AVX2_TU)
constexpr KernelTable kAvx2{avx2::dot, avx2::sum, avx2::sum_sq_dev, avx2::axpy};
#endif
#if defined(RAGMI_HAVE_NEON_TU)
constexpr KernelTable kNeon{neon::dot, neon::sum, neon::sum_sq_dev, neon::axpy};
#endif

bool cpu_has_avx2() {
#if defined(RAGMI_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() {
  if (const char* env = std::getenv("RAGMI_KERNELS"); env && std::string(env) == "scalar")
    return Isa::Scalar;
  if (cpu_has_avx2()) return Isa::Avx2;
#if defined(RAGMI_HAVE_NEON_TU)
  return Isa::Neon;
#else
  return Isa::Scalar;
#endif
}

std::atomic<const KernelTable*> g_table{nullptr};
std::atomic<Isa> g_isa{Isa::Scalar};

const KernelTable& current() {
  const KernelTable* t = g_table.load(std::memory_order_acquire);
  if (!t) {
    Isa isa = detect();
    t = &table_for(isa);
    g_isa.store(isa);
    g_table.store(t, std::memory_order_release);
  }
  return *t;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2: return cpu_has_avx2();
    case Isa::Neon:
#if defined(RAGMI_HAVE_NEON_TU)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table_for(Isa isa) {
  if (!isa_available(isa))
    throw ArgumentError("kernel ISA '" + std::string(isa_name(isa)) + "' is not available");
  switch (isa) {
#if defined(RAGMI_HAVE_AVX2_TU)
    case Isa::Avx2: return kAvx2;
#endif
#if defined(RAGMI_HAVE_NEON_TU)
    case Isa::Neon: return kNeon;
#endif
    default: return kScalar;
  }
}

Isa active_isa() {
  current();
  return g_isa.load();
}

void force_isa(Isa isa) {
  const KernelTable* t = &table_for(isa);
  g_isa.store(isa);
  g_table.store(t, std::memory_order_release);
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ArgumentError("dot: length mismatch");
  return current().dot(a.data(), b.data(), a.size());
}

double sum(std::span<const double> a) { return current().sum(a.data(), a.size()); }

double sum_sq_dev(std::span<const double> a, double mean) {
  return current().sum_sq_dev(a.data(), a.size(), mean);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw ArgumentError("axpy: length mismatch");
  current().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace ragmi::kernels
