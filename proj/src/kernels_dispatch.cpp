#include <atomic>
#include <cstdlib>
#include <string>

#include "pnpdm/error.hpp"
#include "pnpdm/kernels.hpp"

namespace pnpdm::kernels {

#ifndef PNPDM_HAVE_AVX2
const KernelTable* avx2_table() { return nullptr; }
#endif

namespace {

bool cpu_has_avx2() {
#if defined(PNPDM_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

const KernelTable* initial_table() {
    if (const char* env = std::getenv("PNPDM_KERNELS"); env && *env) {
        const Backend wanted = parse_backend(env);
        if (available(wanted))
            return &table(wanted);
    }
    return cpu_has_avx2() ? avx2_table() : &scalar_table();
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> ptr{initial_table()};
    return ptr;
}

} // namespace

bool available(Backend b) {
    switch (b) {
    case Backend::scalar:
        return true;
    case Backend::avx2:
        return avx2_table() != nullptr && cpu_has_avx2();
    }
    return false;
}

const KernelTable& table(Backend b) {
    if (!available(b))
        throw InvalidInput("kernel backend not available on this CPU");
    return b == Backend::avx2 ? *avx2_table() : scalar_table();
}

const KernelTable& active() { return *current().load(std::memory_order_relaxed); }

void select(Backend b) { current().store(&table(b), std::memory_order_relaxed); }

Backend parse_backend(std::string_view name) {
    if (name == "scalar")
        return Backend::scalar;
    if (name == "avx2")
        return Backend::avx2;
    throw InvalidInput("unknown kernel backend '" + std::string(name) + "'");
}

} // namespace pnpdm::kernels
