#include "feop/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace feop::kern {

const Kernels* feop_avx2_table();  // defined in kernels_avx2.cpp

namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Kernels* pick_auto() {
    if (const char* env = std::getenv("FEOP_KERNEL")) {
        if (std::strcmp(env, "scalar") == 0) return &scalar_kernels();
        if (std::strcmp(env, "avx2") == 0 && avx2_kernels()) return avx2_kernels();
    }
    if (const Kernels* v = avx2_kernels()) return v;
    return &scalar_kernels();
}

std::atomic<const Kernels*> g_forced{nullptr};

}  // namespace

const Kernels* avx2_kernels() {
    static const Kernels* table = cpu_has_avx2_fma() ? feop_avx2_table() : nullptr;
    return table;
}

const Kernels& active() {
    if (const Kernels* f = g_forced.load(std::memory_order_relaxed)) return *f;
    static const Kernels* auto_pick = pick_auto();
    return *auto_pick;
}

bool force_lane(const char* name) {
    if (name == nullptr) {
        g_forced.store(nullptr, std::memory_order_relaxed);
        return true;
    }
    if (std::strcmp(name, "scalar") == 0) {
        g_forced.store(&scalar_kernels(), std::memory_order_relaxed);
        return true;
    }
    if (std::strcmp(name, "avx2") == 0 && avx2_kernels()) {
        g_forced.store(avx2_kernels(), std::memory_order_relaxed);
        return true;
    }
    return false;
}

}  // namespace feop::kern
