#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "selfen/simd/kernels.hpp"

namespace selfen::simd {

namespace {

Level widest_supported() {
    if (level_supported(Level::kAvx512)) return Level::kAvx512;
    if (level_supported(Level::kAvx2)) return Level::kAvx2;
    return Level::kScalar;
}

Level initial_level() {
    const char* env = std::getenv("SELFEN_SIMD");
    if (env == nullptr) return widest_supported();
    const std::string v(env);
    Level wanted = widest_supported();
    if (v == "scalar")
        wanted = Level::kScalar;
    else if (v == "avx2")
        wanted = Level::kAvx2;
    else if (v == "avx512")
        wanted = Level::kAvx512;
    return level_supported(wanted) ? wanted : widest_supported();
}

std::atomic<const KernelTable*>& active_slot() {
    static std::atomic<const KernelTable*> slot{&kernels_for(initial_level())};
    return slot;
}

}  // namespace

bool level_supported(Level level) {
    switch (level) {
        case Level::kScalar:
            return true;
#if defined(SELFEN_HAVE_X86_KERNELS)
        case Level::kAvx2:
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
        case Level::kAvx512:
            return __builtin_cpu_supports("avx512f") && __builtin_cpu_supports("fma");
#else
        case Level::kAvx2:
        case Level::kAvx512:
            return false;
#endif
    }
    return false;
}

std::string_view level_name(Level level) {
    switch (level) {
        case Level::kScalar:
            return "scalar";
        case Level::kAvx2:
            return "avx2";
        case Level::kAvx512:
            return "avx512";
    }
    return "unknown";
}

const KernelTable& kernels_for(Level level) {
    if (!level_supported(level))
        throw std::invalid_argument("SIMD level not supported on this CPU: " + std::string(level_name(level)));
    switch (level) {
#if defined(SELFEN_HAVE_X86_KERNELS)
        case Level::kAvx2:
            return detail::avx2_table();
        case Level::kAvx512:
            return detail::avx512_table();
#endif
        default:
            return detail::scalar_table();
    }
}

const KernelTable& kernels() { return *active_slot().load(std::memory_order_acquire); }

void set_level(Level level) { active_slot().store(&kernels_for(level), std::memory_order_release); }

Level active_level() { return kernels().level; }

}  // namespace selfen::simd
