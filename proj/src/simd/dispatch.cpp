#include <atomic>
#include <cstdlib>
#include <string>

#include "kernels.hpp"
#include "vattn/core.hpp"

namespace vattn::simd {

namespace {

constexpr KernelTable kScalarTable{
    &scalar::dot, &scalar::squared_distance, &scalar::axpy, &scalar::max_element, &scalar::gemv,
};

#if VATTN_HAVE_AVX2
constexpr KernelTable kAvx2Table{
    &avx2::dot, &avx2::squared_distance, &avx2::axpy, &avx2::max_element, &avx2::gemv,
};
#endif

#if VATTN_HAVE_NEON
constexpr KernelTable kNeonTable{
    &neon::dot, &neon::squared_distance, &neon::axpy, &neon::max_element, &neon::gemv,
};
#endif

bool cpu_has_avx2() {
#if VATTN_HAVE_AVX2 && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Level initial_level() {
    Level level = detected_level();
    if (const char* env = std::getenv("VATTN_SIMD"); env != nullptr && *env != '\0') {
        const Level requested = level_from_string(env);
        if (is_supported(requested)) level = requested;
    }
    return level;
}

std::atomic<Level>& current() {
    static std::atomic<Level> level{initial_level()};
    return level;
}

}  // namespace

std::string_view to_string(Level level) {
    switch (level) {
        case Level::Scalar: return "scalar";
        case Level::Avx2: return "avx2";
        case Level::Neon: return "neon";
    }
    return "unknown";
}

Level level_from_string(std::string_view name) {
    if (name == "scalar") return Level::Scalar;
    if (name == "avx2") return Level::Avx2;
    if (name == "neon") return Level::Neon;
    throw Error(ErrorCode::InvalidArgument, "unknown SIMD level '" + std::string(name) + "'");
}

bool is_supported(Level level) {
    switch (level) {
        case Level::Scalar: return true;
        case Level::Avx2: {
            static const bool ok = cpu_has_avx2();
            return ok;
        }
        case Level::Neon: return VATTN_HAVE_NEON != 0;
    }
    return false;
}

Level detected_level() {
    if (is_supported(Level::Avx2)) return Level::Avx2;
    if (is_supported(Level::Neon)) return Level::Neon;
    return Level::Scalar;
}

Level active_level() { return current().load(std::memory_order_relaxed); }

void set_level(Level level) {
    if (!is_supported(level)) {
        throw Error(ErrorCode::Unsupported,
                    "SIMD level '" + std::string(to_string(level)) + "' is not available here");
    }
    current().store(level, std::memory_order_relaxed);
}

const KernelTable& table(Level level) {
    switch (level) {
#if VATTN_HAVE_AVX2
        case Level::Avx2:
            if (is_supported(Level::Avx2)) return kAvx2Table;
            break;
#endif
#if VATTN_HAVE_NEON
        case Level::Neon: return kNeonTable;
#endif
        default: break;
    }
    if (level != Level::Scalar) {
        throw Error(ErrorCode::Unsupported,
                    "SIMD level '" + std::string(to_string(level)) + "' is not available here");
    }
    return kScalarTable;
}

const KernelTable& active() {
    switch (active_level()) {
#if VATTN_HAVE_AVX2
        case Level::Avx2: return kAvx2Table;
#endif
#if VATTN_HAVE_NEON
        case Level::Neon: return kNeonTable;
#endif
        default: return kScalarTable;
    }
}

}  // namespace vattn::simd
