#include "gmorph/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace gmorph {
namespace kernels {

const Ops* avx2_ops_impl();  // defined in kernels_avx2.cpp

const Ops* avx2_ops() {
#if defined(__GNUC__) && (defined(__x86_64__) || defined(__i386__))
    if (!__builtin_cpu_supports("avx2") || !__builtin_cpu_supports("fma"))
        return nullptr;
    return avx2_ops_impl();
#else
    return nullptr;
#endif
}

namespace {

const Ops* select() {
    const char* env = std::getenv("GMORPH_KERNELS");
    if (env && std::strcmp(env, "scalar") == 0) return &scalar_ops();
    const Ops* simd = avx2_ops();
    if (env && std::strcmp(env, "avx2") == 0 && simd == nullptr)
        return &scalar_ops();  // requested but unavailable; fall back
    return simd ? simd : &scalar_ops();
}

}  // namespace

const Ops& ops() {
    static const Ops* selected = select();
    return *selected;
}

}  // namespace kernels
}  // namespace gmorph
