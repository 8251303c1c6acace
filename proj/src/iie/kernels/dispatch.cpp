#include <atomic>
#include <cstdlib>
#include <cstring>

#include "iie/kernels/kernels_detail.h"

namespace iie::kern {

namespace {

std::atomic<Backend> g_backend{Backend::scalar};

Backend probe_default() {
    if (const char* s = std::getenv("IIE_KERNELS")) {
        if (std::strcmp(s, "scalar") == 0) return Backend::scalar;
        if (std::strcmp(s, "avx2") == 0 && detail::avx2_available()) return Backend::avx2;
    }
    return detail::avx2_available() ? Backend::avx2 : Backend::scalar;
}

struct Init {
    Init() { g_backend.store(probe_default(), std::memory_order_relaxed); }
} g_init;

template <class T>
const Kernels<T>& table_of(Backend b) {
    static const Kernels<T> scalar = detail::scalar_table<T>();
    static const Kernels<T> avx2 = detail::avx2_table<T>();
    return b == Backend::avx2 ? avx2 : scalar;
}

}  // namespace

const char* backend_name(Backend b) { return b == Backend::avx2 ? "avx2" : "scalar"; }

bool backend_supported(Backend b) {
    return b == Backend::scalar || (b == Backend::avx2 && detail::avx2_available());
}

Backend active_backend() { return g_backend.load(std::memory_order_relaxed); }

bool select_backend(Backend b) {
    if (!backend_supported(b)) return false;
    g_backend.store(b, std::memory_order_relaxed);
    return true;
}

template <class T>
const Kernels<T>& K() {
    return table_of<T>(active_backend());
}

template <class T>
const Kernels<T>& table(Backend b) {
    return table_of<T>(b);
}

template const Kernels<float>& K<float>();
template const Kernels<double>& K<double>();
template const Kernels<float>& table<float>(Backend);
template const Kernels<double>& table<double>(Backend);

}  // namespace iie::kern
