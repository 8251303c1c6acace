#pragma once

#include "iie/kernels/kernels.h"

namespace iie::kern::detail {

template <class T>
Kernels<T> scalar_table();

// Defined in kernels_avx2.cpp (x86 only; entries may fall back to scalar for
// routines with no profitable vector form).
template <class T>
Kernels<T> avx2_table();

bool avx2_available();

}  // namespace iie::kern::detail
