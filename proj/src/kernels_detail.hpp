#pragma once

#include "stsc/kernels.hpp"

namespace stsc::kernels::detail {

template <typename T>
void fill_scalar(Ops<T>& t);

void fill_avx2(Ops<float>& t);
void fill_avx2(Ops<double>& t);
void fill_avx512(Ops<float>& t);
void fill_avx512(Ops<double>& t);

}  // namespace stsc::kernels::detail
