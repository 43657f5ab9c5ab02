#pragma once

#include <complex>
#include <vector>

namespace ffdn::fft {

using cplx = std::complex<double>;

// In-place DFT, X[k] = sum_n x[n] e^{-j 2 pi k n / N}. Any length.
void forward(std::vector<cplx>& x);

// In-place inverse DFT including the 1/N scale.
void inverse(std::vector<cplx>& x);

std::size_t next_pow2(std::size_t n);

}  // namespace ffdn::fft
