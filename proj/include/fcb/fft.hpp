#pragma once

#include <complex>
#include <vector>

namespace fcb {

// Thin wrapper over the system FFT library for n-dimensional complex
// transforms on row-major arrays (last dimension fastest — the same
// linearization the Lattice type uses).
//
// Conventions: forward applies exp(-2*pi*i*k.l/N) unnormalized; backward
// applies exp(+2*pi*i*k.l/N) unnormalized, so backward(forward(x)) = N*x
// with N the total element count.
void fft_forward(std::vector<std::complex<double>>& data,
                 const std::vector<int>& dims);
void fft_backward(std::vector<std::complex<double>>& data,
                  const std::vector<int>& dims);

}  // namespace fcb
