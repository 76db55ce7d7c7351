#include "fcb/fft.hpp"

#include <fftw3.h>

#include <mutex>

#include "fcb/common.hpp"

namespace fcb {

namespace {

// FFTW's planner is not thread-safe; execution of a plan is.
std::mutex g_planner_mutex;

void run(std::vector<std::complex<double>>& data, const std::vector<int>& dims,
         int sign) {
  require(!dims.empty(), "fft: empty dimension list");
  std::size_t total = 1;
  for (int d : dims) {
    require(d >= 1, "fft: dimensions must be positive");
    total *= static_cast<std::size_t>(d);
  }
  require(data.size() == total, "fft: data size does not match dimensions");

  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(g_planner_mutex);
    plan = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), ptr, ptr,
                         sign, FFTW_ESTIMATE);
  }
  require(plan != nullptr, "fft: planner failure");
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(g_planner_mutex);
    fftw_destroy_plan(plan);
  }
}

}  // namespace

void fft_forward(std::vector<std::complex<double>>& data,
                 const std::vector<int>& dims) {
  run(data, dims, FFTW_FORWARD);
}

void fft_backward(std::vector<std::complex<double>>& data,
                  const std::vector<int>& dims) {
  run(data, dims, FFTW_BACKWARD);
}

}  // namespace fcb
