#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <vector>

namespace swtaxis::fft {

using cplx = std::complex<double>;

// Plans are created once per (shape, direction) and kept for the program lifetime.
// Planning is serialized; execution through fftw_execute_dft is thread safe.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(const std::vector<int>& dims, int direction) {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(dims, direction);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::size_t total = 1;
    for (int d : dims) total *= static_cast<std::size_t>(d);
    std::vector<cplx> scratch(total);
    auto* p = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan plan = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), p, p, direction,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }
  std::mutex mutex_;
  std::map<std::pair<std::vector<int>, int>, fftw_plan> plans_;
};

// In-place forward transform normalized so that entry 0 is the grid mean.
inline void forward(std::vector<cplx>& data, const std::vector<int>& dims) {
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(PlanCache::instance().get(dims, FFTW_FORWARD), p, p);
  const double scale = 1.0 / static_cast<double>(data.size());
  for (auto& c : data) c *= scale;
}

// In-place inverse transform (coefficients to grid values), unnormalized.
inline void inverse(std::vector<cplx>& data, const std::vector<int>& dims) {
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(PlanCache::instance().get(dims, FFTW_BACKWARD), p, p);
}

}  // namespace swtaxis::fft
