#include <cstdlib>
#include <cstring>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "asdf/common.hpp"
#include "asdf/kernels.hpp"

namespace asdf {

int worker_count() {
  static const int n = [] {
    if (const char* env = std::getenv("ASDF_THREADS")) {
      int v = std::atoi(env);
      if (v >= 1) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
  }();
  return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
  if (workers <= 1) {
    if (n > 0) fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, &errors, w, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::uint64_t hash_mix(std::uint64_t state, std::uint64_t value) {
  std::uint64_t z = state + 0x9e3779b97f4a7c15ULL + value;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace asdf

namespace asdf::kernels {

#ifdef ASDF_HAVE_AVX2_LANE
const Kernels* avx2_lane_table();  // defined in kernels_avx2.cpp
#endif

const Kernels* avx2() {
#ifdef ASDF_HAVE_AVX2_LANE
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2")) return avx2_lane_table();
#endif
#endif
  return nullptr;
}

namespace {

const Kernels* resolve() {
  const char* env = std::getenv("ASDF_KERNELS");
  const std::string want = env ? env : "auto";
  if (want == "scalar") return &scalar();
  if (want == "avx2") {
    const Kernels* lane = avx2();
    if (!lane) throw Error("ASDF_KERNELS=avx2 requested but the AVX2 lane is unavailable");
    return lane;
  }
  if (want != "auto") throw Error("ASDF_KERNELS must be one of scalar|avx2|auto, got '" + want + "'");
  const Kernels* lane = avx2();
  return lane ? lane : &scalar();
}

}  // namespace

const Kernels& active() {
  static const Kernels* lane = resolve();
  return *lane;
}

std::string active_name() { return active().name; }

}  // namespace asdf::kernels
