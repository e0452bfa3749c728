#include "wgspdc/simd_kernels.hpp"
#include "wgspdc/common.hpp"

#include <atomic>
#include <cstdlib>
#include <mutex>

namespace wgspdc::simd {

const Kernels* avx2_kernels(); // simd_avx2.cpp

namespace {

std::atomic<const Kernels*> g_active{nullptr};
std::atomic<bool> g_is_avx2{false};

const Kernels* pick(const std::string& name) {
  if (name == "scalar") {
    g_is_avx2 = false;
    return &scalar();
  }
  if (name == "avx2") {
    const Kernels* k = avx2_kernels();
    if (!k || !avx2_available()) throw std::runtime_error("avx2 kernels requested but unsupported on this CPU");
    g_is_avx2 = true;
    return k;
  }
  // auto
  if (avx2_available()) {
    if (const Kernels* k = avx2_kernels()) {
      g_is_avx2 = true;
      return k;
    }
  }
  g_is_avx2 = false;
  return &scalar();
}

void init_once() {
  static std::once_flag flag;
  std::call_once(flag, [] {
    const char* env = std::getenv("WGSPDC_SIMD");
    g_active = pick(env ? std::string(env) : std::string("auto"));
  });
}

} // namespace

bool avx2_available() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Kernels& active() {
  init_once();
  return *g_active.load();
}

void select(const std::string& name) {
  init_once();
  g_active = pick(name);
}

std::string active_name() {
  init_once();
  return g_is_avx2 ? "avx2" : "scalar";
}

} // namespace wgspdc::simd

// --- thread cap and deterministic parallel_for (declared in common.hpp) ---

namespace wgspdc {

namespace {
std::atomic<unsigned> g_thread_cap{0};
}

void set_thread_cap(unsigned n) { g_thread_cap = n; }

unsigned thread_cap() {
  unsigned n = g_thread_cap.load();
  if (n == 0) n = std::thread::hardware_concurrency();
  return n ? n : 1;
}

void parallel_chunks(std::size_t begin, std::size_t end, std::size_t nchunks,
                     const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
  if (end <= begin) return;
  const std::size_t total = end - begin;
  if (nchunks == 0) nchunks = 1;
  if (nchunks > total) nchunks = total;
  const std::size_t per = (total + nchunks - 1) / nchunks;
  nchunks = (total + per - 1) / per;

  unsigned workers = thread_cap();
  if (workers > nchunks) workers = static_cast<unsigned>(nchunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < nchunks; ++c) {
      std::size_t lo = begin + c * per;
      body(c, lo, std::min(end, lo + per));
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  auto run = [&] {
    for (;;) {
      std::size_t c = next.fetch_add(1);
      if (c >= nchunks) return;
      std::size_t lo = begin + c * per;
      body(c, lo, std::min(end, lo + per));
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
}

void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t, std::size_t)>& body) {
  parallel_chunks(begin, end, kParallelChunks,
                  [&body](std::size_t, std::size_t lo, std::size_t hi) { body(lo, hi); });
}

} // namespace wgspdc
