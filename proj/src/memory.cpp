#include "rsplab/memory.hpp"

namespace rsp::memory {
namespace {

std::atomic<std::int64_t> g_in_use{0};
std::atomic<std::int64_t> g_peak{0};

}  // namespace

void add(std::int64_t bytes) noexcept {
  const std::int64_t now = g_in_use.fetch_add(bytes, std::memory_order_relaxed) + bytes;
  std::int64_t peak = g_peak.load(std::memory_order_relaxed);
  while (now > peak && !g_peak.compare_exchange_weak(peak, now, std::memory_order_relaxed)) {
  }
}

void release(std::int64_t bytes) noexcept { g_in_use.fetch_sub(bytes, std::memory_order_relaxed); }

std::int64_t bytes_in_use() noexcept { return g_in_use.load(std::memory_order_relaxed); }

std::int64_t peak_bytes() noexcept { return g_peak.load(std::memory_order_relaxed); }

void reset_peak() noexcept { g_peak.store(g_in_use.load(std::memory_order_relaxed), std::memory_order_relaxed); }

}  // namespace rsp::memory
