#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <unordered_map>
#include <utility>
#include <vector>

namespace rsp::memory {

// Process-wide accounting of bytes held by engine data structures (window
// buffers, join indexes, dictionaries, static graphs). This is not RSS: only
// containers that use CountingAllocator, plus explicit add/release calls,
// are tracked.
void add(std::int64_t bytes) noexcept;
void release(std::int64_t bytes) noexcept;

std::int64_t bytes_in_use() noexcept;
std::int64_t peak_bytes() noexcept;

// Resets the high-water mark to the current level.
void reset_peak() noexcept;

template <typename T>
struct CountingAllocator {
  using value_type = T;

  CountingAllocator() noexcept = default;
  template <typename U>
  CountingAllocator(const CountingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    T* p = std::allocator<T>{}.allocate(n);
    add(static_cast<std::int64_t>(n * sizeof(T)));
    return p;
  }

  void deallocate(T* p, std::size_t n) noexcept {
    release(static_cast<std::int64_t>(n * sizeof(T)));
    std::allocator<T>{}.deallocate(p, n);
  }

  template <typename U>
  bool operator==(const CountingAllocator<U>&) const noexcept { return true; }
};

template <typename T>
using vector = std::vector<T, CountingAllocator<T>>;

template <typename T>
using deque = std::deque<T, CountingAllocator<T>>;

template <typename K, typename V, typename Hash = std::hash<K>, typename Eq = std::equal_to<K>>
using unordered_map = std::unordered_map<K, V, Hash, Eq, CountingAllocator<std::pair<const K, V>>>;

// RAII charge for memory that is not held in a counting container.
class Charge {
 public:
  Charge() = default;
  explicit Charge(std::int64_t bytes) : bytes_(bytes) { add(bytes_); }
  Charge(const Charge&) = delete;
  Charge& operator=(const Charge&) = delete;
  Charge(Charge&& other) noexcept : bytes_(std::exchange(other.bytes_, 0)) {}
  Charge& operator=(Charge&& other) noexcept {
    if (this != &other) {
      release(bytes_);
      bytes_ = std::exchange(other.bytes_, 0);
    }
    return *this;
  }
  ~Charge() { release(bytes_); }

  void grow(std::int64_t bytes) {
    bytes_ += bytes;
    add(bytes);
  }
  void shrink(std::int64_t bytes) {
    bytes_ -= bytes;
    release(bytes);
  }
  std::int64_t bytes() const { return bytes_; }

 private:
  std::int64_t bytes_ = 0;
};

}  // namespace rsp::memory
