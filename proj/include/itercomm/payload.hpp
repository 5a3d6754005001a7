#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace itercomm {

/// Numeric message payload. Moves are free; every element copy made through
/// copy construction or copy assignment is added to a process-wide counter so
/// tests can assert that delivery paths only exchange storage.
class PayloadBuffer {
 public:
  PayloadBuffer() = default;
  explicit PayloadBuffer(std::size_t n, double fill = 0.0) : data_(n, fill) {}
  explicit PayloadBuffer(std::vector<double> v) : data_(std::move(v)) {}

  PayloadBuffer(const PayloadBuffer& other) : data_(other.data_) {
    element_copies_.fetch_add(other.data_.size(), std::memory_order_relaxed);
  }
  PayloadBuffer& operator=(const PayloadBuffer& other) {
    if (this != &other) {
      data_ = other.data_;
      element_copies_.fetch_add(other.data_.size(), std::memory_order_relaxed);
    }
    return *this;
  }
  PayloadBuffer(PayloadBuffer&&) noexcept = default;
  PayloadBuffer& operator=(PayloadBuffer&&) noexcept = default;

  /// Staging copy for outgoing data. Not counted: this is the send side
  /// snapshotting user memory, not a delivery.
  static PayloadBuffer stage(std::span<const double> src) {
    return PayloadBuffer(std::vector<double>(src.begin(), src.end()));
  }

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  friend void swap(PayloadBuffer& a, PayloadBuffer& b) noexcept { a.data_.swap(b.data_); }
  friend bool operator==(const PayloadBuffer& a, const PayloadBuffer& b) { return a.data_ == b.data_; }

  static std::uint64_t element_copies() noexcept {
    return element_copies_.load(std::memory_order_relaxed);
  }

 private:
  std::vector<double> data_;
  static inline std::atomic<std::uint64_t> element_copies_{0};
};

}  // namespace itercomm
