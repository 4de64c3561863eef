#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "vlbirl/env.hpp"
#include "vlbirl/rng.hpp"

namespace vlbirl {

/// Bounded FIFO of learner transitions. Stores the stripped view only, so
/// nothing downstream of the buffer can touch the true reward. Sampling is
/// uniform with replacement and never mutates contents.
class RolloutBuffer {
 public:
  explicit RolloutBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("RolloutBuffer: capacity must be positive");
    storage_.reserve(capacity);
  }

  void push(const StrippedTransition& t) {
    if (storage_.size() < capacity_) {
      storage_.push_back(t);
    } else {
      storage_[head_] = t;  // overwrite oldest
      head_ = (head_ + 1) % capacity_;
    }
    ++insert_count_;
  }

  void push(const Trajectory& trajectory) {
    for (const auto& t : trajectory.transitions) push(strip(t));
  }

  void push(const std::vector<StrippedTransition>& ts) {
    for (const auto& t : ts) push(t);
  }

  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return storage_.empty(); }

  /// Total transitions ever pushed, independent of evictions.
  std::uint64_t insert_count() const { return insert_count_; }

  std::vector<StrippedTransition> sample(int batch_size, Rng& rng) const {
    if (storage_.empty()) throw std::logic_error("RolloutBuffer::sample: buffer is empty");
    if (batch_size < 1) throw std::invalid_argument("RolloutBuffer::sample: batch_size must be >= 1");
    std::vector<StrippedTransition> out;
    out.reserve(static_cast<std::size_t>(batch_size));
    for (int i = 0; i < batch_size; ++i) out.push_back(storage_[rng.uniform_index(storage_.size())]);
    return out;
  }

  /// Insertion-order access (oldest first); test and inspection hook.
  const StrippedTransition& oldest_first(std::size_t i) const {
    if (i >= storage_.size()) throw std::out_of_range("RolloutBuffer::oldest_first");
    if (storage_.size() < capacity_) return storage_[i];
    return storage_[(head_ + i) % capacity_];
  }

 private:
  std::vector<StrippedTransition> storage_;
  std::size_t capacity_;
  std::size_t head_ = 0;  // oldest slot once full
  std::uint64_t insert_count_ = 0;
};

}  // namespace vlbirl
