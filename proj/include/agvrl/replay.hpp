#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "agvrl/gridworld.hpp"
#include "agvrl/rng.hpp"

namespace agvrl::replay {

struct Transition {
  Eigen::VectorXd obs;
  grid::Action action = grid::Action::Stay;
  double reward = 0.0;
  Eigen::VectorXd next_obs;
  bool done = false;
};

struct InsufficientSamples : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Fixed-capacity ring buffer with strict FIFO overwrite and uniform
/// with-replacement sampling.
class ReplayBuffer {
public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
    storage_.reserve(capacity);
  }

  void push(Transition t) {
    if (storage_.size() < capacity_) {
      storage_.push_back(std::move(t));
    } else {
      storage_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
  }

  std::vector<Transition> sample(std::size_t batch_size, RandomStream& stream) const {
    if (storage_.size() < batch_size)
      throw InsufficientSamples("buffer holds " + std::to_string(storage_.size()) +
                                " transitions, need " + std::to_string(batch_size));
    std::vector<Transition> batch;
    batch.reserve(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i)
      batch.push_back(storage_[stream.uniform_index(storage_.size())]);
    return batch;
  }

  std::size_t size() const { return storage_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& at(std::size_t i) const { return storage_.at(i); }

private:
  std::size_t capacity_;
  std::vector<Transition> storage_;
  std::size_t next_ = 0;
};

}  // namespace agvrl::replay
