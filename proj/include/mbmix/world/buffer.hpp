// Copyright 2026 The mbmix Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MBMIX_WORLD_BUFFER_HPP_
#define MBMIX_WORLD_BUFFER_HPP_

#include <vector>

#include "mbmix/env/trajectories.hpp"

namespace mbmix::world {

using env::Transition;

// FIFO ring buffer of real transitions. Index 0 is the oldest entry.
class EnvBuffer {
 public:
  explicit EnvBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw Error("EnvBuffer: capacity must be >= 1");
    data_.reserve(std::min<std::size_t>(capacity, 1 << 16));
  }

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  std::uint64_t insertions() const { return inserted_; }

  void add(Transition t) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
    ++inserted_;
  }
  void add(const std::vector<Transition>& ts) {
    for (const auto& t : ts) add(t);
  }

  const Transition& at(std::size_t i) const {
    if (i >= data_.size()) throw Error("EnvBuffer: index out of range");
    return data_[(head_ + i) % data_.size()];
  }

  // k distinct entries drawn uniformly.
  std::vector<const Transition*> sample(std::size_t k, Rng& rng) const {
    if (k > size()) throw Error("EnvBuffer: batch larger than buffer");
    std::vector<const Transition*> out;
    for (std::size_t i : rng.sample_without_replacement(size(), k)) out.push_back(&at(i));
    return out;
  }

  // k entries drawn uniformly (with replacement) from the newest `window`.
  std::vector<const Transition*> sample_recent(std::size_t k, std::size_t window,
                                               Rng& rng) const {
    if (empty()) throw Error("EnvBuffer: sampling from an empty buffer");
    const std::size_t w = window == 0 ? size() : std::min(window, size());
    std::vector<const Transition*> out;
    for (std::size_t i = 0; i < k; ++i) out.push_back(&at(size() - w + rng.index(w)));
    return out;
  }

 private:
  std::size_t capacity_;
  std::vector<Transition> data_;
  std::size_t head_ = 0;
  std::uint64_t inserted_ = 0;
};

}  // namespace mbmix::world

#endif  // MBMIX_WORLD_BUFFER_HPP_
