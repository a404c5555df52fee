#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "ubna/errors.hpp"

namespace ubna {

/// Uniform sampling without replacement within an epoch, reshuffled per
/// epoch, seeded. Batches that straddle an epoch boundary keep their size.
class EpochSampler {
public:
  EpochSampler(int population, std::uint64_t seed) : rng_(seed), order_(population) {
    if (population < 1) throw InvalidInput("EpochSampler: empty population");
    std::iota(order_.begin(), order_.end(), 0);
    reshuffle();
  }

  std::vector<int> next_batch(int batch_size) {
    std::vector<int> batch;
    batch.reserve(batch_size);
    while (static_cast<int>(batch.size()) < batch_size) {
      if (pos_ == order_.size()) reshuffle();
      batch.push_back(order_[pos_++]);
    }
    return batch;
  }

private:
  void reshuffle() {
    std::shuffle(order_.begin(), order_.end(), rng_);
    pos_ = 0;
  }

  std::mt19937_64 rng_;
  std::vector<int> order_;
  std::size_t pos_ = 0;
};

}  // namespace ubna
