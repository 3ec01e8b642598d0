#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "diet/augment.hpp"
#include "diet/dataset.hpp"
#include "diet/matrix.hpp"
#include "diet/rng.hpp"

namespace diet {

struct Batch {
  Matrix x;
  std::vector<std::size_t> targets;  // row indices, i.e. the DIET classes
};

// One epoch of shuffled, augmented mini-batches. The visiting order depends
// only on (seed, epoch); sample n's augmentation uses the stream
// (seed, epoch, n), so it is unaffected by batch size or position.
class EpochPlan {
 public:
  static constexpr std::uint64_t kTagPermutation = 0xE90C;
  static constexpr std::uint64_t kTagAugment = 0xA06;

  EpochPlan(UnlabeledView view, std::size_t batch_size, std::uint64_t epoch,
            std::uint64_t seed, std::optional<AugmentationPolicy> policy)
      : view_(view),
        batch_size_(batch_size),
        epoch_(epoch),
        seed_(seed),
        policy_(std::move(policy)) {
    const std::size_t n = view_.size();
    if (batch_size_ < 1 || batch_size_ > n) {
      throw SpecError("batch size " + std::to_string(batch_size_) +
                      " outside [1, " + std::to_string(n) + "]");
    }
    if (policy_) policy_->validate();
    order_.resize(n);
    for (std::size_t i = 0; i < n; ++i) order_[i] = i;
    Rng rng = Rng::derive(seed_, {kTagPermutation, epoch_});
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order_[i - 1], order_[rng.below(i)]);
    }
  }

  std::size_t batch_count() const {
    return (order_.size() + batch_size_ - 1) / batch_size_;
  }

  std::span<const std::size_t> order() const { return order_; }

  Batch batch(std::size_t b) const {
    const std::size_t lo = b * batch_size_;
    const std::size_t hi = std::min(order_.size(), lo + batch_size_);
    Batch out{Matrix(hi - lo, view_.dim()), {}};
    out.targets.assign(order_.begin() + static_cast<std::ptrdiff_t>(lo),
                       order_.begin() + static_cast<std::ptrdiff_t>(hi));
    for (std::size_t i = 0; i < out.targets.size(); ++i) {
      const std::size_t n = out.targets[i];
      auto src = view_.features->row(n);
      auto dst = out.x.row(i);
      if (policy_) {
        Rng rng = Rng::derive(seed_, {kTagAugment, epoch_, n});
        auto aug = augment(src, *policy_, view_.grid_side, rng);
        std::copy(aug.begin(), aug.end(), dst.begin());
      } else {
        std::copy(src.begin(), src.end(), dst.begin());
      }
    }
    return out;
  }

 private:
  UnlabeledView view_;
  std::size_t batch_size_;
  std::uint64_t epoch_;
  std::uint64_t seed_;
  std::optional<AugmentationPolicy> policy_;
  std::vector<std::size_t> order_;
};

inline std::vector<Batch> epoch_batches(const IndexedDataset& ds,
                                        std::size_t batch_size,
                                        std::uint64_t epoch, std::uint64_t seed,
                                        std::optional<AugmentationPolicy> policy =
                                            std::nullopt) {
  EpochPlan plan(ds.unlabeled(), batch_size, epoch, seed, std::move(policy));
  std::vector<Batch> out;
  out.reserve(plan.batch_count());
  for (std::size_t b = 0; b < plan.batch_count(); ++b) out.push_back(plan.batch(b));
  return out;
}

}  // namespace diet
