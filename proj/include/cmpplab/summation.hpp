#pragma once

#include <cmath>
#include <cstddef>

namespace cmpplab {

/// Neumaier compensated sum.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      carry_ += (sum_ - t) + x;
    } else {
      carry_ += (x - t) + sum_;
    }
    sum_ = t;
  }

  void merge(const CompensatedSum& other) noexcept {
    add(other.sum_);
    add(other.carry_);
  }

  double value() const noexcept { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

/// First and second moments of a sample, accumulated with compensated sums.
class MomentAccumulator {
 public:
  void add(double x) noexcept {
    ++count_;
    sum_.add(x);
    sum_sq_.add(x * x);
  }

  void merge(const MomentAccumulator& other) noexcept {
    count_ += other.count_;
    sum_.merge(other.sum_);
    sum_sq_.merge(other.sum_sq_);
  }

  std::size_t count() const noexcept { return count_; }
  double sum() const noexcept { return sum_.value(); }

  double mean() const noexcept {
    return count_ == 0 ? 0.0 : sum_.value() / static_cast<double>(count_);
  }

  /// Unbiased sample variance; zero for fewer than two observations.
  double variance() const noexcept {
    if (count_ < 2) return 0.0;
    const double n = static_cast<double>(count_);
    const double m = mean();
    const double v = (sum_sq_.value() - n * m * m) / (n - 1.0);
    return v > 0.0 ? v : 0.0;
  }

  double standard_error() const noexcept {
    return count_ == 0 ? 0.0 : std::sqrt(variance() / static_cast<double>(count_));
  }

 private:
  std::size_t count_ = 0;
  CompensatedSum sum_;
  CompensatedSum sum_sq_;
};

}  // namespace cmpplab
