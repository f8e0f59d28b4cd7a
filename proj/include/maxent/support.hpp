#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "maxent/common.hpp"

namespace maxent {

// Closed half-space { x : normal . x <= offset }.
struct Halfspace {
  std::vector<double> normal;
  double offset = 0.0;
};

enum class SupportShape { FullSpace, Box, HalfspaceIntersection, BoxWithHalfspaces };

// A closed subset of R^d on which densities are supported: an axis-aligned
// box with extended-real bounds, optionally intersected with half-spaces.
// Membership tests are exact; the volume is exact for boxes and a
// deterministic Monte-Carlo estimate when half-spaces cut a finite box.
class SupportSet {
 public:
  static SupportSet full_space(int dimension) {
    return SupportSet(std::vector<double>(dimension, -kInf),
                      std::vector<double>(dimension, kInf), {});
  }

  static SupportSet box(std::vector<double> lower, std::vector<double> upper) {
    return SupportSet(std::move(lower), std::move(upper), {});
  }

  static SupportSet box_with_halfspaces(std::vector<double> lower,
                                        std::vector<double> upper,
                                        std::vector<Halfspace> halfspaces) {
    return SupportSet(std::move(lower), std::move(upper), std::move(halfspaces));
  }

  static SupportSet halfspace_intersection(int dimension,
                                           std::vector<Halfspace> halfspaces) {
    return SupportSet(std::vector<double>(dimension, -kInf),
                      std::vector<double>(dimension, kInf),
                      std::move(halfspaces));
  }

  int dimension() const { return static_cast<int>(lower_.size()); }

  bool contains(std::span<const double> x) const {
    for (size_t i = 0; i < lower_.size(); ++i)
      if (x[i] < lower_[i] || x[i] > upper_[i]) return false;
    for (const auto& h : halfspaces_) {
      double dot = 0.0;
      for (size_t i = 0; i < h.normal.size(); ++i) dot += h.normal[i] * x[i];
      if (dot > h.offset) return false;
    }
    return true;
  }

  double volume() const { return volume_; }
  bool finite_volume() const { return std::isfinite(volume_); }
  bool volume_is_estimate() const { return volume_is_estimate_; }

  const std::vector<double>& lower() const { return lower_; }
  const std::vector<double>& upper() const { return upper_; }
  const std::vector<Halfspace>& halfspaces() const { return halfspaces_; }

  SupportShape shape() const {
    const bool boxed = std::any_of(lower_.begin(), lower_.end(),
                                   [](double v) { return std::isfinite(v); }) ||
                       std::any_of(upper_.begin(), upper_.end(),
                                   [](double v) { return std::isfinite(v); });
    if (halfspaces_.empty()) return boxed ? SupportShape::Box : SupportShape::FullSpace;
    return boxed ? SupportShape::BoxWithHalfspaces : SupportShape::HalfspaceIntersection;
  }

  bool box_is_finite() const {
    for (size_t i = 0; i < lower_.size(); ++i)
      if (!std::isfinite(lower_[i]) || !std::isfinite(upper_[i])) return false;
    return true;
  }

 private:
  SupportSet(std::vector<double> lower, std::vector<double> upper,
             std::vector<Halfspace> halfspaces)
      : lower_(std::move(lower)),
        upper_(std::move(upper)),
        halfspaces_(std::move(halfspaces)) {
    if (lower_.empty() || lower_.size() != upper_.size())
      throw std::invalid_argument("SupportSet: inconsistent box bounds");
    for (size_t i = 0; i < lower_.size(); ++i) {
      if (std::isnan(lower_[i]) || std::isnan(upper_[i]))
        throw std::invalid_argument("SupportSet: NaN bound");
      if (lower_[i] >= upper_[i])
        throw std::invalid_argument("SupportSet: empty box side");
    }
    for (const auto& h : halfspaces_) {
      if (h.normal.size() != lower_.size())
        throw std::invalid_argument("SupportSet: halfspace dimension mismatch");
      if (!std::isfinite(h.offset))
        throw std::invalid_argument("SupportSet: non-finite halfspace offset");
      double norm = 0.0;
      for (double v : h.normal) {
        if (!std::isfinite(v))
          throw std::invalid_argument("SupportSet: non-finite halfspace normal");
        norm += std::abs(v);
      }
      if (norm == 0.0)
        throw std::invalid_argument("SupportSet: zero halfspace normal");
    }
    compute_volume();
    if (volume_ <= 0.0)
      throw std::invalid_argument("SupportSet: support has zero volume");
  }

  void compute_volume() {
    double box_vol = 1.0;
    for (size_t i = 0; i < lower_.size(); ++i) box_vol *= upper_[i] - lower_[i];
    if (halfspaces_.empty()) {
      volume_ = box_vol;
      return;
    }
    if (!box_is_finite()) {
      // A half-space cut of an unbounded box may still be bounded, but deciding
      // that requires solving linear programs; we report +inf, which is
      // conservative for the finite-volume existence route.
      volume_ = kInf;
      return;
    }
    // Deterministic quasi-random hit ratio over the bounding box.
    const size_t n = 100000;
    const int d = dimension();
    size_t hits = 0;
    std::vector<double> x(d);
    for (size_t k = 1; k <= n; ++k) {
      halton_point(k, x);
      for (int i = 0; i < d; ++i) x[i] = lower_[i] + x[i] * (upper_[i] - lower_[i]);
      if (contains(x)) ++hits;
    }
    volume_ = box_vol * static_cast<double>(hits) / static_cast<double>(n);
    volume_is_estimate_ = true;
  }

  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<Halfspace> halfspaces_;
  double volume_ = kInf;
  bool volume_is_estimate_ = false;
};

}  // namespace maxent
