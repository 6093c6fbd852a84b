#pragma once

#include <memory>

#include "sbs/design_spec.hpp"
#include "sbs/designs.hpp"

namespace sbs {

struct StandardizeOptions {
  double tolerance = 1e-8;
  int max_iter = 1000;
};

/// A design bound to a frame, with the per-frame work done up front: distance
/// matrices for PWD, SCPS and HPWD, the standardized gamma-powered matrix for
/// HPWD and PWD, PWD log weights. `draw` is const and safe to call from
/// several threads with separate generators.
class Sampler {
 public:
  Sampler(const Frame& frame, DesignKind kind, StandardizeOptions options = {});

  SampleDraw draw(std::size_t n, Rng& rng) const;

  const DesignKind& kind() const noexcept { return kind_; }
  std::size_t population() const noexcept { return population_; }
  /// Wall-clock seconds spent in the constructor.
  double setup_seconds() const noexcept { return setup_seconds_; }
  /// Standardized matrix for HPWD/PWD, null otherwise.
  const StandardizedDistance* standardized() const noexcept { return standardized_.get(); }

 private:
  DesignKind kind_;
  std::size_t population_ = 0;
  std::shared_ptr<const Frame> frame_;
  std::shared_ptr<const DistanceMatrix> distances_;
  std::shared_ptr<const StandardizedDistance> standardized_;
  std::shared_ptr<const DenseMatrix> log_weights_;
  double setup_seconds_ = 0.0;
};

}  // namespace sbs
