#include "sbs/sampler.hpp"

#include <chrono>

#include "sbs/errors.hpp"

namespace sbs {

Sampler::Sampler(const Frame& frame, DesignKind kind, StandardizeOptions options)
    : kind_(std::move(kind)), population_(frame.size()) {
  const auto start = std::chrono::steady_clock::now();
  if (population_ < 1) throw ParameterError("cannot sample from an empty frame");

  if (const auto* h = std::get_if<HpwdDesign>(&kind_)) {
    if (population_ >= 2)
      standardized_ = std::make_shared<StandardizedDistance>(
          standardize(apply_gamma(build_distances(frame), h->gamma), options.tolerance,
                      options.max_iter));
  } else if (const auto* p = std::get_if<PwdDesign>(&kind_)) {
    if (population_ >= 2) {
      standardized_ = std::make_shared<StandardizedDistance>(
          standardize(apply_gamma(build_distances(frame), p->gamma), options.tolerance,
                      options.max_iter));
      log_weights_ = std::make_shared<DenseMatrix>(
          pwd_log_weights(DistanceMatrix{standardized_->values, p->gamma}));
    }
  } else if (std::holds_alternative<ScpsDesign>(kind_)) {
    if (population_ >= 2) distances_ = std::make_shared<DistanceMatrix>(build_distances(frame));
  } else if (std::holds_alternative<LpmDesign>(kind_)) {
    frame_ = std::make_shared<Frame>(frame);
  }
  setup_seconds_ =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

SampleDraw Sampler::draw(std::size_t n, Rng& rng) const {
  if (population_ == 1) {
    if (n != 1) throw ParameterError("sample size exceeds population size 1");
    return {{0}};
  }
  if (std::holds_alternative<SrsDesign>(kind_)) return draw_srs(population_, n, rng);
  if (std::holds_alternative<HpwdDesign>(kind_)) return draw_hpwd(*standardized_, n, rng);
  if (const auto* p = std::get_if<PwdDesign>(&kind_)) {
    const std::size_t proposals = p->proposals ? p->proposals : 25 * population_;
    return draw_pwd_prepared(*log_weights_, n, proposals, rng);
  }
  if (const auto* l = std::get_if<LpmDesign>(&kind_))
    return draw_lpm(*frame_, equal_probabilities(population_, n), l->variant, rng);
  return draw_scps(*distances_, equal_probabilities(population_, n), rng);
}

}  // namespace sbs
