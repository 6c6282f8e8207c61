#pragma once

#include <cstdint>
#include <vector>

#include "semi2i/nn.hpp"

namespace semi2i {

struct AdamOptions {
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam over a fixed parameter list. Moments are indexed by position, so the
/// list passed to step() must be the one given at construction.
class Adam {
 public:
  Adam() = default;
  Adam(const ParameterList& params, AdamOptions options);

  /// One bias-corrected update from the accumulated gradients. Parameters
  /// without a gradient are left untouched.
  void step(const ParameterList& params, double lr);

  std::int64_t steps() const { return steps_; }
  const AdamOptions& options() const { return options_; }

  /// Moment buffers as named tensors ("<prefix>m/<param>", "<prefix>v/<param>")
  /// for checkpointing.
  ParameterList state(const ParameterList& params, const std::string& prefix) const;
  void load_state(const ParameterList& params, const ParameterList& state, const std::string& prefix,
                  std::int64_t steps);

 private:
  AdamOptions options_;
  std::int64_t steps_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

}  // namespace semi2i
