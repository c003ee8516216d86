#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mhqg/tape.hpp"

namespace mhqg::num {

struct GradCheckEntry {
  std::string param;
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_err = 0.0;
  double tolerance = 0.0;

  bool passed() const { return max_rel_err < tolerance; }
  std::string summary() const;
};

// Builds a scalar loss on a fresh tape from the current parameter values.
using LossClosure = std::function<Var(Tape&)>;

// Central finite-difference check of analytic gradients, every element of
// every parameter. The error measure is |analytic - numeric| divided by
// max(1, |analytic|, |numeric|), i.e. absolute below magnitude 1 and
// relative above, which keeps difference-quotient noise out of tiny
// gradients.
//
// The closure must be deterministic: it is evaluated twice up front and
// rejected (ConfigError) if the two losses differ, which catches unseeded
// randomness.
GradCheckReport finite_difference_check(const LossClosure& closure,
                                        const std::vector<Parameter*>& params, double epsilon,
                                        double tolerance);

}  // namespace mhqg::num
