#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace stochep {

/// Raised when an integrator or sampler produces a non-finite state.
class NumericalBlowup : public std::runtime_error
{
 public:
  NumericalBlowup(const std::string& what, std::size_t step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"),
        step_(step)
  {
  }

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace stochep
