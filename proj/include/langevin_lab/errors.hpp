#pragma once

#include <stdexcept>
#include <string>

namespace langevin_lab {

/// A caller-supplied argument violates an operation's precondition.
class precondition_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The grid cannot represent the requested computation (window too small,
/// kernel under-resolved, mismatched grids, mass leaking through the boundary).
class grid_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A Markov chain produced a non-finite coordinate.
class chain_diverged : public std::runtime_error {
 public:
  chain_diverged(const std::string& what, std::size_t step)
      : std::runtime_error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

/// An iterative procedure did not converge within its budget.
class convergence_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
inline void require(bool cond, const std::string& msg) {
  if (!cond) throw precondition_error(msg);
}
}  // namespace detail

}  // namespace langevin_lab
