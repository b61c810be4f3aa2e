#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace collapse {

/// A configuration left the open cone of strictly increasing positions,
/// or an argument lies outside the domain of a functional.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Caller broke a documented precondition (e.g. non-zero center of mass
/// passed to a criterion that requires a centered state).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative method failed to converge. Carries the best iterate seen.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& what, Eigen::VectorXd best)
      : std::runtime_error(what), best_iterate_(std::move(best)) {}

  const Eigen::VectorXd& best_iterate() const noexcept { return best_iterate_; }

 private:
  Eigen::VectorXd best_iterate_;
};

}  // namespace collapse
