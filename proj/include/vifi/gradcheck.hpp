#pragma once

#include "vifi/random.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace vifi {

/// One seeded instance of a scalar functional and its analytic gradient.
struct GradcheckCase {
  Eigen::VectorXd x;
  std::function<double(const Eigen::VectorXd&)> f;
  Eigen::VectorXd gradient;
  double step = 1e-4;
};

struct GradcheckOp {
  std::string name;
  double threshold;  ///< maximum accepted relative error
  std::function<GradcheckCase(Rng&)> make;
};

struct GradcheckOptions {
  int samples = 100;           ///< accepted sample points per operation
  std::uint64_t seed = 1;
  bool inject_sign_flip = false;  ///< negate analytic gradients (checker self-test)
};

struct GradcheckRow {
  std::string name;
  double max_rel_error = 0.0;
  int samples = 0;
  int skipped = 0;  ///< points near a kink or with a negligible derivative
  double threshold = 0.0;
  bool passed = false;
};

/// Every operation with an analytic gradient.
const std::vector<GradcheckOp>& gradcheck_registry();

/// Fourth-order central differences at coordinates where the step-h and
/// step-2h estimates agree; rel = |a - n| / max(|a|, |n|).
GradcheckRow run_gradcheck(const GradcheckOp& op, const GradcheckOptions& options);
std::vector<GradcheckRow> run_gradcheck_suite(const GradcheckOptions& options);

std::string format_gradcheck_table(const std::vector<GradcheckRow>& rows);

}  // namespace vifi
