#pragma once

#include <span>

namespace vifi {

// Pairwise (cascade) summation over a fixed split tree. The result depends
// only on the order of `values`, never on how the terms were produced.
double pairwise_sum(std::span<const double> values);

}  // namespace vifi
