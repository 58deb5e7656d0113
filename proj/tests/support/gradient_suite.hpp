#pragma once

// Finite-difference checks of every differentiable block on a 6-node toy
// graph. Shared by the unit tests and the acceptance runner.

#include <cstdint>
#include <string>
#include <vector>

#include "conceptgcn/graph_data.hpp"

namespace conceptgcn::testkit {

struct GradientResult {
    std::string block;     // e.g. "gcn_layer.weight"
    double max_rel_error;  // worst entry over the checked matrix
};

inline constexpr double kGradEpsilon = 1e-5;
inline constexpr double kGradTolerance = 1e-4;

// 6 nodes, 5 features, 3 classes; node 5 is isolated.
AttributedGraph toy_graph();

std::vector<GradientResult> gradient_suite(std::uint64_t seed);

}  // namespace conceptgcn::testkit
